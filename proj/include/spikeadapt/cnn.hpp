/*
 * Copyright 2026 The spikeadapt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spikeadapt/tensor.hpp"

namespace spikeadapt {

/// Layer sizes of the two-convolution classifier. Convolutions use stride 1
/// and zero "same" padding (odd kernels only); pooling is non-overlapping
/// with floor semantics.
struct CnnArchitecture {
  std::size_t conv1_filters = 12;
  std::size_t conv1_kernel = 5;
  std::size_t conv2_filters = 64;
  std::size_t conv2_kernel = 3;
  std::size_t pool = 2;
  std::size_t classes = 2;

  friend bool operator==(const CnnArchitecture&, const CnnArchitecture&) = default;
};

struct Conv2d {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]

  std::size_t out_channels() const { return weight.extent(0); }
  std::size_t in_channels() const { return weight.extent(1); }
  std::size_t kernel() const { return weight.extent(2); }

  friend bool operator==(const Conv2d&, const Conv2d&) = default;
};

struct Dense {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  friend bool operator==(const Dense&, const Dense&) = default;
};

/// conv1 -> ReLU -> pool -> conv2 -> ReLU -> pool -> flatten -> dense logits.
/// Input is a single-channel image of (EEG channels x samples).
struct CnnModel {
  std::size_t input_rows = 0;
  std::size_t input_cols = 0;
  CnnArchitecture arch;
  Conv2d conv1;
  Conv2d conv2;
  Dense dense;

  Shape input_shape() const { return {1, input_rows, input_cols}; }
  Shape conv1_shape() const;
  Shape pool1_shape() const;
  Shape conv2_shape() const;
  Shape pool2_shape() const;
  std::size_t feature_count() const;

  friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

/// Glorot-uniform weights, zero biases.
CnnModel make_cnn(std::size_t input_rows, std::size_t input_cols, std::uint64_t seed,
                  const CnnArchitecture& arch = {});

// Layer primitives. Exposed for quantization-aware training and for tests.

/// input [C,H,W], weight [F,C,k,k], bias [F] -> [F,H,W].
Tensor conv2d_same(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Accumulates dL/dweight and dL/dbias; writes dL/dinput when requested.
void conv2d_same_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                          Tensor& grad_weight, Tensor& grad_bias, Tensor* grad_input);

Tensor relu(const Tensor& x);

struct PoolResult {
  Tensor output;
  /// Flat input index of the selected element for every output element.
  std::vector<std::size_t> argmax;
};

/// Non-overlapping max pooling. Ties select the first maximum in row-major order.
PoolResult max_pool(const Tensor& input, std::size_t pool);
Tensor max_pool_backward(const Tensor& grad_output, std::span<const std::size_t> argmax,
                         const Shape& input_shape);

/// Flattens `input` and applies weight [out, in] and bias [out].
Tensor dense_forward(const Tensor& input, const Dense& layer);

struct ForwardCache {
  Tensor input;  // [1,H,W]
  Tensor conv1;  // pre-activation
  Tensor pool1;
  std::vector<std::size_t> pool1_argmax;
  Tensor conv2;
  Tensor pool2;
  std::vector<std::size_t> pool2_argmax;
  Tensor logits;
};

ForwardCache forward_cached(const CnnModel& model, const Tensor& input);

/// Accepts [rows, cols] or [1, rows, cols]; returns `classes` logits.
Tensor forward_cnn(const CnnModel& model, const Tensor& input);

/// weight[label] * softmax cross-entropy of `logits`.
double weighted_cross_entropy(std::span<const double> logits, int label,
                              std::span<const double> class_weights);

/// Same loss; also writes dL/dlogits into `grad`.
double weighted_cross_entropy_grad(std::span<const double> logits, int label,
                                   std::span<const double> class_weights, std::span<double> grad);

struct TrainConfig {
  std::size_t epochs = 125;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::vector<double> class_weights{1.0, 1.0};

  void validate() const;
};

struct Example {
  Tensor input;
  int label = 0;
};

/// Gradient container with the parameter layout of a model.
struct CnnGradients {
  static constexpr std::size_t kCount = 6;
  std::array<Tensor, kCount> tensors;

  static CnnGradients zeros_like(const CnnModel& model);
  void scale(double factor);
};

struct ParameterRef {
  const char* name;
  Tensor* tensor;
};
std::array<ParameterRef, CnnGradients::kCount> parameters(CnnModel& model);

/// Forward + backward for one example; adds into `grads` and returns the loss.
double accumulate_gradients(const CnnModel& model, const Example& example,
                            std::span<const double> class_weights, CnnGradients& grads);

/// Momentum gradient descent state: v <- momentum * v - lr * g; w <- w + v.
class MomentumSgd {
 public:
  explicit MomentumSgd(const CnnModel& model);
  void apply(CnnModel& model, const CnnGradients& grads, double learning_rate, double momentum);

 private:
  CnnGradients velocity_;
};

/// One update on `batch`. Returns the mean weighted loss before the update.
/// Throws DivergenceError naming the layer when the loss or a gradient is non-finite.
double train_step(CnnModel& model, MomentumSgd& optimizer, std::span<const Example> batch,
                  const TrainConfig& config);

struct Stage1Result {
  CnnModel best;
  std::size_t best_epoch = 0;  // 1-based
  std::vector<double> epoch_losses;
};

/// Trains for config.epochs epochs (seeded shuffles) and keeps the parameter
/// snapshot taken at the end of the epoch with the lowest mean training loss.
Stage1Result fit_stage1(CnnModel model, std::span<const Example> dataset, const TrainConfig& config);

/// argmax of the logits for each example.
std::vector<int> predict(const CnnModel& model, std::span<const Example> dataset);

}  // namespace spikeadapt
