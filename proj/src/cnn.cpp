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

#include "spikeadapt/cnn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spikeadapt/random.hpp"

namespace spikeadapt {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require_odd_kernel(std::size_t k) {
  if (k % 2 == 0) throw ShapeError("same-padded convolution needs an odd kernel, got " + std::to_string(k));
}

// Patch matrix [C*k*k, H*W] for a same-padded convolution.
RowMatrix im2col(const Tensor& input, std::size_t k) {
  const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
  const long pad = static_cast<long>(k / 2);
  RowMatrix cols = RowMatrix::Zero(static_cast<long>(C * k * k), static_cast<long>(H * W));
  const double* src = input.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = cols.data() + ((c * k + ky) * k + kx) * H * W;
        const long dx = static_cast<long>(kx) - pad;
        const long x_begin = std::max(0L, -dx);
        const long x_end = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
        for (std::size_t y = 0; y < H; ++y) {
          const long iy = static_cast<long>(y + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(H) || x_begin >= x_end) continue;
          const double* row = src + (c * H + static_cast<std::size_t>(iy)) * W;
          std::copy(row + x_begin + dx, row + x_end + dx, dst + y * W + x_begin);
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& cols, std::size_t k, Tensor& grad_input) {
  const std::size_t C = grad_input.extent(0), H = grad_input.extent(1), W = grad_input.extent(2);
  const long pad = static_cast<long>(k / 2);
  double* dst = grad_input.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = cols.data() + ((c * k + ky) * k + kx) * H * W;
        const long dx = static_cast<long>(kx) - pad;
        const long x_begin = std::max(0L, -dx);
        const long x_end = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
        for (std::size_t y = 0; y < H; ++y) {
          const long iy = static_cast<long>(y + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          double* row = dst + (c * H + static_cast<std::size_t>(iy)) * W;
          for (long x = x_begin; x < x_end; ++x) row[x + dx] += src[y * W + x];
        }
      }
    }
  }
}

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor as_image(const CnnModel& model, const Tensor& input) {
  const Shape expected = model.input_shape();
  if (input.rank() == 2 && input.extent(0) == model.input_rows && input.extent(1) == model.input_cols) {
    return input.reshaped(expected);
  }
  require_shape(input, expected, "forward_cnn input");
  return input;
}

const char* const kParameterNames[CnnGradients::kCount] = {"conv1.weight", "conv1.bias", "conv2.weight",
                                                           "conv2.bias",   "dense.weight", "dense.bias"};

}  // namespace

Shape CnnModel::conv1_shape() const { return {arch.conv1_filters, input_rows, input_cols}; }

Shape CnnModel::pool1_shape() const {
  return {arch.conv1_filters, input_rows / arch.pool, input_cols / arch.pool};
}

Shape CnnModel::conv2_shape() const {
  const Shape p = pool1_shape();
  return {arch.conv2_filters, p[1], p[2]};
}

Shape CnnModel::pool2_shape() const {
  const Shape c = conv2_shape();
  return {c[0], c[1] / arch.pool, c[2] / arch.pool};
}

std::size_t CnnModel::feature_count() const { return shape_volume(pool2_shape()); }

CnnModel make_cnn(std::size_t input_rows, std::size_t input_cols, std::uint64_t seed,
                  const CnnArchitecture& arch) {
  require_odd_kernel(arch.conv1_kernel);
  require_odd_kernel(arch.conv2_kernel);
  if (arch.pool == 0 || arch.classes < 2) throw ValidationError("invalid architecture");
  CnnModel m;
  m.input_rows = input_rows;
  m.input_cols = input_cols;
  m.arch = arch;
  if (m.feature_count() == 0) {
    throw ShapeError("input " + std::to_string(input_rows) + "x" + std::to_string(input_cols) +
                     " is too small for two pooling stages");
  }
  Rng rng(derive_seed(seed, {0xC0DEu}));
  const std::size_t k1 = arch.conv1_kernel, k2 = arch.conv2_kernel;
  m.conv1.weight = glorot({arch.conv1_filters, 1, k1, k1}, k1 * k1, arch.conv1_filters * k1 * k1, rng);
  m.conv1.bias = Tensor({arch.conv1_filters});
  m.conv2.weight = glorot({arch.conv2_filters, arch.conv1_filters, k2, k2}, arch.conv1_filters * k2 * k2,
                          arch.conv2_filters * k2 * k2, rng);
  m.conv2.bias = Tensor({arch.conv2_filters});
  m.dense.weight = glorot({arch.classes, m.feature_count()}, m.feature_count(), arch.classes, rng);
  m.dense.bias = Tensor({arch.classes});
  return m;
}

Tensor conv2d_same(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 3 || weight.rank() != 4 || weight.extent(1) != input.extent(0) ||
      weight.extent(2) != weight.extent(3)) {
    throw ShapeError("conv2d: input " + shape_string(input.shape()) + " incompatible with weight " +
                     shape_string(weight.shape()));
  }
  const std::size_t F = weight.extent(0), k = weight.extent(2);
  require_odd_kernel(k);
  const Shape bias_shape{F};
  require_shape(bias, bias_shape, "conv2d bias");
  const std::size_t H = input.extent(1), W = input.extent(2);
  const RowMatrix cols = im2col(input, k);
  Tensor out({F, H, W});
  MatrixMap out_m(out.data().data(), static_cast<long>(F), static_cast<long>(H * W));
  ConstMatrixMap w_m(weight.data().data(), static_cast<long>(F), static_cast<long>(weight.size() / F));
  out_m.noalias() = w_m * cols;
  for (std::size_t f = 0; f < F; ++f) out_m.row(static_cast<long>(f)).array() += bias[f];
  return out;
}

void conv2d_same_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                          Tensor& grad_weight, Tensor& grad_bias, Tensor* grad_input) {
  const std::size_t F = weight.extent(0), k = weight.extent(2);
  const std::size_t H = input.extent(1), W = input.extent(2);
  const RowMatrix cols = im2col(input, k);
  ConstMatrixMap g_m(grad_output.data().data(), static_cast<long>(F), static_cast<long>(H * W));
  MatrixMap gw_m(grad_weight.data().data(), static_cast<long>(F), static_cast<long>(weight.size() / F));
  gw_m.noalias() += g_m * cols.transpose();
  for (std::size_t f = 0; f < F; ++f) grad_bias[f] += g_m.row(static_cast<long>(f)).sum();
  if (grad_input != nullptr) {
    ConstMatrixMap w_m(weight.data().data(), static_cast<long>(F), static_cast<long>(weight.size() / F));
    RowMatrix grad_cols = w_m.transpose() * g_m;
    *grad_input = Tensor(input.shape());
    col2im_add(grad_cols, k, *grad_input);
  }
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = std::max(v, 0.0);
  return y;
}

PoolResult max_pool(const Tensor& input, std::size_t pool) {
  const std::size_t C = input.extent(0), H = input.extent(1), W = input.extent(2);
  const std::size_t OH = H / pool, OW = W / pool;
  PoolResult r{Tensor({C, OH, OW}), std::vector<std::size_t>(C * OH * OW)};
  std::size_t o = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox, ++o) {
        std::size_t best = (c * H + oy * pool) * W + ox * pool;
        double best_v = input[best];
        for (std::size_t dy = 0; dy < pool; ++dy) {
          for (std::size_t dx = 0; dx < pool; ++dx) {
            const std::size_t idx = (c * H + oy * pool + dy) * W + ox * pool + dx;
            if (input[idx] > best_v) {
              best_v = input[idx];
              best = idx;
            }
          }
        }
        r.output[o] = best_v;
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor max_pool_backward(const Tensor& grad_output, std::span<const std::size_t> argmax,
                         const Shape& input_shape) {
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_output[i];
  return g;
}

Tensor dense_forward(const Tensor& input, const Dense& layer) {
  const std::size_t out = layer.weight.extent(0), in = layer.weight.extent(1);
  if (input.size() != in) {
    throw ShapeError("dense: expected " + std::to_string(in) + " inputs, got " + std::to_string(input.size()));
  }
  Tensor y({out});
  ConstMatrixMap w_m(layer.weight.data().data(), static_cast<long>(out), static_cast<long>(in));
  Eigen::Map<const Eigen::VectorXd> x(input.data().data(), static_cast<long>(in));
  Eigen::Map<Eigen::VectorXd> y_v(y.data().data(), static_cast<long>(out));
  y_v.noalias() = w_m * x;
  for (std::size_t o = 0; o < out; ++o) y[o] += layer.bias[o];
  return y;
}

ForwardCache forward_cached(const CnnModel& model, const Tensor& input) {
  ForwardCache c;
  c.input = as_image(model, input);
  c.conv1 = conv2d_same(c.input, model.conv1.weight, model.conv1.bias);
  PoolResult p1 = max_pool(relu(c.conv1), model.arch.pool);
  c.pool1 = std::move(p1.output);
  c.pool1_argmax = std::move(p1.argmax);
  c.conv2 = conv2d_same(c.pool1, model.conv2.weight, model.conv2.bias);
  PoolResult p2 = max_pool(relu(c.conv2), model.arch.pool);
  c.pool2 = std::move(p2.output);
  c.pool2_argmax = std::move(p2.argmax);
  c.logits = dense_forward(c.pool2, model.dense);
  return c;
}

Tensor forward_cnn(const CnnModel& model, const Tensor& input) { return forward_cached(model, input).logits; }

double weighted_cross_entropy(std::span<const double> logits, int label, std::span<const double> class_weights) {
  std::vector<double> grad(logits.size());
  return weighted_cross_entropy_grad(logits, label, class_weights, grad);
}

double weighted_cross_entropy_grad(std::span<const double> logits, int label,
                                   std::span<const double> class_weights, std::span<double> grad) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size() ||
      class_weights.size() != logits.size()) {
    throw ValidationError("weighted_cross_entropy: label/weights do not match " +
                          std::to_string(logits.size()) + " logits");
  }
  for (double z : logits) {
    if (!std::isfinite(z)) throw DivergenceError("weighted_cross_entropy: non-finite logit");
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  const double lse = zmax + std::log(sum);
  const double w = class_weights[static_cast<std::size_t>(label)];
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = std::exp(logits[i] - lse);
    grad[i] = w * (p - (static_cast<int>(i) == label ? 1.0 : 0.0));
  }
  // -log softmax via log1p keeps tiny losses (confident correct logits) accurate.
  double rest = 0.0;
  const double zl = logits[static_cast<std::size_t>(label)];
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) != label) rest += std::exp(logits[i] - zl);
  }
  return w * std::log1p(rest);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train config: batch size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ValidationError("train config: learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("train config: momentum must be in [0,1)");
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ValidationError("train config: class weights must be positive");
  }
}

CnnGradients CnnGradients::zeros_like(const CnnModel& m) {
  return CnnGradients{{Tensor(m.conv1.weight.shape()), Tensor(m.conv1.bias.shape()),
                       Tensor(m.conv2.weight.shape()), Tensor(m.conv2.bias.shape()),
                       Tensor(m.dense.weight.shape()), Tensor(m.dense.bias.shape())}};
}

void CnnGradients::scale(double factor) {
  for (Tensor& t : tensors) {
    for (double& v : t.data()) v *= factor;
  }
}

std::array<ParameterRef, CnnGradients::kCount> parameters(CnnModel& m) {
  return {ParameterRef{kParameterNames[0], &m.conv1.weight}, ParameterRef{kParameterNames[1], &m.conv1.bias},
          ParameterRef{kParameterNames[2], &m.conv2.weight}, ParameterRef{kParameterNames[3], &m.conv2.bias},
          ParameterRef{kParameterNames[4], &m.dense.weight}, ParameterRef{kParameterNames[5], &m.dense.bias}};
}

double accumulate_gradients(const CnnModel& model, const Example& example,
                            std::span<const double> class_weights, CnnGradients& grads) {
  const ForwardCache c = forward_cached(model, example.input);
  if (!c.conv1.all_finite()) throw DivergenceError("non-finite activations in conv1");
  if (!c.conv2.all_finite()) throw DivergenceError("non-finite activations in conv2");
  if (!c.logits.all_finite()) throw DivergenceError("non-finite logits in dense");

  Tensor g_logits({model.arch.classes});
  const double loss = weighted_cross_entropy_grad(c.logits.data(), example.label, class_weights, g_logits.data());

  // dense
  const std::size_t nf = c.pool2.size();
  ConstMatrixMap w_d(model.dense.weight.data().data(), static_cast<long>(model.arch.classes), static_cast<long>(nf));
  Eigen::Map<const Eigen::VectorXd> x(c.pool2.data().data(), static_cast<long>(nf));
  Eigen::Map<const Eigen::VectorXd> gl(g_logits.data().data(), static_cast<long>(model.arch.classes));
  MatrixMap gw_d(grads.tensors[4].data().data(), static_cast<long>(model.arch.classes), static_cast<long>(nf));
  gw_d.noalias() += gl * x.transpose();
  for (std::size_t o = 0; o < model.arch.classes; ++o) grads.tensors[5][o] += g_logits[o];
  Tensor g_pool2(c.pool2.shape());
  Eigen::Map<Eigen::VectorXd>(g_pool2.data().data(), static_cast<long>(nf)).noalias() = w_d.transpose() * gl;

  // pool2 + relu2
  Tensor g_conv2 = max_pool_backward(g_pool2, c.pool2_argmax, c.conv2.shape());
  for (std::size_t i = 0; i < g_conv2.size(); ++i) {
    if (c.conv2[i] <= 0.0) g_conv2[i] = 0.0;
  }
  Tensor g_pool1;
  conv2d_same_backward(c.pool1, model.conv2.weight, g_conv2, grads.tensors[2], grads.tensors[3], &g_pool1);

  // pool1 + relu1
  Tensor g_conv1 = max_pool_backward(g_pool1, c.pool1_argmax, c.conv1.shape());
  for (std::size_t i = 0; i < g_conv1.size(); ++i) {
    if (c.conv1[i] <= 0.0) g_conv1[i] = 0.0;
  }
  conv2d_same_backward(c.input, model.conv1.weight, g_conv1, grads.tensors[0], grads.tensors[1], nullptr);
  return loss;
}

MomentumSgd::MomentumSgd(const CnnModel& model) : velocity_(CnnGradients::zeros_like(model)) {}

void MomentumSgd::apply(CnnModel& model, const CnnGradients& grads, double learning_rate, double momentum) {
  auto params = parameters(model);
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::span<double> w = params[p].tensor->data();
    std::span<double> v = velocity_.tensors[p].data();
    std::span<const double> g = grads.tensors[p].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] - learning_rate * g[i];
      w[i] += v[i];
    }
  }
}

double train_step(CnnModel& model, MomentumSgd& optimizer, std::span<const Example> batch,
                  const TrainConfig& config) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  CnnGradients grads = CnnGradients::zeros_like(model);
  double loss_sum = 0.0;
  for (const Example& ex : batch) loss_sum += accumulate_gradients(model, ex, config.class_weights, grads);
  const double mean_loss = loss_sum / static_cast<double>(batch.size());
  if (!std::isfinite(mean_loss)) throw DivergenceError("non-finite loss at dense output");
  grads.scale(1.0 / static_cast<double>(batch.size()));
  for (std::size_t p = 0; p < CnnGradients::kCount; ++p) {
    if (!grads.tensors[p].all_finite()) {
      throw DivergenceError(std::string("non-finite gradient in ") + kParameterNames[p]);
    }
  }
  optimizer.apply(model, grads, config.learning_rate, config.momentum);
  return mean_loss;
}

Stage1Result fit_stage1(CnnModel model, std::span<const Example> dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.empty()) throw ValidationError("fit_stage1: empty dataset");
  for (const Example& ex : dataset) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= model.arch.classes) {
      throw ValidationError("fit_stage1: label out of range");
    }
  }
  MomentumSgd optimizer(model);
  Stage1Result result;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(dataset.size());
  std::vector<Example> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, {epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      weighted += train_step(model, optimizer, batch, config) * static_cast<double>(end - start);
    }
    const double epoch_loss = weighted / static_cast<double>(dataset.size());
    result.epoch_losses.push_back(epoch_loss);
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      result.best = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

std::vector<int> predict(const CnnModel& model, std::span<const Example> dataset) {
  std::vector<int> out;
  out.reserve(dataset.size());
  for (const Example& ex : dataset) {
    const Tensor logits = forward_cnn(model, ex.input);
    const auto it = std::max_element(logits.data().begin(), logits.data().end());
    out.push_back(static_cast<int>(it - logits.data().begin()));
  }
  return out;
}

}  // namespace spikeadapt
