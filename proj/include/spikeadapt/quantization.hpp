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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spikeadapt/cnn.hpp"
#include "spikeadapt/matrix.hpp"
#include "spikeadapt/spikes.hpp"
#include "spikeadapt/stats.hpp"

namespace spikeadapt {

/// Symmetric per-tensor 8-bit weights: real value ~= values[i] * scale.
struct QuantizedTensor {
  Shape shape;
  std::vector<std::int8_t> values;
  double scale = 1.0;

  std::size_t size() const { return values.size(); }
  Tensor dequantize() const;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

/// scale = max|t| / 127 (1 for an all-zero tensor); values rounded half away
/// from zero. Only bits == 8 is supported.
QuantizedTensor quantize_weights(const Tensor& t, int bits = 8);

/// Quantized biases live in accumulator units and are clamped to +-kBiasLimit
/// so that every integer pre-activation fits a 32-bit accumulator.
inline constexpr std::int32_t kBiasLimit = 1 << 24;
std::int32_t quantize_bias(double bias, double unit);

/// Firing thresholds in integer pre-activation units. A unit spikes when its
/// pre-activation is strictly greater than the threshold.
struct ThresholdSet {
  std::int32_t conv1 = 0;
  std::int32_t conv2 = 0;

  friend bool operator==(const ThresholdSet&, const ThresholdSet&) = default;
};

struct QuantizedConv {
  QuantizedTensor weight;  // [out, in, k, k]
  std::vector<std::int32_t> bias;

  std::size_t out_channels() const { return weight.shape.at(0); }
  std::size_t in_channels() const { return weight.shape.at(1); }
  std::size_t kernel() const { return weight.shape.at(2); }

  friend bool operator==(const QuantizedConv&, const QuantizedConv&) = default;
};

struct QuantizedDense {
  QuantizedTensor weight;  // [out, in]
  std::vector<std::int32_t> bias;

  friend bool operator==(const QuantizedDense&, const QuantizedDense&) = default;
};

/// Integer mirror of CnnModel: int8 weights, binary activations.
///
/// Accumulator units: conv1 = conv1.scale * input_scale, conv2 =
/// conv2.scale * spike_value1, dense = dense.scale * spike_value2, where
/// spike_value is the real activation a spike stands for in the next layer.
struct QuantizedCnn {
  std::size_t input_rows = 0;
  std::size_t input_cols = 0;
  CnnArchitecture arch;
  QuantizedConv conv1;
  QuantizedConv conv2;
  QuantizedDense dense;
  ThresholdSet thresholds;
  double input_scale = 1.0 / 127.0;
  double spike_value1 = 1.0;
  double spike_value2 = 1.0;

  Shape conv1_shape() const;
  Shape pool1_shape() const;
  Shape conv2_shape() const;
  Shape pool2_shape() const;
  std::size_t feature_count() const { return shape_volume(pool2_shape()); }

  double conv1_unit() const { return conv1.weight.scale * input_scale; }
  double conv2_unit() const { return conv2.weight.scale * spike_value1; }
  double dense_unit() const { return dense.weight.scale * spike_value2; }

  friend bool operator==(const QuantizedCnn&, const QuantizedCnn&) = default;
};

/// Spike at i iff preact[i] > threshold.
SpikePattern binarize(std::span<const std::int32_t> preact, Shape dims, std::int32_t threshold);

/// Per-layer threshold = p-th percentile (nearest rank) of the strictly
/// positive integer pre-activations seen on `calibration`; 0 if none are
/// positive. Layer 2 statistics use layer-1 spikes under the new threshold.
ThresholdSet calibrate_thresholds(const QuantizedCnn& model, std::span<const Int8Matrix> calibration,
                                  double percentile = 50.0);

/// Converts a trained float model: quantizes weights, rescales biases into
/// accumulator units and calibrates thresholds and spike values.
QuantizedCnn quantize_cnn(const CnnModel& model, std::span<const Int8Matrix> calibration,
                          double percentile = 50.0);

/// Maps a segment to [-127, 127]: round(127 * v / max|segment|).
Int8Matrix quantize_data(const FloatMatrix& segment);

/// Real-valued [1, rows, cols] network input of a quantized segment.
Tensor input_tensor(const Int8Matrix& m, double input_scale = 1.0 / 127.0);

/// Integer inference with the dense two-logit readout.
std::vector<std::int32_t> quantized_logits(const QuantizedCnn& model, const Int8Matrix& input);
std::vector<int> quantized_predict(const QuantizedCnn& model, std::span<const Int8Matrix> inputs);

struct QatConfig {
  std::size_t max_epochs = 150;
  /// Training stops once accuracy, TPR and TNR all exceed this.
  double target = 0.90;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::vector<double> class_weights{1.0, 1.0};

  void validate() const;
};

struct QatResult {
  QuantizedCnn model;
  std::size_t epochs_trained = 0;
  bool reached_target = false;
  /// Integer-model metrics on the training data, before epoch 1 and after
  /// every trained epoch.
  std::vector<MetricsReport> history;
};

/// Quantization-aware retraining with float shadow weights and
/// straight-through gradients for weight rounding and spike generation.
QatResult qat_retrain(const QuantizedCnn& model, std::span<const Int8Matrix> inputs,
                      std::span<const int> labels, const QatConfig& config);

/// True when accuracy, TPR and TNR are all defined and strictly above `target`.
bool meets_target(const MetricsReport& m, double target);

}  // namespace spikeadapt
