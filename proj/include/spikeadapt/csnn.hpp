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
#include <optional>
#include <span>
#include <vector>

#include "spikeadapt/edge_layer.hpp"
#include "spikeadapt/matrix.hpp"
#include "spikeadapt/quantization.hpp"
#include "spikeadapt/spikes.hpp"
#include "spikeadapt/stats.hpp"

namespace spikeadapt {

/// Quantized feature extractor with an optional binary edge-learning readout.
/// Forward: int conv -> fire -> OR-pool -> int conv -> fire -> OR-pool ->
/// flatten -> edge potentials.
class CsnnModel {
 public:
  CsnnModel() = default;

  const QuantizedCnn& network() const { return network_; }
  const std::optional<EdgeLayer>& edge() const { return edge_; }
  bool has_edge() const { return edge_.has_value(); }

  Shape feature_dims() const { return network_.pool2_shape(); }
  std::size_t feature_count() const { return network_.feature_count(); }

  /// Neurons connected to input `i`, as a bitset of edge().num_neurons() bits.
  std::span<const std::uint64_t> fan_out(std::size_t i) const {
    return {fan_out_.data() + i * fan_out_words_, fan_out_words_};
  }

  friend CsnnModel convert_to_csnn(QuantizedCnn network, std::optional<EdgeLayer> edge);
  friend void attach_edge(CsnnModel& model, EdgeLayer edge);

 private:
  void index_edge();

  QuantizedCnn network_;
  std::optional<EdgeLayer> edge_;
  std::vector<std::uint64_t> fan_out_;  // [input_dim, fan_out_words_]
  std::size_t fan_out_words_ = 0;
};

/// Throws ShapeError when the edge layer's input size differs from the
/// flattened feature size.
CsnnModel convert_to_csnn(QuantizedCnn network, std::optional<EdgeLayer> edge = std::nullopt);
void attach_edge(CsnnModel& model, EdgeLayer edge);

struct SpikeTrace {
  SpikePattern conv1;
  SpikePattern pool1;
  SpikePattern conv2;
  SpikePattern pool2;  // the flattened features fed to the edge layer

  friend bool operator==(const SpikeTrace&, const SpikeTrace&) = default;
};

struct LayerOps {
  OpCount conv1;
  OpCount conv2;
  OpCount readout;

  OpCount total() const { return conv1 + conv2 + readout; }
};

struct InferenceResult {
  std::vector<std::int32_t> potentials;  // empty without an edge layer
  std::optional<int> label;
  SpikeTrace trace;
  LayerOps ops;
};

/// Reference path: every layer evaluated densely; every multiply-accumulate
/// (zero-padding taps included) counted in dense_macs.
InferenceResult infer_dense(const CsnnModel& model, const Int8Matrix& input);

/// Event path: conv1 runs densely on the integer input (counted as dense_macs),
/// after which conv2 and the readout only accumulate weights of active spikes. conv2 scatters each
/// spike into a halo-padded accumulator, so it performs exactly
/// filters * k * k accumulations per input spike. Results equal infer_dense.
InferenceResult infer_event(const CsnnModel& model, const Int8Matrix& input);

/// Flattened pool2 spikes, computed on the event path.
SpikePattern extract_features(const CsnnModel& model, const Int8Matrix& input);

}  // namespace spikeadapt
