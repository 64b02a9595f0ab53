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

#include "spikeadapt/spikes.hpp"

namespace spikeadapt {

struct EdgeLearnConfig {
  double initial_plasticity = 1.0;
  double learning_competition = 0.0;
  double min_plasticity = 0.1;
  double plasticity_decay = 0.25;
  std::size_t neurons_per_class = 1000;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EdgeLearnConfig&, const EdgeLearnConfig&) = default;
};

/// Binary-weight output layer. Neuron n belongs to class n / neurons_per_class
/// and is connected to exactly num_weights() inputs. Rows are bit-packed,
/// little-endian within 64-bit words.
class EdgeLayer {
 public:
  EdgeLayer() = default;

  /// Rebuilds a layer from stored parts (archives, bindings); validates invariants.
  static EdgeLayer from_parts(const EdgeLearnConfig& config, std::size_t input_dim, std::size_t num_weights,
                              std::vector<std::uint64_t> bits, std::vector<double> plasticity,
                              std::uint64_t steps);

  std::size_t num_neurons() const { return plasticity_.size(); }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_weights() const { return num_weights_; }
  std::size_t words_per_row() const { return words_per_row_; }
  const EdgeLearnConfig& config() const { return config_; }
  /// Learning steps applied so far; each step draws from its own seeded stream.
  std::uint64_t steps() const { return steps_; }

  int class_of(std::size_t neuron) const { return static_cast<int>(neuron / config_.neurons_per_class); }
  std::span<const std::uint64_t> row(std::size_t neuron) const {
    return {bits_.data() + neuron * words_per_row_, words_per_row_};
  }
  std::span<const std::uint64_t> bits() const { return bits_; }
  bool connected(std::size_t neuron, std::size_t input) const;
  std::vector<std::uint32_t> connections(std::size_t neuron) const;
  std::size_t row_popcount(std::size_t neuron) const;

  double plasticity(std::size_t neuron) const { return plasticity_[neuron]; }
  std::span<const double> plasticities() const { return plasticity_; }

  friend bool operator==(const EdgeLayer&, const EdgeLayer&) = default;

 private:
  friend EdgeLayer init_edge_layer(std::size_t, std::size_t, const EdgeLearnConfig&);
  friend struct EdgeLayerMutator;

  EdgeLearnConfig config_;
  std::size_t input_dim_ = 0;
  std::size_t num_weights_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<double> plasticity_;
  std::uint64_t steps_ = 0;
};

/// Each row gets num_weights distinct seeded-uniform connections; all
/// neurons start at initial_plasticity.
EdgeLayer init_edge_layer(std::size_t input_dim, std::size_t num_weights, const EdgeLearnConfig& config);

/// Input spikes packed into words_per_row() 64-bit words.
std::vector<std::uint64_t> pack_pattern(const SpikePattern& pattern, std::size_t input_dim);

struct Classification {
  int label = 0;
  std::size_t winner = 0;
  /// Per neuron: number of connected inputs that spiked.
  std::vector<std::int32_t> potentials;
};

/// Class of the neuron with maximal potential; ties go to the lowest index.
Classification classify(const EdgeLayer& layer, const SpikePattern& pattern);

struct LearnStep {
  std::size_t winner = 0;
  std::size_t moved = 0;  // connections relocated onto the pattern
  bool competed = false;
  std::size_t competitor = 0;
  std::size_t competitor_moved = 0;
};

/// One winner-take-all plasticity update towards `pattern` for class `label`.
///
/// The winner is the class-`label` neuron with maximal potential (lowest index
/// on ties). With miss = active inputs the winner is not connected to, it
/// relocates m = min(num_weights, round(plasticity * |miss|)) connections: first from inputs
/// outside the pattern, then (if those run out) from pattern inputs, onto m
/// seeded-uniform inputs of miss. Its plasticity then drops by
/// plasticity_decay, floored at min_plasticity. With learning_competition > 0
/// the best wrong-class neuron also releases round(competition * overlap) of
/// its pattern connections to random inactive inputs. Row popcounts never change.
LearnStep edge_learn_step(EdgeLayer& layer, const SpikePattern& pattern, int label);

}  // namespace spikeadapt
