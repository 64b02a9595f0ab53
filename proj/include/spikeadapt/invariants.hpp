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
#include <string>
#include <vector>

#include "spikeadapt/csnn.hpp"
#include "spikeadapt/eeg.hpp"
#include "spikeadapt/random.hpp"

namespace spikeadapt {

/// Random integer network with small random shapes (odd kernels, pool 1-3)
/// and thresholds spread so that spike densities vary widely.
QuantizedCnn random_quantized_cnn(Rng& rng);
/// Same, attached to a random edge layer.
CsnnModel random_csnn(Rng& rng);
Int8Matrix random_input(Rng& rng, std::size_t rows, std::size_t cols, double zero_fraction = 0.2);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// infer_event == infer_dense (potentials, traces, labels) on random pairs.
CheckResult verify_event_equivalence(std::size_t pairs, std::uint64_t seed);
/// conv2 event accumulates * input volume == input spikes * dense MACs, and
/// event <= dense per layer, on random pairs.
CheckResult verify_op_count_identity(std::size_t pairs, std::uint64_t seed);
/// Popcount conservation, plasticity trajectory, winner-only mutation and
/// new-connections-within-pattern over randomized learning steps.
CheckResult verify_edge_invariants(std::size_t steps, std::uint64_t seed);
/// Segmentation, widths, duplication, augmentation and split coverage over
/// every participant and kind of a generated corpus.
CheckResult verify_pipeline_invariants(const GeneratorConfig& config, std::uint64_t seed);
/// Max-magnitude weights and inputs at full density stay exactly representable.
CheckResult verify_accumulator_range();

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::size_t equivalence_pairs = 1000;
  std::size_t edge_steps = 10000;
  std::size_t trials_per_kind = 6;
};

std::vector<CheckResult> run_verify(const VerifyOptions& options);

}  // namespace spikeadapt
