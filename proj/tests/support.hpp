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


// Shared fixtures and independent oracles for the unit and acceptance suites.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikeadapt/cnn.hpp"
#include "spikeadapt/edge_layer.hpp"
#include "spikeadapt/quantization.hpp"
#include "spikeadapt/random.hpp"
#include "spikeadapt/spikes.hpp"

namespace spikeadapt::testing {

/// Small model with random non-zero biases, for gradient checks.
CnnModel micro_cnn(Rng& rng);
Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0);

/// Nested-loop forward pass: conv -> relu -> pool -> conv -> relu -> pool -> dense.
std::vector<double> naive_forward(const CnnModel& model, const Tensor& input);

/// Integer forward pass written as plain loops over the quantized parameters.
struct IntTrace {
  std::vector<std::int64_t> preact1, preact2;
  std::vector<std::uint8_t> spikes1, pooled1, spikes2, pooled2;
};
IntTrace int_forward_oracle(const QuantizedCnn& q, const Int8Matrix& input);

/// Nearest-rank percentile of the strictly positive values; 0 when none.
std::int64_t percentile_oracle(std::vector<std::int64_t> values, double percentile);

struct GradientCheck {
  std::string parameter;
  std::size_t checked = 0;
  double max_relative_error = 0.0;
};

/// Backprop against central differences (step `h`) for every parameter of one
/// random micro-instance.
std::vector<GradientCheck> check_gradients(std::uint64_t seed, double h = 1e-6);

/// Class with the maximal potential by a plain scan; ties to the lowest neuron.
int brute_force_class(const EdgeLayer& layer, const SpikePattern& pattern, std::vector<std::int32_t>* potentials);

SpikePattern random_pattern(Rng& rng, std::size_t dim, double density);

/// p-value of Welch's test by integrating the Student t density numerically.
double welch_p_quadrature(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace spikeadapt::testing
