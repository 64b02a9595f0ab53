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

#include "spikeadapt/matrix.hpp"
#include "spikeadapt/quantization.hpp"

namespace spikeadapt::detail {

/// out[F,H,W] = bias[f] + same-padded integer convolution of input[C,H,W].
void conv_same_int(std::span<const std::int32_t> input, std::size_t H, std::size_t W, const QuantizedConv& conv,
                   std::span<std::int32_t> out);

/// Logical OR over non-overlapping pool x pool windows of a [C,H,W] 0/1 map.
std::vector<std::uint8_t> pool_or(std::span<const std::uint8_t> in, std::size_t C, std::size_t H, std::size_t W,
                                  std::size_t pool);

std::vector<std::uint8_t> fire(std::span<const std::int32_t> preact, std::int32_t threshold);

std::vector<std::int32_t> widen(const Int8Matrix& input);
std::vector<std::int32_t> widen(std::span<const std::uint8_t> spikes);

/// Integer feature extractor of a QuantizedCnn, all intermediate maps kept.
struct IntForward {
  std::vector<std::int32_t> preact1;
  std::vector<std::uint8_t> pooled1;
  std::vector<std::int32_t> preact2;
  std::vector<std::uint8_t> pooled2;
};

std::vector<std::int32_t> layer1_preact(const QuantizedCnn& model, const Int8Matrix& input);
std::vector<std::int32_t> layer2_preact(const QuantizedCnn& model, std::span<const std::uint8_t> pooled1);
IntForward int_forward(const QuantizedCnn& model, const Int8Matrix& input);

void require_input_shape(const QuantizedCnn& model, const Int8Matrix& input);

}  // namespace spikeadapt::detail
