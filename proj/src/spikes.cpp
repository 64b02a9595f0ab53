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

#include "spikeadapt/spikes.hpp"

#include <algorithm>
#include <string>

#include "spikeadapt/error.hpp"

namespace spikeadapt {

double SpikePattern::density() const {
  const std::size_t v = volume();
  return v == 0 ? 0.0 : static_cast<double>(active.size()) / static_cast<double>(v);
}

bool SpikePattern::is_active(std::size_t index) const {
  return std::binary_search(active.begin(), active.end(), static_cast<std::uint32_t>(index));
}

std::vector<std::uint8_t> SpikePattern::to_dense() const {
  std::vector<std::uint8_t> out(volume(), 0);
  for (auto i : active) out.at(i) = 1;
  return out;
}

SpikePattern SpikePattern::from_dense(Shape dims, std::span<const std::uint8_t> values) {
  if (shape_volume(dims) != values.size()) {
    throw ShapeError("spike map of " + std::to_string(values.size()) + " values does not fit " + shape_string(dims));
  }
  SpikePattern p;
  p.dims = std::move(dims);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) p.active.push_back(static_cast<std::uint32_t>(i));
  }
  return p;
}

void SpikePattern::validate() const {
  const std::size_t v = volume();
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i] >= v) {
      throw ValidationError("spike index " + std::to_string(active[i]) + " outside volume " + std::to_string(v));
    }
    if (i > 0 && active[i] <= active[i - 1]) {
      throw ValidationError("spike indices not strictly increasing at position " + std::to_string(i));
    }
  }
}

}  // namespace spikeadapt
