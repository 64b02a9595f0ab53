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

#include "spikeadapt/tensor.hpp"

namespace spikeadapt {

/// Binary activation map stored as the sorted flat indices of units that fired.
struct SpikePattern {
  Shape dims;
  std::vector<std::uint32_t> active;

  std::size_t volume() const { return shape_volume(dims); }
  std::size_t count() const { return active.size(); }
  double density() const;
  bool is_active(std::size_t index) const;

  /// 0/1 per unit, row-major over `dims`.
  std::vector<std::uint8_t> to_dense() const;
  static SpikePattern from_dense(Shape dims, std::span<const std::uint8_t> values);

  /// Throws ValidationError unless indices are strictly increasing and in range.
  void validate() const;

  friend bool operator==(const SpikePattern&, const SpikePattern&) = default;
};

}  // namespace spikeadapt
