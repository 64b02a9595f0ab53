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
#include <functional>
#include <span>
#include <vector>

#include "spikeadapt/csnn.hpp"

namespace spikeadapt {

/// max(1, round(factor * mean spike count of the flattened features)).
std::size_t estimate_num_weights(const CsnnModel& model, std::span<const Int8Matrix> dataset,
                                 double factor = 1.2);
/// Same rule from precomputed feature patterns.
std::size_t estimate_num_weights(std::span<const SpikePattern> features, double factor = 1.2);

struct SpikeDataset {
  std::vector<SpikePattern> patterns;
  std::vector<int> labels;
};

/// Runs `epochs` passes of edge_learn_step over `train` in a seeded shuffled
/// order and returns the metrics on `eval` after every epoch. `on_epoch`
/// receives the 1-based epoch and that epoch's predictions on `eval`.
using EpochCallback = std::function<void(std::size_t, std::span<const int>)>;
std::vector<MetricsReport> edge_train(EdgeLayer& layer, const SpikeDataset& train, const SpikeDataset& eval,
                                      std::size_t epochs = 25, const EpochCallback& on_epoch = {});

std::vector<int> classify_all(const EdgeLayer& layer, std::span<const SpikePattern> patterns);

}  // namespace spikeadapt
