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

#include "spikeadapt/edge_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spikeadapt/error.hpp"
#include "spikeadapt/random.hpp"

namespace spikeadapt {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5F0F;

void check_dataset(const SpikeDataset& d, const char* what) {
  if (d.patterns.size() != d.labels.size()) {
    throw ValidationError(std::string(what) + ": " + std::to_string(d.patterns.size()) + " patterns but " +
                          std::to_string(d.labels.size()) + " labels");
  }
}

}  // namespace

std::size_t estimate_num_weights(std::span<const SpikePattern> features, double factor) {
  if (features.empty()) throw ValidationError("estimate_num_weights: empty dataset");
  if (!(factor > 0.0)) throw ValidationError("estimate_num_weights: factor must be positive");
  double total = 0.0;
  for (const auto& f : features) total += static_cast<double>(f.count());
  const double mean = total / static_cast<double>(features.size());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(factor * mean)));
}

std::size_t estimate_num_weights(const CsnnModel& model, std::span<const Int8Matrix> dataset, double factor) {
  if (dataset.empty()) throw ValidationError("estimate_num_weights: empty dataset");
  std::vector<SpikePattern> features;
  features.reserve(dataset.size());
  for (const auto& x : dataset) features.push_back(extract_features(model, x));
  return estimate_num_weights(features, factor);
}

std::vector<int> classify_all(const EdgeLayer& layer, std::span<const SpikePattern> patterns) {
  std::vector<int> out;
  out.reserve(patterns.size());
  for (const auto& p : patterns) out.push_back(classify(layer, p).label);
  return out;
}

std::vector<MetricsReport> edge_train(EdgeLayer& layer, const SpikeDataset& train, const SpikeDataset& eval,
                                      std::size_t epochs, const EpochCallback& on_epoch) {
  check_dataset(train, "edge_train training set");
  check_dataset(eval, "edge_train evaluation set");
  if (epochs == 0) return {};
  if (train.patterns.empty()) throw ValidationError("edge_train: empty training set");
  if (eval.patterns.empty()) throw ValidationError("edge_train: empty evaluation set");

  std::vector<MetricsReport> history;
  std::vector<std::size_t> order(train.patterns.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(layer.config().seed, {kShuffleStream, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) edge_learn_step(layer, train.patterns[i], train.labels[i]);
    const auto predictions = classify_all(layer, eval.patterns);
    history.push_back(compute_metrics(predictions, eval.labels));
    if (on_epoch) on_epoch(epoch + 1, predictions);
  }
  return history;
}

}  // namespace spikeadapt
