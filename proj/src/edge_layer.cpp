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

#include "spikeadapt/edge_layer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <utility>

#include "spikeadapt/error.hpp"
#include "spikeadapt/random.hpp"

namespace spikeadapt {

namespace {

constexpr std::uint64_t kInitStream = 0x1A17;
constexpr std::uint64_t kStepStream = 0x57E9;

std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

bool test_bit(std::span<const std::uint64_t> words, std::size_t i) { return (words[i / 64] >> (i % 64)) & 1u; }
void set_bit(std::span<std::uint64_t> words, std::size_t i) { words[i / 64] |= std::uint64_t{1} << (i % 64); }
void clear_bit(std::span<std::uint64_t> words, std::size_t i) { words[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }

std::int32_t overlap(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::int32_t total = 0;
  for (std::size_t w = 0; w < a.size(); ++w) total += std::popcount(a[w] & b[w]);
  return total;
}

// Indices i < limit whose bit is set in (a & b).
template <class Combine>
std::vector<std::uint32_t> collect(std::size_t words, std::size_t limit, Combine combine) {
  std::vector<std::uint32_t> out;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t bits = combine(w);
    while (bits) {
      const int b = std::countr_zero(bits);
      const std::size_t i = w * 64 + static_cast<std::size_t>(b);
      if (i < limit) out.push_back(static_cast<std::uint32_t>(i));
      bits &= bits - 1;
    }
  }
  return out;
}

// Moves a uniform m-subset of `pool` to its front (partial Fisher-Yates).
void sample_front(std::vector<std::uint32_t>& pool, std::size_t m, Rng& rng) {
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
}

std::size_t rounded(double v) { return static_cast<std::size_t>(std::llround(v)); }

}  // namespace

void EdgeLearnConfig::validate() const {
  if (!(min_plasticity >= 0.0 && min_plasticity <= initial_plasticity && initial_plasticity <= 1.0)) {
    throw ValidationError("edge config: need 0 <= min_plasticity <= initial_plasticity <= 1");
  }
  if (!(plasticity_decay >= 0.0) || !std::isfinite(plasticity_decay)) {
    throw ValidationError("edge config: plasticity_decay must be >= 0");
  }
  if (!(learning_competition >= 0.0 && learning_competition <= 1.0)) {
    throw ValidationError("edge config: learning_competition must lie in [0, 1]");
  }
  if (neurons_per_class == 0 || num_classes == 0) {
    throw ValidationError("edge config: need at least one class and one neuron per class");
  }
}

struct EdgeLayerMutator {
  static std::span<std::uint64_t> row(EdgeLayer& layer, std::size_t n) {
    return {layer.bits_.data() + n * layer.words_per_row_, layer.words_per_row_};
  }
  static double& plasticity(EdgeLayer& layer, std::size_t n) { return layer.plasticity_[n]; }
  static std::uint64_t next_step(EdgeLayer& layer) { return layer.steps_++; }
  static EdgeLayer blank(const EdgeLearnConfig& config, std::size_t input_dim, std::size_t num_weights) {
    EdgeLayer layer;
    layer.config_ = config;
    layer.input_dim_ = input_dim;
    layer.num_weights_ = num_weights;
    layer.words_per_row_ = words_for(input_dim);
    const std::size_t n = config.neurons_per_class * config.num_classes;
    layer.bits_.assign(n * layer.words_per_row_, 0);
    layer.plasticity_.assign(n, config.initial_plasticity);
    return layer;
  }
  static void fill(EdgeLayer& layer, std::vector<std::uint64_t> bits, std::vector<double> plasticity,
                   std::uint64_t steps) {
    layer.bits_ = std::move(bits);
    layer.plasticity_ = std::move(plasticity);
    layer.steps_ = steps;
  }
};

bool EdgeLayer::connected(std::size_t neuron, std::size_t input) const {
  if (neuron >= num_neurons() || input >= input_dim_) throw ValidationError("edge layer index out of range");
  return test_bit(row(neuron), input);
}

std::vector<std::uint32_t> EdgeLayer::connections(std::size_t neuron) const {
  auto r = row(neuron);
  return collect(words_per_row_, input_dim_, [&](std::size_t w) { return r[w]; });
}

std::size_t EdgeLayer::row_popcount(std::size_t neuron) const {
  std::size_t total = 0;
  for (auto w : row(neuron)) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

EdgeLayer EdgeLayer::from_parts(const EdgeLearnConfig& config, std::size_t input_dim, std::size_t num_weights,
                                std::vector<std::uint64_t> bits, std::vector<double> plasticity,
                                std::uint64_t steps) {
  config.validate();
  if (num_weights > input_dim) throw ValidationError("edge layer: num_weights exceeds input_dim");
  EdgeLayer layer = EdgeLayerMutator::blank(config, input_dim, num_weights);
  if (bits.size() != layer.bits_.size() || plasticity.size() != layer.plasticity_.size()) {
    throw ShapeError("edge layer: stored sizes do not match " + std::to_string(layer.num_neurons()) + " x " +
                     std::to_string(input_dim));
  }
  EdgeLayerMutator::fill(layer, std::move(bits), std::move(plasticity), steps);
  const std::size_t tail = input_dim % 64;
  for (std::size_t n = 0; n < layer.num_neurons(); ++n) {
    if (layer.row_popcount(n) != num_weights) {
      throw ValidationError("edge layer: row " + std::to_string(n) + " does not hold num_weights connections");
    }
    if (tail != 0 && (layer.row(n).back() >> tail) != 0) {
      throw ValidationError("edge layer: row " + std::to_string(n) + " connects past input_dim");
    }
    const double p = layer.plasticity(n);
    if (!(p >= config.min_plasticity && p <= config.initial_plasticity)) {
      throw ValidationError("edge layer: plasticity of neuron " + std::to_string(n) + " out of range");
    }
  }
  return layer;
}

EdgeLayer init_edge_layer(std::size_t input_dim, std::size_t num_weights, const EdgeLearnConfig& config) {
  config.validate();
  if (num_weights > input_dim) {
    throw ValidationError("init_edge_layer: num_weights " + std::to_string(num_weights) + " exceeds input_dim " +
                          std::to_string(input_dim));
  }
  EdgeLayer layer = EdgeLayerMutator::blank(config, input_dim, num_weights);
  Rng rng(derive_seed(config.seed, {kInitStream}));
  for (std::size_t n = 0; n < layer.num_neurons(); ++n) {
    auto r = EdgeLayerMutator::row(layer, n);
    // Floyd's sampling of a uniform num_weights-subset of [0, input_dim).
    for (std::size_t j = input_dim - num_weights; j < input_dim; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      const std::size_t t = pick(rng);
      set_bit(r, test_bit(r, t) ? j : t);
    }
  }
  return layer;
}

std::vector<std::uint64_t> pack_pattern(const SpikePattern& pattern, std::size_t input_dim) {
  if (pattern.volume() != input_dim) {
    throw ShapeError("edge layer expects " + std::to_string(input_dim) + " inputs, got pattern of " +
                     std::to_string(pattern.volume()));
  }
  std::vector<std::uint64_t> words(words_for(input_dim), 0);
  for (auto i : pattern.active) {
    if (i >= input_dim) throw ValidationError("spike index outside edge layer input");
    set_bit(words, i);
  }
  return words;
}

Classification classify(const EdgeLayer& layer, const SpikePattern& pattern) {
  const auto x = pack_pattern(pattern, layer.input_dim());
  Classification out;
  out.potentials.resize(layer.num_neurons());
  std::int32_t best = -1;
  for (std::size_t n = 0; n < layer.num_neurons(); ++n) {
    const std::int32_t p = overlap(layer.row(n), x);
    out.potentials[n] = p;
    if (p > best) {
      best = p;
      out.winner = n;
    }
  }
  out.label = layer.num_neurons() == 0 ? 0 : layer.class_of(out.winner);
  return out;
}

LearnStep edge_learn_step(EdgeLayer& layer, const SpikePattern& pattern, int label) {
  const auto& cfg = layer.config();
  if (label < 0 || static_cast<std::size_t>(label) >= cfg.num_classes) {
    throw ValidationError("edge_learn_step: unknown class label " + std::to_string(label));
  }
  pattern.validate();
  const auto x = pack_pattern(pattern, layer.input_dim());
  const std::size_t words = layer.words_per_row();
  const std::size_t dim = layer.input_dim();

  LearnStep step;
  const std::size_t first = static_cast<std::size_t>(label) * cfg.neurons_per_class;
  std::int32_t best = -1;
  for (std::size_t n = first; n < first + cfg.neurons_per_class; ++n) {
    const std::int32_t p = overlap(layer.row(n), x);
    if (p > best) {
      best = p;
      step.winner = n;
    }
  }

  Rng rng(derive_seed(cfg.seed, {kStepStream, EdgeLayerMutator::next_step(layer)}));
  auto row = EdgeLayerMutator::row(layer, step.winner);

  std::vector<std::uint32_t> miss;
  for (auto i : pattern.active) {
    if (!test_bit(row, i)) miss.push_back(i);
  }
  double& plasticity = EdgeLayerMutator::plasticity(layer, step.winner);
  // A row can only give up the connections it has.
  const std::size_t m =
      std::min({miss.size(), layer.num_weights(), rounded(plasticity * static_cast<double>(miss.size()))});
  if (m > 0) {
    auto outside = collect(words, dim, [&](std::size_t w) { return row[w] & ~x[w]; });
    std::vector<std::uint32_t> drop;
    if (m <= outside.size()) {
      sample_front(outside, m, rng);
      drop.assign(outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(m));
    } else {
      drop = outside;
      auto inside = collect(words, dim, [&](std::size_t w) { return row[w] & x[w]; });
      const std::size_t shortfall = m - outside.size();
      sample_front(inside, shortfall, rng);
      drop.insert(drop.end(), inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(shortfall));
    }
    sample_front(miss, m, rng);
    for (auto i : drop) clear_bit(row, i);
    for (std::size_t k = 0; k < m; ++k) set_bit(row, miss[k]);
  }
  step.moved = m;
  plasticity = std::max(cfg.min_plasticity, plasticity - cfg.plasticity_decay);

  if (cfg.learning_competition > 0.0) {
    std::int32_t rival_best = -1;
    for (std::size_t n = 0; n < layer.num_neurons(); ++n) {
      if (layer.class_of(n) == label) continue;
      const std::int32_t p = overlap(layer.row(n), x);
      if (p > rival_best) {
        rival_best = p;
        step.competitor = n;
      }
    }
    if (rival_best > 0) {
      step.competed = true;
      auto rival = EdgeLayerMutator::row(layer, step.competitor);
      auto shared = collect(words, dim, [&](std::size_t w) { return rival[w] & x[w]; });
      auto idle = collect(words, dim, [&](std::size_t w) { return ~rival[w] & ~x[w]; });
      const std::size_t q = std::min(
          {rounded(cfg.learning_competition * static_cast<double>(shared.size())), shared.size(), idle.size()});
      sample_front(shared, q, rng);
      sample_front(idle, q, rng);
      for (std::size_t k = 0; k < q; ++k) {
        clear_bit(rival, shared[k]);
        set_bit(rival, idle[k]);
      }
      step.competitor_moved = q;
    }
  }
  return step;
}

}  // namespace spikeadapt
