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

#include "spikeadapt/invariants.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <sstream>

#include "int_kernels.hpp"
#include "spikeadapt/edge_layer.hpp"
#include "spikeadapt/error.hpp"
#include "spikeadapt/quantization.hpp"

namespace spikeadapt {

namespace {

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::int32_t uniform_i(Rng& rng, std::int32_t lo, std::int32_t hi) {
  return std::uniform_int_distribution<std::int32_t>(lo, hi)(rng);
}

double uniform_r(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

QuantizedTensor random_weights(Rng& rng, Shape shape, double zero_fraction) {
  QuantizedTensor t;
  t.shape = std::move(shape);
  t.values.resize(shape_volume(t.shape));
  std::bernoulli_distribution zero(zero_fraction);
  for (auto& v : t.values) v = zero(rng) ? 0 : static_cast<std::int8_t>(uniform_i(rng, -127, 127));
  return t;
}

std::vector<std::int32_t> random_bias(Rng& rng, std::size_t n, std::int32_t limit) {
  std::vector<std::int32_t> b(n);
  for (auto& v : b) v = uniform_i(rng, -limit, limit);
  return b;
}

std::size_t odd_kernel(Rng& rng) { return 2 * uniform(rng, 0, 2) + 1; }

template <class Fn>
CheckResult timed(std::string name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  r.name = std::move(name);
  try {
    fn(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

QuantizedCnn random_quantized_cnn(Rng& rng) {
  QuantizedCnn q;
  q.arch.pool = uniform(rng, 1, 3);
  const std::size_t min_side = q.arch.pool * q.arch.pool;
  q.input_rows = uniform(rng, min_side, min_side + 6);
  q.input_cols = uniform(rng, min_side, min_side + 20);
  q.arch.conv1_filters = uniform(rng, 1, 6);
  q.arch.conv1_kernel = odd_kernel(rng);
  q.arch.conv2_filters = uniform(rng, 1, 8);
  q.arch.conv2_kernel = odd_kernel(rng);
  const std::size_t k1 = q.arch.conv1_kernel, k2 = q.arch.conv2_kernel;
  q.conv1.weight = random_weights(rng, {q.arch.conv1_filters, 1, k1, k1}, 0.3);
  q.conv1.bias = random_bias(rng, q.arch.conv1_filters, 3000);
  q.conv2.weight = random_weights(rng, {q.arch.conv2_filters, q.arch.conv1_filters, k2, k2}, 0.3);
  q.conv2.bias = random_bias(rng, q.arch.conv2_filters, 200);
  q.thresholds.conv1 = uniform_i(rng, -2000, 20000);
  q.thresholds.conv2 = uniform_i(rng, -200, 800);
  q.dense.weight = random_weights(rng, {q.arch.classes, q.feature_count()}, 0.0);
  q.dense.bias = random_bias(rng, q.arch.classes, 100);
  return q;
}

CsnnModel random_csnn(Rng& rng) {
  QuantizedCnn q = random_quantized_cnn(rng);
  const std::size_t dim = q.feature_count();
  EdgeLearnConfig cfg;
  cfg.neurons_per_class = uniform(rng, 1, 10);
  cfg.seed = rng();
  return convert_to_csnn(std::move(q), init_edge_layer(dim, uniform(rng, 0, dim), cfg));
}

Int8Matrix random_input(Rng& rng, std::size_t rows, std::size_t cols, double zero_fraction) {
  Int8Matrix m(rows, cols);
  std::bernoulli_distribution zero(zero_fraction);
  for (auto& v : m.data) v = zero(rng) ? 0 : static_cast<std::int8_t>(uniform_i(rng, -127, 127));
  return m;
}

CheckResult verify_event_equivalence(std::size_t pairs, std::uint64_t seed) {
  return timed("event-dense equivalence", [&](CheckResult& r) {
    Rng rng(seed);
    std::size_t mismatches = 0, spikes = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
      const CsnnModel m = random_csnn(rng);
      const Int8Matrix x = random_input(rng, m.network().input_rows, m.network().input_cols);
      const InferenceResult d = infer_dense(m, x), e = infer_event(m, x);
      if (d.potentials != e.potentials || !(d.trace == e.trace) || d.label != e.label) ++mismatches;
      spikes += e.trace.pool2.count();
    }
    r.passed = mismatches == 0;
    r.detail = std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches, " +
               std::to_string(spikes) + " feature spikes in total";
  });
}

CheckResult verify_op_count_identity(std::size_t pairs, std::uint64_t seed) {
  return timed("op-count identity", [&](CheckResult& r) {
    Rng rng(seed);
    std::size_t violations = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
      const CsnnModel m = random_csnn(rng);
      const Int8Matrix x = random_input(rng, m.network().input_rows, m.network().input_cols);
      const InferenceResult d = infer_dense(m, x), e = infer_event(m, x);
      const auto lhs = static_cast<unsigned __int128>(e.ops.conv2.event_accumulates) * e.trace.pool1.volume();
      const auto rhs = static_cast<unsigned __int128>(e.trace.pool1.count()) * d.ops.conv2.dense_macs;
      const bool bounded = e.ops.conv2.event_accumulates <= d.ops.conv2.dense_macs &&
                           e.ops.readout.event_accumulates <= d.ops.readout.dense_macs &&
                           e.ops.conv1 == d.ops.conv1;
      if (lhs != rhs || !bounded) ++violations;
    }
    r.passed = violations == 0;
    r.detail = std::to_string(pairs) + " pairs, " + std::to_string(violations) + " violations";
  });
}

CheckResult verify_edge_invariants(std::size_t steps, std::uint64_t seed) {
  return timed("edge-layer invariants", [&](CheckResult& r) {
    Rng rng(seed);
    std::size_t done = 0, layers = 0;
    std::size_t popcount_bad = 0, plasticity_bad = 0, foreign_rows = 0, outside_pattern = 0, winner_bad = 0;
    while (done < steps) {
      EdgeLearnConfig cfg;
      cfg.initial_plasticity = std::bernoulli_distribution(0.5)(rng) ? 1.0 : uniform_r(rng, 0.2, 1.0);
      cfg.min_plasticity = std::bernoulli_distribution(0.5)(rng) ? 0.1 : uniform_r(rng, 0.0, cfg.initial_plasticity);
      cfg.min_plasticity = std::min(cfg.min_plasticity, cfg.initial_plasticity);
      cfg.plasticity_decay = uniform_r(rng, 0.0, 0.5);
      cfg.learning_competition = std::bernoulli_distribution(0.5)(rng) ? 0.0 : uniform_r(rng, 0.0, 1.0);
      cfg.neurons_per_class = uniform(rng, 1, 12);
      cfg.seed = rng();
      const std::size_t dim = uniform(rng, 8, 256);
      EdgeLayer layer = init_edge_layer(dim, uniform(rng, 1, dim), cfg);
      ++layers;
      const double density = uniform_r(rng, 0.0, 0.5);
      for (std::size_t s = 0; s < 200 && done < steps; ++s, ++done) {
        std::vector<std::uint8_t> dense(dim);
        std::bernoulli_distribution on(density);
        for (auto& v : dense) v = on(rng) ? 1 : 0;
        const SpikePattern pattern = SpikePattern::from_dense({dim}, dense);
        const int label = static_cast<int>(uniform(rng, 0, 1));
        const EdgeLayer before = layer;
        const LearnStep step = edge_learn_step(layer, pattern, label);

        // Brute-force winner: first maximal overlap inside the label's block.
        std::size_t best = 0;
        long best_pot = -1;
        for (std::size_t n = 0; n < before.num_neurons(); ++n) {
          if (before.class_of(n) != label) continue;
          long pot = 0;
          for (auto i : pattern.active) pot += before.connected(n, i) ? 1 : 0;
          if (pot > best_pot) {
            best_pot = pot;
            best = n;
          }
        }
        if (step.winner != best) ++winner_bad;

        for (std::size_t n = 0; n < layer.num_neurons(); ++n) {
          if (layer.row_popcount(n) != layer.num_weights()) ++popcount_bad;
          const double p0 = before.plasticity(n), p1 = layer.plasticity(n);
          if (p1 > p0 || p1 < cfg.min_plasticity) ++plasticity_bad;
          if (n == step.winner && p1 != std::max(cfg.min_plasticity, p0 - cfg.plasticity_decay)) ++plasticity_bad;
          const bool rival = step.competed && n == step.competitor;
          const bool same = std::equal(before.row(n).begin(), before.row(n).end(), layer.row(n).begin());
          if (n != step.winner && !rival && !same) ++foreign_rows;
          if (n == step.winner) {
            for (auto i : layer.connections(n)) {
              if (!before.connected(n, i) && !pattern.is_active(i)) ++outside_pattern;
            }
          }
        }
        if (cfg.learning_competition == 0.0 && step.competed) ++foreign_rows;
      }
    }
    const std::size_t total = popcount_bad + plasticity_bad + foreign_rows + outside_pattern + winner_bad;
    r.passed = total == 0;
    std::ostringstream os;
    os << done << " steps over " << layers << " layers; violations: popcount " << popcount_bad << ", plasticity "
       << plasticity_bad << ", non-winner mutation " << foreign_rows << ", connection outside pattern "
       << outside_pattern << ", winner choice " << winner_bad;
    r.detail = os.str();
  });
}

CheckResult verify_pipeline_invariants(const GeneratorConfig& config, std::uint64_t seed) {
  return timed("pipeline invariants", [&](CheckResult& r) {
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
      if (!ok && failures.size() < 20) failures.push_back(what);
    };
    std::size_t trials_seen = 0, segments_seen = 0;
    std::vector<int> ids(config.participants);
    for (std::size_t p = 0; p < ids.size(); ++p) ids[p] = static_cast<int>(p);

    for (auto kind : {ExperimentKind::CountdownNominal, ExperimentKind::CountdownStressed, ExperimentKind::Stoplight}) {
      const bool stoplight = kind == ExperimentKind::Stoplight;
      for (int id : ids) {
        const auto trials = generate_participant(config, id, kind);
        for (const auto& t : trials) {
          ++trials_seen;
          const auto segs = segment_trial(t);
          std::vector<int> labels;
          for (const auto& s : segs) labels.push_back(s.label);
          const std::vector<int> want = stoplight ? std::vector<int>{0, 1} : std::vector<int>{0, 0, 0, 0, 1};
          std::vector<int> sorted = labels;
          std::sort(sorted.begin(), sorted.end());
          expect(sorted == want, "label multiset of trial " + std::to_string(t.trial));
          if (!stoplight) expect(labels.back() == 1, "countdown positive is not the last window");
          for (std::size_t k = 0; k < segs.size(); ++k) {
            const auto& s = segs[k];
            ++segments_seen;
            expect(s.data.rows == 19, "segment rows");
            expect(s.data.cols == segment_width(kind), "segment width");
            if (!stoplight) {
              expect(s.data.size() == 18924, "flattened countdown segment size");
              const std::size_t begin = t.markers[k].sample, len = t.markers[k + 1].sample - begin;
              FloatMatrix raw(t.signals.rows, len);
              for (std::size_t row = 0; row < raw.rows; ++row) {
                for (std::size_t c = 0; c < len; ++c) raw(row, c) = t.signals(row, begin + c);
              }
              const Int8Matrix q = quantize_data(raw);
              bool prefix = true, zeros = true;
              for (std::size_t row = 0; row < s.data.rows; ++row) {
                for (std::size_t c = 0; c < s.data.cols; ++c) {
                  if (c < len) prefix = prefix && s.data(row, c) == q(row, c);
                  else zeros = zeros && s.data(row, c) == 0;
                }
              }
              expect(prefix && zeros, "padding of trial " + std::to_string(t.trial));
            }
          }
        }
        const SegmentationReport rep = build_dataset(trials);
        expect(rep.rejections.empty(), "generated trial rejected");
        const LabeledDataset& ds = rep.dataset;
        const LabeledDataset dup = duplicate_positives(ds, 3);
        expect(dup.count_label(1) == 4 * ds.count_label(1), "positive duplication factor");
        expect(dup.count_label(0) == ds.count_label(0), "negatives changed by duplication");
        expect(std::equal(ds.segments.begin(), ds.segments.end(), dup.segments.begin()), "originals not kept first");
        const LabeledDataset aug = augment_noise(ds, 4, derive_seed(seed, {static_cast<std::uint64_t>(id)}));
        expect(aug.size() == 5 * ds.size(), "augmentation factor");
        expect(aug.count_label(1) == 5 * ds.count_label(1), "augmentation labels");
        const LabeledDataset fcas = select_channels(ds, ChannelSet::fcas());
        expect(fcas.channels.size() == 5 && fcas.segments.front().data.rows == 5, "five-channel restriction");
      }
    }

    const auto splits = split_participants(ids, seed, 10);
    std::vector<int> covered;
    expect(splits.size() == 10, "split count");
    for (const auto& s : splits) {
      expect(s.group.size() == 8 && s.individual.size() == 3, "split sizes");
      std::vector<int> all = s.group;
      all.insert(all.end(), s.individual.begin(), s.individual.end());
      std::sort(all.begin(), all.end());
      expect(all == ids, "split is not a disjoint partition");
      covered.insert(covered.end(), s.individual.begin(), s.individual.end());
    }
    std::sort(covered.begin(), covered.end());
    covered.erase(std::unique(covered.begin(), covered.end()), covered.end());
    expect(covered == ids, "individual coverage over 10 splits");

    r.passed = failures.empty();
    std::ostringstream os;
    os << trials_seen << " trials, " << segments_seen << " segments checked";
    for (const auto& f : failures) os << "; " << f;
    r.detail = os.str();
  });
}

CheckResult verify_accumulator_range() {
  return timed("accumulator range", [&](CheckResult& r) {
    QuantizedCnn q;
    q.input_rows = 19;
    q.input_cols = kCountdownWidth;
    const auto& a = q.arch;
    q.conv1.weight = {{a.conv1_filters, 1, a.conv1_kernel, a.conv1_kernel}, {}, 1.0};
    q.conv1.weight.values.assign(shape_volume(q.conv1.weight.shape), 127);
    q.conv1.bias.assign(a.conv1_filters, kBiasLimit);
    q.conv2.weight = {{a.conv2_filters, a.conv1_filters, a.conv2_kernel, a.conv2_kernel}, {}, 1.0};
    q.conv2.weight.values.assign(shape_volume(q.conv2.weight.shape), 127);
    q.conv2.bias.assign(a.conv2_filters, kBiasLimit);
    q.thresholds = {-1, -1};
    q.dense.weight = {{a.classes, q.feature_count()}, std::vector<std::int8_t>(a.classes * q.feature_count(), 127), 1.0};
    q.dense.bias.assign(a.classes, kBiasLimit);
    const Int8Matrix x(q.input_rows, q.input_cols, 127);
    const auto fwd = detail::int_forward(q, x);

    // 64-bit reference of the same-padded convolution.
    auto reference = [](const std::vector<std::int64_t>& in, std::size_t C, std::size_t H, std::size_t W,
                        const QuantizedConv& conv) {
      const std::size_t F = conv.out_channels(), k = conv.kernel();
      const long pad = static_cast<long>(k / 2);
      std::vector<std::int64_t> out(F * H * W);
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t xx = 0; xx < W; ++xx) {
            std::int64_t acc = conv.bias[f];
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const long iy = static_cast<long>(y + ky) - pad, ix = static_cast<long>(xx + kx) - pad;
                  if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                  acc += std::int64_t{conv.weight.values[((f * C + c) * k + ky) * k + kx]} *
                         in[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
                }
            out[(f * H + y) * W + xx] = acc;
          }
      return out;
    };
    const std::vector<std::int64_t> in1(x.data.begin(), x.data.end());
    const auto ref1 = reference(in1, 1, q.input_rows, q.input_cols, q.conv1);
    const Shape p1 = q.pool1_shape();
    const std::vector<std::int64_t> in2(fwd.pooled1.begin(), fwd.pooled1.end());
    const auto ref2 = reference(in2, p1[0], p1[1], p1[2], q.conv2);

    std::int64_t peak = 0;
    bool equal = ref1.size() == fwd.preact1.size() && ref2.size() == fwd.preact2.size();
    for (std::size_t i = 0; equal && i < ref1.size(); ++i) {
      equal = ref1[i] == fwd.preact1[i];
      peak = std::max(peak, std::abs(ref1[i]));
    }
    for (std::size_t i = 0; equal && i < ref2.size(); ++i) {
      equal = ref2[i] == fwd.preact2[i];
      peak = std::max(peak, std::abs(ref2[i]));
    }
    const auto logits = quantized_logits(q, x);
    const std::int64_t dense_ref = kBiasLimit + std::int64_t{127} * static_cast<std::int64_t>(q.feature_count());
    equal = equal && logits.size() == 2 && logits[0] == dense_ref;
    peak = std::max(peak, dense_ref);
    r.passed = equal && peak <= std::numeric_limits<std::int32_t>::max();
    r.detail = "peak |accumulator| " + std::to_string(peak) + (equal ? ", exact" : ", MISMATCH");
  });
}

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  GeneratorConfig gen;
  gen.countdown_trials = gen.stressed_trials = gen.stoplight_trials = options.trials_per_kind;
  gen.seed = derive_seed(options.seed, {1});
  return {verify_event_equivalence(options.equivalence_pairs, derive_seed(options.seed, {2})),
          verify_op_count_identity(options.equivalence_pairs, derive_seed(options.seed, {3})),
          verify_edge_invariants(options.edge_steps, derive_seed(options.seed, {4})),
          verify_pipeline_invariants(gen, derive_seed(options.seed, {5})),
          verify_accumulator_range()};
}

}  // namespace spikeadapt
