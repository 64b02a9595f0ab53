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


#include "doctest.h"
#include "spikeadapt/csnn.hpp"
#include "spikeadapt/edge_learning.hpp"
#include "spikeadapt/error.hpp"
#include "spikeadapt/invariants.hpp"
#include "support.hpp"

using namespace spikeadapt;
namespace st = spikeadapt::testing;

namespace {

// conv1 and conv2 are 1x1 identity maps with threshold 0.
QuantizedCnn identity_net(std::size_t rows, std::size_t cols) {
  QuantizedCnn q;
  q.input_rows = rows;
  q.input_cols = cols;
  q.arch.conv1_filters = 1;
  q.arch.conv1_kernel = 1;
  q.arch.conv2_filters = 1;
  q.arch.conv2_kernel = 1;
  q.arch.pool = 1;
  q.conv1.weight = {{1, 1, 1, 1}, {1}, 1.0};
  q.conv1.bias = {0};
  q.conv2.weight = {{1, 1, 1, 1}, {1}, 1.0};
  q.conv2.bias = {0};
  q.dense.weight = {{2, rows * cols}, std::vector<std::int8_t>(2 * rows * cols, 0), 1.0};
  q.dense.bias = {0, 0};
  return q;
}

}  // namespace

TEST_CASE("headless model exposes features") {
  const CsnnModel m = convert_to_csnn(identity_net(3, 5));
  CHECK_FALSE(m.has_edge());
  Int8Matrix x(3, 5);
  x(1, 2) = 7;
  const SpikePattern f = extract_features(m, x);
  CHECK(f.dims == Shape{15});
  CHECK(f.active == std::vector<std::uint32_t>{7});
  const InferenceResult r = infer_event(m, x);
  CHECK(r.potentials.empty());
  CHECK_FALSE(r.label.has_value());
}

TEST_CASE("edge dimension mismatch is rejected") {
  EdgeLearnConfig cfg;
  cfg.neurons_per_class = 2;
  CHECK_THROWS_AS(convert_to_csnn(identity_net(3, 5), init_edge_layer(14, 3, cfg)), ShapeError);
  CsnnModel m = convert_to_csnn(identity_net(3, 5));
  CHECK_THROWS_AS(attach_edge(m, init_edge_layer(16, 3, cfg)), ShapeError);
}

TEST_CASE("conversion keeps integer parameters") {
  Rng rng(0);
  const QuantizedCnn q = random_quantized_cnn(rng);
  const CsnnModel m = convert_to_csnn(q);
  CHECK(m.network() == q);
  CHECK(m.network().conv1.weight.values == q.conv1.weight.values);
  CHECK(m.network().conv2.bias == q.conv2.bias);
  CHECK(m.network().thresholds == q.thresholds);
}

TEST_CASE("dense path") {
  SUBCASE("zero input gives an empty trace") {
    const CsnnModel m = convert_to_csnn(identity_net(4, 4));
    const InferenceResult r = infer_dense(m, Int8Matrix(4, 4));
    CHECK(r.trace.conv1.count() == 0);
    CHECK(r.trace.pool2.count() == 0);
  }
  SUBCASE("a single spike stays in place") {
    const CsnnModel m = convert_to_csnn(identity_net(4, 4));
    Int8Matrix x(4, 4);
    x(2, 3) = 1;
    const InferenceResult r = infer_dense(m, x);
    CHECK(r.trace.conv2.active == std::vector<std::uint32_t>{11});
    CHECK(r.trace.pool2.active == std::vector<std::uint32_t>{11});
  }
  SUBCASE("conv1 MACs on a full-size input") {
    QuantizedCnn q = identity_net(19, 996);
    q.arch.conv1_filters = 12;
    q.arch.conv1_kernel = 5;
    q.conv1.weight = {{12, 1, 5, 5}, std::vector<std::int8_t>(300, 1), 1.0};
    q.conv1.bias.assign(12, 0);
    q.conv2.weight = {{1, 12, 1, 1}, std::vector<std::int8_t>(12, 1), 1.0};
    const InferenceResult r = infer_dense(convert_to_csnn(q), Int8Matrix(19, 996));
    CHECK(r.ops.conv1.dense_macs == 12ull * 19 * 996 * 5 * 5 * 1);
    CHECK(r.ops.conv1.weight_fetches == r.ops.conv1.dense_macs);
  }
  SUBCASE("traces match a plain-loop integer oracle") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
      const CsnnModel m = random_csnn(rng);
      const Int8Matrix x = random_input(rng, m.network().input_rows, m.network().input_cols);
      const auto t = st::int_forward_oracle(m.network(), x);
      const InferenceResult r = infer_dense(m, x);
      CHECK(r.trace.conv1.to_dense() == t.spikes1);
      CHECK(r.trace.pool1.to_dense() == t.pooled1);
      CHECK(r.trace.conv2.to_dense() == t.spikes2);
      CHECK(r.trace.pool2.to_dense() == t.pooled2);
      SpikePattern flat = r.trace.pool2;
      flat.dims = {flat.volume()};
      std::vector<std::int32_t> pots;
      const int label = st::brute_force_class(*m.edge(), flat, &pots);
      CHECK(r.potentials == pots);
      CHECK(r.label == label);
    }
  }
}

TEST_CASE("event path") {
  SUBCASE("equals the dense path") {
    const CheckResult c = verify_event_equivalence(200, 17);
    INFO(c.detail);
    CHECK(c.passed);
  }
  SUBCASE("silent layer 1 means no downstream work") {
    QuantizedCnn q = identity_net(4, 6);
    q.thresholds.conv1 = 1000;
    EdgeLearnConfig cfg;
    cfg.neurons_per_class = 3;
    const CsnnModel m = convert_to_csnn(q, init_edge_layer(24, 5, cfg));
    Int8Matrix x(4, 6, 100);
    const InferenceResult r = infer_event(m, x);
    CHECK(r.trace.pool1.count() == 0);
    CHECK(r.ops.conv2 == OpCount{});
    CHECK(r.ops.readout == OpCount{});
  }
  SUBCASE("conv2 accumulates scale with input density") {
    Rng rng(2);
    for (int rep = 0; rep < 50; ++rep) {
      const CsnnModel m = random_csnn(rng);
      const Int8Matrix x = random_input(rng, m.network().input_rows, m.network().input_cols);
      const InferenceResult d = infer_dense(m, x), e = infer_event(m, x);
      const auto& p1 = e.trace.pool1;
      // accumulates / MACs == active / volume, cross-multiplied to stay exact.
      CHECK(e.ops.conv2.event_accumulates * p1.volume() == d.ops.conv2.dense_macs * p1.count());
      CHECK(e.ops.conv2.dense_macs == 0);
      std::uint64_t synapses = 0;
      SpikePattern flat = e.trace.pool2;
      for (std::size_t n = 0; n < m.edge()->num_neurons(); ++n)
        for (auto i : flat.active) synapses += m.edge()->connected(n, i);
      CHECK(e.ops.readout.event_accumulates == synapses);
    }
  }
}

TEST_CASE("num_weights estimate") {
  auto with_counts = [](std::initializer_list<std::size_t> counts) {
    std::vector<SpikePattern> ps;
    for (std::size_t c : counts) {
      SpikePattern p;
      p.dims = {1000};
      for (std::uint32_t i = 0; i < c; ++i) p.active.push_back(i);
      ps.push_back(p);
    }
    return ps;
  };
  CHECK(estimate_num_weights(with_counts({0, 0, 0})) == 1);
  CHECK(estimate_num_weights(with_counts({100})) == 120);
  CHECK(estimate_num_weights(with_counts({90, 110})) == 120);
  // mean 417.4 -> 500.88
  CHECK(estimate_num_weights(with_counts({417, 417, 417, 417, 419})) == 501);
  CHECK(estimate_num_weights(with_counts({10}), 2.0) == 20);
}
