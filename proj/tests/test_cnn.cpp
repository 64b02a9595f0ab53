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


#include <cmath>
#include <random>

#include "doctest.h"
#include "spikeadapt/cnn.hpp"
#include "spikeadapt/error.hpp"
#include "support.hpp"

using namespace spikeadapt;
using spikeadapt::testing::random_tensor;

TEST_CASE("zero model gives zero logits") {
  CnnModel m = make_cnn(5, 8, 0);
  for (auto p : parameters(m)) p.tensor->fill(0.0);
  const Tensor logits = forward_cnn(m, Tensor({5, 8}));
  CHECK(logits[0] == 0.0);
  CHECK(logits[1] == 0.0);
}

TEST_CASE("1x1 unit kernel is the identity") {
  const Tensor ones({1, 4, 4}, 1.0);
  const Tensor out = conv2d_same(ones, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}));
  CHECK(out == ones);
}

TEST_CASE("forward pass matches a nested-loop oracle") {
  Rng rng(0);
  const CnnModel m = make_cnn(7, 30, 0);
  for (int rep = 0; rep < 3; ++rep) {
    const Tensor x = random_tensor(rng, {1, 7, 30});
    const Tensor fast = forward_cnn(m, x);
    const auto slow = spikeadapt::testing::naive_forward(m, x);
    for (std::size_t i = 0; i < 2; ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-5));
  }
}

TEST_CASE("forward rejects the wrong input shape") {
  const CnnModel m = make_cnn(5, 8, 0);
  CHECK_THROWS_AS(forward_cnn(m, Tensor({5, 9})), ShapeError);
}

TEST_CASE("weighted cross entropy") {
  const std::vector<double> even{0.0, 0.0};
  CHECK(weighted_cross_entropy(even, 0, std::vector<double>{1.0, 1.0}) == doctest::Approx(std::log(2.0)));
  CHECK(weighted_cross_entropy(even, 1, std::vector<double>{0.625, 2.5}) == doctest::Approx(2.5 * std::log(2.0)));
  const double tiny = weighted_cross_entropy(std::vector<double>{10.0, -10.0}, 0, std::vector<double>{1.0, 1.0});
  CHECK(tiny == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
  CHECK(tiny == doctest::Approx(2.06e-9).epsilon(0.01));
  CHECK_THROWS_AS(weighted_cross_entropy(even, 2, std::vector<double>{1.0, 1.0}), ValidationError);
}

TEST_CASE("backprop matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& c : spikeadapt::testing::check_gradients(seed)) {
      INFO("seed " << seed << " parameter " << c.parameter);
      CHECK(c.checked > 0);
      CHECK(c.max_relative_error <= 1e-3);
    }
  }
}

TEST_CASE("train_step") {
  Rng rng(4);
  CnnModel m = spikeadapt::testing::micro_cnn(rng);
  const std::vector<Example> batch{{random_tensor(rng, m.input_shape()), 1}};
  SUBCASE("zero learning rate is a no-op") {
    TrainConfig tc;
    tc.learning_rate = 0.0;
    MomentumSgd opt(m);
    const CnnModel before = m;
    train_step(m, opt, batch, tc);
    CHECK(m == before);
  }
  SUBCASE("small step lowers the loss") {
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.momentum = 0.0;
    MomentumSgd opt(m);
    const double before = train_step(m, opt, batch, tc);
    const double after = weighted_cross_entropy(forward_cnn(m, batch[0].input).data(), 1, tc.class_weights);
    CHECK(after <= before);
  }
  SUBCASE("non-finite input diverges") {
    std::vector<Example> bad = batch;
    bad[0].input[0] = std::nan("");
    TrainConfig tc;
    MomentumSgd opt(m);
    CHECK_THROWS_AS(train_step(m, opt, bad, tc), DivergenceError);
  }
}

TEST_CASE("fit_stage1 on a separable toy set") {
  // Class 1 carries a bright left half, class 0 a bright right half.
  Rng rng(9);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::vector<Example> data;
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2;
    Tensor x({1, 4, 8});
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 8; ++c) x.at(0, r, c) = noise(rng) + ((c < 4) == (label == 1) ? 1.0 : 0.0);
    data.push_back({x, label});
  }
  const TrainConfig tc;
  const Stage1Result r = fit_stage1(make_cnn(4, 8, 1), data, tc);
  CHECK(r.epoch_losses.size() == tc.epochs);
  CHECK(r.best_epoch >= 1);
  const auto pred = predict(r.best, data);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < data.size(); ++i) ok += pred[i] == data[i].label;
  CHECK(static_cast<double>(ok) / 200.0 >= 0.99);

  SUBCASE("single epoch keeps the epoch-1 snapshot") {
    TrainConfig one = tc;
    one.epochs = 1;
    const Stage1Result s = fit_stage1(make_cnn(4, 8, 1), data, one);
    CHECK(s.best_epoch == 1);
    CHECK(s.epoch_losses.size() == 1);
  }
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);
  tc = {};
  tc.momentum = 1.0;
  CHECK_THROWS_AS(tc.validate(), ValidationError);
  tc = {};
  tc.class_weights = {1.0, 0.0};
  CHECK_THROWS_AS(tc.validate(), ValidationError);
}
