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


#include <random>
#include <sstream>

#include "doctest.h"
#include "spikeadapt/error.hpp"
#include "spikeadapt/random.hpp"
#include "spikeadapt/stats.hpp"
#include "support.hpp"

using namespace spikeadapt;

TEST_CASE("metrics") {
  SUBCASE("from counts") {
    const MetricsReport m = metrics_from_counts(8, 80, 10, 2);
    CHECK(m.accuracy == doctest::Approx(0.88));
    CHECK(*m.tpr == doctest::Approx(0.8));
    CHECK(*m.tnr == doctest::Approx(80.0 / 90.0));
    CHECK(m.total() == 100);
  }
  SUBCASE("absent ratios") {
    const MetricsReport m = metrics_from_counts(0, 5, 0, 0);
    CHECK(m.accuracy == 1.0);
    CHECK_FALSE(m.tpr.has_value());
    CHECK(*m.tnr == 1.0);
  }
  SUBCASE("from predictions") {
    const std::vector<int> pred{1, 0, 1, 1, 0}, lab{1, 0, 0, 1, 1};
    const MetricsReport m = compute_metrics(pred, lab);
    CHECK(m == metrics_from_counts(2, 1, 1, 1));
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{}, std::vector<int>{}), ValidationError);
    CHECK_THROWS_AS(compute_metrics(pred, std::vector<int>{1}), ValidationError);
  }
}

TEST_CASE("aggregate") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const Aggregate a = aggregate(v);
  CHECK(a.mean == doctest::Approx(5.0));
  CHECK(a.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(a.n == 8);
  const Aggregate one = aggregate(std::vector<double>{3.5});
  CHECK(one.sd == 0.0);
  CHECK_THROWS_AS(aggregate(std::vector<double>{}), ValidationError);
}

TEST_CASE("welch t-test") {
  SUBCASE("shifted integer runs") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
    const TTestResult r = welch_t_test(a, b);
    CHECK(r.t == doctest::Approx(-1.0));
    CHECK(r.dof == doctest::Approx(8.0));
    CHECK(r.p_value == doctest::Approx(testing::welch_p_quadrature(a, b)).epsilon(1e-6));
    CHECK(r.p_value == doctest::Approx(0.3466).epsilon(1e-3));
  }
  SUBCASE("random pairs against quadrature") {
    Rng rng(12);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t na = 2 + rng() % 30, nb = 2 + rng() % 30;
      const double shift = z(rng), scale = 0.2 + std::abs(z(rng));
      std::vector<double> a(na), b(nb);
      for (auto& x : a) x = z(rng);
      for (auto& x : b) x = shift + scale * z(rng);
      const double p = welch_t_test(a, b).p_value;
      CHECK(std::abs(p - testing::welch_p_quadrature(a, b)) < 1e-6);
    }
  }
  SUBCASE("degenerate input") {
    CHECK_THROWS_AS(welch_t_test(std::vector<double>{1}, std::vector<double>{1, 2}), ValidationError);
    CHECK_THROWS_AS(welch_t_test(std::vector<double>{1, 1}, std::vector<double>{2, 2}), ValidationError);
  }
}

TEST_CASE("percent reduction and latency ratio") {
  CHECK(percent_reduction(195.6, 4.90) == doctest::Approx(97.5).epsilon(0.05 / 97.5));
  CHECK(latency_ratio(5.56, 4.49) == doctest::Approx(1.24).epsilon(0.005 / 1.24));
  CHECK(percent_reduction(10.0, 10.0) == 0.0);
  CHECK(percent_reduction(10.0, 12.0) == doctest::Approx(-20.0));
  CHECK_THROWS_AS(percent_reduction(0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(latency_ratio(1.0, 0.0), ValidationError);
}

TEST_CASE("energy proxy") {
  const OpCount ops{1000, 500, 20};
  const EnergyReport r = energy_proxy(ops, CostModel{4.6, 1.0, 0.5}, 0.25);
  CHECK(r.proxy_energy == doctest::Approx(1000 * 4.6 + 500 + 10));
  CHECK(r.wall_seconds == 0.25);
  CHECK(r.ops == ops);
  CHECK(energy_proxy(OpCount{}, CostModel{}).proxy_energy == 0.0);
  CHECK_THROWS_AS(energy_proxy(ops, CostModel{-1.0, 1.0, 0.0}), ValidationError);
  CHECK(ops + ops == OpCount{2000, 1000, 40});
}

TEST_CASE("table csv") {
  std::ostringstream os;
  const std::vector<TableRow> rows{{"stage-1", "acs", "accuracy", 0.99, 0.01, std::nullopt},
                                   {"epoch-3", "acs", "tpr", 0.9, std::nullopt, 0.04}};
  write_table_csv(os, rows);
  const std::string s = os.str();
  CHECK(s.rfind("stage,study,metric,mean,sd,p_value\n", 0) == 0);
  CHECK(s.find("stage-1,acs,accuracy,") != std::string::npos);
  CHECK(s.find("epoch-3,acs,tpr,") != std::string::npos);
}
