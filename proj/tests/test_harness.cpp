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


#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "spikeadapt/archive.hpp"
#include "spikeadapt/error.hpp"
#include "spikeadapt/harness.hpp"

using namespace spikeadapt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("spikeadapt-test-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig small_run() {
  RunConfig c = default_run_config();
  c.studies = {Study::Fcas};
  c.generator.countdown_trials = 3;
  c.generator.stressed_trials = 2;
  c.generator.stoplight_trials = 2;
  c.stage1.epochs = 1;
  c.qat.max_epochs = 1;
  c.calibration_samples = 8;
  c.edge.epochs = 3;
  c.edge.checkpoints = {3};
  c.edge.learn.neurons_per_class = 20;
  c.repeats = 1;
  c.threads = 1;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("run config json") {
  SUBCASE("round trip") {
    const RunConfig c = small_run();
    const RunConfig back = run_config_from_json(run_config_to_json(c));
    CHECK(run_config_to_json(back) == run_config_to_json(c));
  }
  SUBCASE("partial override keeps defaults") {
    const RunConfig c = run_config_from_json(R"({"repeats": 3, "edge": {"epochs": 9}})");
    CHECK(c.repeats == 3);
    CHECK(c.edge.epochs == 9);
    CHECK(c.edge.weight_factor == default_run_config().edge.weight_factor);
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(run_config_from_json(R"({"repeets": 3})"), ValidationError);
    CHECK_THROWS_AS(run_config_from_json(R"({"edge": {"epoch": 3}})"), ValidationError);
    CHECK_THROWS_AS(run_config_from_json(R"({"repeats": "ten"})"), ValidationError);
    CHECK_THROWS_AS(run_config_from_json(R"({"studies": ["xyz"]})"), ValidationError);
    CHECK_THROWS_AS(run_config_from_json("{not json"), ValidationError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), IoError);
  }
}

TEST_CASE("dataset archive round trip") {
  TempDir tmp("archive");
  DatasetArchive a;
  a.kind = ExperimentKind::Stoplight;
  a.generator.seed = 77;
  LabeledDataset d;
  d.channels = {"Cz", "Pz"};
  for (int i = 0; i < 3; ++i) {
    Segment s;
    s.data = Int8Matrix(2, 5);
    for (std::size_t k = 0; k < s.data.size(); ++k) s.data.data[k] = static_cast<std::int8_t>(i * 10 - static_cast<int>(k));
    s.label = i % 2;
    s.participant = 4;
    s.trial = static_cast<std::uint32_t>(i);
    d.segments.push_back(s);
  }
  d.participants = {4};
  a.splits["all"] = d;
  write_dataset_archive(tmp.path / "a", a);
  CHECK(read_dataset_archive(tmp.path / "a") == a);
  CHECK_THROWS_AS(read_dataset_archive(tmp.path / "missing"), IoError);
}

TEST_CASE("edge layer archive round trip") {
  TempDir tmp("edge");
  EdgeLearnConfig lc;
  lc.neurons_per_class = 7;
  const EdgeLayer l = init_edge_layer(130, 17, lc);
  write_edge_layer(tmp.path / "e", l);
  CHECK(read_edge_layer(tmp.path / "e") == l);
}

TEST_CASE("gen-data smoke") {
  TempDir a("gen-a"), b("gen-b");
  RunConfig c = default_run_config();
  c.generator.countdown_trials = 2;
  c.generator.stressed_trials = 1;
  c.generator.stoplight_trials = 1;
  c.repeats = 1;
  const auto t0 = std::chrono::steady_clock::now();
  generate_archives(c, a.path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 10.0);
  generate_archives(c, b.path);
  std::size_t dirs = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_directory() || !fs::exists(e.path() / "manifest.json")) continue;
    ++dirs;
    const fs::path rel = fs::relative(e.path(), a.path);
    CHECK(read_dataset_archive(e.path()) == read_dataset_archive(b.path / rel));
  }
  CHECK(dirs == 3 * 11);
}

TEST_CASE("small full run") {
  const RunConfig c = small_run();
  const RunBundle r1 = full_run(c);
  REQUIRE(r1.splits.size() == 1);
  INFO(r1.splits[0].error);
  REQUIRE(r1.splits[0].complete);

  std::vector<std::string> stages;
  for (const auto& s : r1.stages) stages.push_back(s.stage);
  CHECK(stages == std::vector<std::string>{"stage-1", "stage-2-pre-qat", "stage-2"});
  // Three drivers, epochs 0..3 each.
  CHECK(r1.curves.size() == 3 * 4);
  CHECK(r1.energy.size() == 3);
  for (const auto& e : r1.energy) {
    CHECK(e.event.event_accumulates > 0);
    CHECK(e.dense.dense_macs > e.event.event_accumulates);
  }

  const RunBundle r2 = full_run(c);
  REQUIRE(r2.curves.size() == r1.curves.size());
  for (std::size_t i = 0; i < r1.curves.size(); ++i) CHECK(r1.curves[i].metrics == r2.curves[i].metrics);
  REQUIRE(r2.predictions.size() == r1.predictions.size());
  for (std::size_t i = 0; i < r1.predictions.size(); ++i) {
    CHECK(r1.predictions[i].prediction == r2.predictions[i].prediction);
  }

  TempDir tmp("bundle");
  write_bundle(tmp.path, r1, c);
  for (const char* f : {"stage_metrics.csv", "curves.csv", "energy.csv", "predictions.csv", "run_manifest.json"}) {
    CHECK(fs::exists(tmp.path / f));
  }
  const RunBundle back = read_bundle(tmp.path);
  CHECK(back.stages.size() == r1.stages.size());
  CHECK(back.curves.size() == r1.curves.size());
  REQUIRE(back.splits.size() == 1);
  CHECK(back.splits[0].complete);
  CHECK(back.splits[0].individual == r1.splits[0].individual);
  CHECK(back.splits[0].seconds == doctest::Approx(r1.splits[0].seconds));
  CHECK(back.seconds == doctest::Approx(r1.seconds));

  const Report rep = make_report(back, std::vector<std::size_t>{3});
  std::vector<std::string> order;
  for (const auto& row : rep.metrics) {
    if (order.empty() || order.back() != row.stage) order.push_back(row.stage);
    CHECK(row.study == "fcas");
  }
  CHECK(order == std::vector<std::string>{"stage-1", "stage-2", "epoch-3"});
  write_report(tmp.path, rep);
  std::ifstream in(tmp.path / "table_metrics.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.find("p_value") != std::string::npos);
  CHECK(fs::exists(tmp.path / "table_energy.csv"));
  CHECK(fs::exists(tmp.path / "figure_curves.csv"));
}
