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

// Command line front end: gen-data, full-run, report, verify.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "spikeadapt/error.hpp"
#include "spikeadapt/harness.hpp"
#include "spikeadapt/invariants.hpp"

namespace fs = std::filesystem;
using namespace spikeadapt;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string study;
  std::optional<int> experiment;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> repeats;
};

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? default_run_config() : load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.study.empty()) cfg.studies = {parse_study(c.study)};
  if (c.experiment) cfg.experiment = *c.experiment;
  if (c.threads) cfg.threads = *c.threads;
  if (c.repeats) cfg.repeats = *c.repeats;
  cfg.validate();
  return cfg;
}

void print_report(const Report& rep) {
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& r : rep.metrics) {
    std::cout << std::left << std::setw(10) << r.stage << std::setw(6) << r.study << std::setw(10) << r.metric
              << r.mean;
    if (r.sd) std::cout << " (" << *r.sd << ")";
    if (r.p_value) std::cout << "  p=" << *r.p_value;
    std::cout << '\n';
  }
  for (const auto& r : rep.energy) {
    std::cout << std::left << std::setw(10) << r.stage << std::setw(6) << r.study << std::setw(20) << r.metric
              << r.mean;
    if (r.sd) std::cout << " (" << *r.sd << ")";
    std::cout << '\n';
  }
}

int run(int argc, char** argv) {
  CLI::App app{"spikeadapt: few-shot spiking-network adaptation workbench"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool run_flags) {
    sub->add_option("--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "master seed");
    sub->add_option("--out", common.out, "output directory");
    if (run_flags) {
      sub->add_option("--study", common.study, "restrict to one study")->check(CLI::IsMember({"acs", "fcas"}));
      sub->add_option("--experiment", common.experiment, "1 nominal countdown, 2 stressed, 3 stoplight")
          ->check(CLI::Range(1, 3));
      sub->add_option("--threads", common.threads, "worker threads (0 = all cores)");
      sub->add_option("--repeats", common.repeats, "number of participant splits");
    }
  };

  auto* gen = app.add_subcommand("gen-data", "write synthetic participant archives");
  add_common(gen, false);
  auto* full = app.add_subcommand("full-run", "run the three-step pipeline and write tables");
  add_common(full, true);
  bool quiet = false;
  full->add_flag("--quiet", quiet, "suppress progress lines");
  auto* report = app.add_subcommand("report", "aggregate a run bundle into tables");
  std::string bundle_dir;
  report->add_option("bundle", bundle_dir, "bundle directory written by full-run")->required();
  report->add_option("--out", common.out, "where to write the tables (default: the bundle)");
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  VerifyOptions vopt;
  verify->add_option("--seed", vopt.seed, "seed for the randomized checks");
  verify->add_option("--pairs", vopt.equivalence_pairs, "random model/input pairs");
  verify->add_option("--steps", vopt.edge_steps, "randomized edge learning steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    const RunConfig cfg = resolve(common);
    generate_archives(cfg, cfg.out_dir);
    std::cout << "wrote archives to " << cfg.out_dir << '\n';
    return 0;
  }
  if (full->parsed()) {
    const RunConfig cfg = resolve(common);
    ProgressFn progress;
    if (!quiet) {
      progress = [t0 = std::chrono::steady_clock::now()](const std::string& msg) {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        std::cerr << '[' << std::fixed << std::setprecision(1) << std::setw(7) << dt.count() << "s] " << msg
                  << std::endl;
      };
    }
    const RunBundle bundle = full_run(cfg, progress);
    write_bundle(cfg.out_dir, bundle, cfg);
    const Report rep = make_report(bundle, cfg.edge.checkpoints);
    write_report(cfg.out_dir, rep);
    print_report(rep);
    std::size_t incomplete = 0;
    for (const auto& s : bundle.splits) incomplete += s.complete ? 0 : 1;
    std::cout << "finished in " << std::setprecision(1) << bundle.seconds << " s; " << incomplete
              << " incomplete splits; results in " << cfg.out_dir << '\n';
    return incomplete == 0 ? 0 : 1;
  }
  if (report->parsed()) {
    const RunBundle bundle = read_bundle(bundle_dir);
    const Report rep = make_report(bundle);
    write_report(common.out.empty() ? bundle_dir : common.out, rep);
    print_report(rep);
    return 0;
  }
  if (verify->parsed()) {
    bool ok = true;
    for (const auto& r : run_verify(vopt)) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(2)
                << r.seconds << " s): " << r.detail << '\n';
      ok = ok && r.passed;
    }
    return ok ? 0 : 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
