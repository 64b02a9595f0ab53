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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spikeadapt/cnn.hpp"
#include "spikeadapt/edge_layer.hpp"
#include "spikeadapt/eeg.hpp"
#include "spikeadapt/quantization.hpp"
#include "spikeadapt/stats.hpp"

namespace spikeadapt {

enum class Study { Acs, Fcas };

std::string_view study_name(Study study);
Study parse_study(std::string_view name);
ChannelSet study_channels(Study study);

struct EdgeStageConfig {
  EdgeLearnConfig learn;
  std::size_t epochs = 25;
  double weight_factor = 1.2;
  std::size_t duplicate_copies = 3;  // countdown experiments only
  std::size_t augment_copies = 4;
  double holdout_fraction = 0.2;
  std::vector<std::size_t> checkpoints{3, 5, 7};

  void validate() const;
};

/// Everything a full run needs. Seeds of the nested configs are ignored:
/// every stochastic step draws from a stream derived from `seed`.
struct RunConfig {
  int experiment = 1;
  std::vector<Study> studies{Study::Acs, Study::Fcas};
  GeneratorConfig generator;
  TrainConfig stage1;
  QatConfig qat;
  double calibration_percentile = 90.0;
  std::size_t calibration_samples = 64;
  EdgeStageConfig edge;
  CostModel cost;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  std::string out_dir = "spikeadapt-run";
  /// Load segments from gen-data archives instead of generating them.
  std::string data_dir;
  /// Worker threads over (study, split) tasks; 0 picks the hardware count.
  std::size_t threads = 0;

  void validate() const;
};

/// Desk-scale benchmark: 11 participants with fewer trials and group epochs
/// than the recorded study, sized to finish on a desktop CPU.
RunConfig default_run_config();

/// JSON overrides applied on top of default_run_config(); unknown keys are
/// rejected with ValidationError.
RunConfig run_config_from_json(std::string_view text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

struct StageRecord {
  Study study = Study::Acs;
  std::size_t split = 0;
  std::string stage;  // stage-1, stage-2-pre-qat, stage-2
  MetricsReport metrics;
  std::size_t epochs = 0;
};

struct CurveRecord {
  Study study = Study::Acs;
  std::size_t split = 0;
  std::size_t driver = 0;
  int participant = 0;
  std::size_t num_weights = 0;
  std::size_t epoch = 0;  // 0 = freshly initialised layer
  MetricsReport metrics;
};

struct EnergyRecord {
  Study study = Study::Acs;
  std::size_t split = 0;
  std::size_t driver = 0;
  int participant = 0;
  std::size_t segments = 0;
  OpCount dense;
  OpCount event;
  double dense_energy = 0.0;
  double event_energy = 0.0;
  double dense_seconds = 0.0;
  double event_seconds = 0.0;
  double conv2_input_density = 0.0;  // pooled layer-1 spikes over the batch
  std::uint64_t conv2_dense_macs = 0;
  std::uint64_t conv2_event_accumulates = 0;
};

struct PredictionRecord {
  Study study = Study::Acs;
  std::size_t split = 0;
  std::string scope;  // "group" or the participant id
  std::string stage;  // stage name or "epoch-<n>"
  std::size_t index = 0;
  int label = 0;
  int prediction = 0;
};

struct SplitStatus {
  Study study = Study::Acs;
  std::size_t split = 0;
  std::vector<int> group;
  std::vector<int> individual;
  bool complete = false;
  std::string error;
  double seconds = 0.0;
};

struct RunBundle {
  std::vector<StageRecord> stages;
  std::vector<CurveRecord> curves;
  std::vector<EnergyRecord> energy;
  std::vector<PredictionRecord> predictions;
  std::vector<SplitStatus> splits;
  double seconds = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Three-step pipeline for every split and study (see README).
RunBundle full_run(const RunConfig& config, const ProgressFn& progress = {});

/// stage_metrics.csv, curves.csv, energy.csv, predictions.csv and
/// run_manifest.json under `dir`.
void write_bundle(const std::filesystem::path& dir, const RunBundle& bundle, const RunConfig& config);
/// Reads the CSV files written by write_bundle.
RunBundle read_bundle(const std::filesystem::path& dir);

struct CurvePoint {
  std::string study;
  std::size_t epoch = 0;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

struct Report {
  std::vector<TableRow> metrics;  // stage-1, stage-2, epoch-3/5/7 per study
  std::vector<TableRow> energy;
  std::vector<CurvePoint> curves;
};

Report make_report(const RunBundle& bundle, std::span<const std::size_t> checkpoints = {});
/// table_metrics.csv, table_energy.csv, figure_curves.csv.
void write_report(const std::filesystem::path& dir, const Report& report);

/// One archive directory per participant and experiment kind:
/// <dir>/<kind>/participant_<id>.
void generate_archives(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace spikeadapt
