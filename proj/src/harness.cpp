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

#include "spikeadapt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "json_io.hpp"
#include "spikeadapt/archive.hpp"
#include "spikeadapt/csnn.hpp"
#include "spikeadapt/edge_learning.hpp"
#include "spikeadapt/error.hpp"
#include "spikeadapt/random.hpp"

namespace spikeadapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kGeneratorStream = 0x6E0;
constexpr std::uint64_t kSplitStream = 0x5B1;
constexpr std::uint64_t kTaskStream = 0x7A5;

enum TaskSeed : std::uint64_t {
  kInit = 1,
  kStage1 = 2,
  kCalibration = 3,
  kQat = 4,
  kHoldout = 0x40,
  kAugment = 0x60,
  kEdge = 0x80,
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string participant_dir(int id) {
  std::ostringstream os;
  os << "participant_" << std::setw(2) << std::setfill('0') << id;
  return os.str();
}

GeneratorConfig seeded_generator(const RunConfig& config) {
  GeneratorConfig g = config.generator;
  g.seed = derive_seed(config.seed, {kGeneratorStream});
  return g;
}

}  // namespace

std::string_view study_name(Study study) { return study == Study::Acs ? "acs" : "fcas"; }

Study parse_study(std::string_view name) {
  if (name == "acs") return Study::Acs;
  if (name == "fcas") return Study::Fcas;
  throw ValidationError("study must be 'acs' or 'fcas', got '" + std::string(name) + "'");
}

ChannelSet study_channels(Study study) { return study == Study::Acs ? ChannelSet::all() : ChannelSet::fcas(); }

void EdgeStageConfig::validate() const {
  learn.validate();
  if (learn.num_classes != 2) throw ValidationError("edge layer must have two classes");
  if (!(weight_factor > 0.0)) throw ValidationError("weight_factor must be positive");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ValidationError("holdout_fraction must lie in (0, 1)");
  }
  for (auto c : checkpoints) {
    if (c == 0 || c > epochs) throw ValidationError("edge checkpoints must lie in [1, epochs]");
  }
}

void RunConfig::validate() const {
  kind_from_experiment(experiment);
  if (studies.empty()) throw ValidationError("at least one study is required");
  if (std::set<Study>(studies.begin(), studies.end()).size() != studies.size()) {
    throw ValidationError("studies must not repeat");
  }
  generator.validate();
  if (generator.participants != 11) throw ValidationError("a full run needs exactly 11 participants");
  stage1.validate();
  qat.validate();
  if (!(calibration_percentile > 0.0 && calibration_percentile <= 100.0)) {
    throw ValidationError("calibration_percentile must lie in (0, 100]");
  }
  if (calibration_samples == 0) throw ValidationError("calibration_samples must be positive");
  edge.validate();
  cost.validate();
  if (repeats == 0) throw ValidationError("repeats must be positive");
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
}

RunConfig default_run_config() {
  RunConfig c;
  c.generator.countdown_trials = 24;
  c.generator.stressed_trials = 16;
  c.generator.stoplight_trials = 24;
  c.stage1.epochs = 8;
  return c;
}

namespace {

json config_json(const RunConfig& c) {
  json studies = json::array();
  for (auto s : c.studies) studies.push_back(std::string(study_name(s)));
  return json{{"experiment", c.experiment},
              {"studies", studies},
              {"generator", c.generator},
              {"stage1", c.stage1},
              {"qat", c.qat},
              {"calibration_percentile", c.calibration_percentile},
              {"calibration_samples", c.calibration_samples},
              {"edge",
               {{"learn", c.edge.learn},
                {"epochs", c.edge.epochs},
                {"weight_factor", c.edge.weight_factor},
                {"duplicate_copies", c.edge.duplicate_copies},
                {"augment_copies", c.edge.augment_copies},
                {"holdout_fraction", c.edge.holdout_fraction},
                {"checkpoints", c.edge.checkpoints}}},
              {"cost", c.cost},
              {"repeats", c.repeats},
              {"seed", c.seed},
              {"out_dir", c.out_dir},
              {"data_dir", c.data_dir},
              {"threads", c.threads}};
}

RunConfig config_from(const json& j) {
  RunConfig c;
  c.experiment = j.at("experiment").get<int>();
  c.studies.clear();
  for (const auto& s : j.at("studies")) c.studies.push_back(parse_study(s.get<std::string>()));
  c.generator = j.at("generator").get<GeneratorConfig>();
  c.stage1 = j.at("stage1").get<TrainConfig>();
  c.qat = j.at("qat").get<QatConfig>();
  c.calibration_percentile = j.at("calibration_percentile").get<double>();
  c.calibration_samples = j.at("calibration_samples").get<std::size_t>();
  const json& e = j.at("edge");
  c.edge.learn = e.at("learn").get<EdgeLearnConfig>();
  c.edge.epochs = e.at("epochs").get<std::size_t>();
  c.edge.weight_factor = e.at("weight_factor").get<double>();
  c.edge.duplicate_copies = e.at("duplicate_copies").get<std::size_t>();
  c.edge.augment_copies = e.at("augment_copies").get<std::size_t>();
  c.edge.holdout_fraction = e.at("holdout_fraction").get<double>();
  c.edge.checkpoints = e.at("checkpoints").get<std::vector<std::size_t>>();
  c.cost = j.at("cost").get<CostModel>();
  c.repeats = j.at("repeats").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.data_dir = j.at("data_dir").get<std::string>();
  c.threads = j.at("threads").get<std::size_t>();
  return c;
}

}  // namespace

RunConfig run_config_from_json(std::string_view text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!user.is_object()) throw ValidationError("config must be a JSON object");
  json merged = config_json(default_run_config());
  detail::reject_unknown_keys(user, merged, "");
  merged.merge_patch(user);
  RunConfig c;
  try {
    c = config_from(merged);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& config) { return config_json(config).dump(2); }

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

namespace {

std::map<Study, LabeledDataset> prepare_data(const RunConfig& config) {
  const ExperimentKind kind = kind_from_experiment(config.experiment);
  const GeneratorConfig gen = seeded_generator(config);
  std::map<Study, std::vector<LabeledDataset>> parts;
  for (std::size_t p = 0; p < gen.participants; ++p) {
    const int id = static_cast<int>(p);
    if (!config.data_dir.empty()) {
      const fs::path dir = fs::path(config.data_dir) / std::string(kind_name(kind)) / participant_dir(id);
      const DatasetArchive a = read_dataset_archive(dir);
      const auto it = a.splits.find("segments");
      if (it == a.splits.end()) throw IoError(dir.string() + ": archive has no 'segments' split");
      for (auto s : config.studies) parts[s].push_back(select_channels(it->second, study_channels(s)));
      continue;
    }
    const auto trials = generate_participant(gen, id, kind);
    for (auto s : config.studies) {
      std::vector<TrialRecording> restricted;
      restricted.reserve(trials.size());
      for (const auto& t : trials) restricted.push_back(select_channels(t, study_channels(s)));
      parts[s].push_back(build_dataset(restricted).dataset);
    }
  }
  std::map<Study, LabeledDataset> out;
  for (auto& [s, list] : parts) out[s] = merge(list);
  return out;
}

MetricsReport record_predictions(std::vector<PredictionRecord>& sink, Study study, std::size_t split,
                                 const std::string& scope, const std::string& stage, std::span<const int> predictions,
                                 std::span<const int> labels) {
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sink.push_back({study, split, scope, stage, i, labels[i], predictions[i]});
  }
  return compute_metrics(predictions, labels);
}

std::vector<SpikePattern> features_of(const CsnnModel& model, const LabeledDataset& data) {
  std::vector<SpikePattern> out;
  out.reserve(data.size());
  for (const auto& s : data.segments) out.push_back(extract_features(model, s.data));
  return out;
}

struct TaskOutput {
  std::vector<StageRecord> stages;
  std::vector<CurveRecord> curves;
  std::vector<EnergyRecord> energy;
  std::vector<PredictionRecord> predictions;
};

struct TaskContext {
  const RunConfig& config;
  ExperimentKind kind;
  std::mutex& timing;
  const ProgressFn& progress;
};

void run_driver(const TaskContext& ctx, Study study, std::size_t split, std::size_t driver, int participant,
                const LabeledDataset& data, const QuantizedCnn& network, std::uint64_t task_seed, TaskOutput& out) {
  const RunConfig& cfg = ctx.config;
  const LabeledDataset mine = select_participants(data, std::span<const int>(&participant, 1));
  const Holdout h = holdout_split(mine, cfg.edge.holdout_fraction, derive_seed(task_seed, {kHoldout, driver}));
  LabeledDataset train = h.train;
  if (ctx.kind != ExperimentKind::Stoplight) train = duplicate_positives(train, cfg.edge.duplicate_copies);
  train = augment_noise(train, cfg.edge.augment_copies, derive_seed(task_seed, {kAugment, driver}));

  CsnnModel model = convert_to_csnn(network);
  const auto own_features = features_of(model, h.train);
  const std::size_t nw = estimate_num_weights(own_features, cfg.edge.weight_factor);
  const SpikeDataset train_set{features_of(model, train), train.labels()};
  const SpikeDataset eval_set{features_of(model, h.eval), h.eval.labels()};

  EdgeLearnConfig lc = cfg.edge.learn;
  lc.seed = derive_seed(task_seed, {kEdge, driver});
  EdgeLayer layer = init_edge_layer(model.feature_count(), nw, lc);

  const std::string scope = std::to_string(participant);
  auto record_epoch = [&](std::size_t epoch, std::span<const int> predictions) {
    const MetricsReport m = record_predictions(out.predictions, study, split, scope, "epoch-" + std::to_string(epoch),
                                               predictions, eval_set.labels);
    out.curves.push_back({study, split, driver, participant, nw, epoch, m});
  };
  record_epoch(0, classify_all(layer, eval_set.patterns));
  edge_train(layer, train_set, eval_set, cfg.edge.epochs, record_epoch);

  attach_edge(model, std::move(layer));
  EnergyRecord e{};
  e.study = study;
  e.split = split;
  e.driver = driver;
  e.participant = participant;
  e.segments = mine.size();
  std::vector<InferenceResult> dense, event;
  dense.reserve(mine.size());
  event.reserve(mine.size());
  {
    std::lock_guard lock(ctx.timing);
    const auto t0 = Clock::now();
    for (const auto& s : mine.segments) dense.push_back(infer_dense(model, s.data));
    e.dense_seconds = seconds_since(t0);
    const auto t1 = Clock::now();
    for (const auto& s : mine.segments) event.push_back(infer_event(model, s.data));
    e.event_seconds = seconds_since(t1);
  }
  std::uint64_t pooled = 0, volume = 0;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i].potentials != event[i].potentials || !(dense[i].trace == event[i].trace)) {
      throw Error("event path disagrees with the dense path on segment " + std::to_string(i));
    }
    e.dense += dense[i].ops.total();
    e.event += event[i].ops.total();
    e.conv2_dense_macs += dense[i].ops.conv2.dense_macs;
    e.conv2_event_accumulates += event[i].ops.conv2.event_accumulates;
    pooled += event[i].trace.pool1.count();
    volume += event[i].trace.pool1.volume();
  }
  e.conv2_input_density = volume == 0 ? 0.0 : static_cast<double>(pooled) / static_cast<double>(volume);
  e.dense_energy = energy_proxy(e.dense, cfg.cost).proxy_energy;
  e.event_energy = energy_proxy(e.event, cfg.cost).proxy_energy;
  out.energy.push_back(e);
}

TaskOutput run_task(const TaskContext& ctx, Study study, std::size_t split, const ParticipantSplit& ids,
                    const LabeledDataset& data) {
  const RunConfig& cfg = ctx.config;
  const std::uint64_t task_seed = derive_seed(cfg.seed, {kTaskStream, split});
  const std::string tag = std::string(study_name(study)) + " split " + std::to_string(split);
  TaskOutput out;

  const LabeledDataset group = select_participants(data, ids.group);
  const std::vector<int> labels = group.labels();
  const std::vector<Int8Matrix> inputs = group.inputs();
  const auto weights = compute_class_weights(labels);
  std::vector<Example> examples;
  examples.reserve(group.size());
  for (const auto& s : group.segments) examples.push_back({input_tensor(s.data), s.label});

  TrainConfig tc = cfg.stage1;
  tc.seed = derive_seed(task_seed, {kStage1});
  tc.class_weights = {weights[0], weights[1]};
  CnnModel init = make_cnn(group.channels.size(), group.width(), derive_seed(task_seed, {kInit}));
  const Stage1Result s1 = fit_stage1(std::move(init), examples, tc);
  out.stages.push_back({study, split, "stage-1",
                        record_predictions(out.predictions, study, split, "group", "stage-1",
                                           predict(s1.best, examples), labels),
                        s1.best_epoch});
  if (ctx.progress) ctx.progress(tag + ": stage-1 accuracy " + std::to_string(out.stages.back().metrics.accuracy));

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(task_seed, {kCalibration}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Int8Matrix> calibration;
  for (std::size_t i = 0; i < std::min(cfg.calibration_samples, order.size()); ++i) calibration.push_back(inputs[order[i]]);
  const QuantizedCnn naive = quantize_cnn(s1.best, calibration, cfg.calibration_percentile);
  out.stages.push_back({study, split, "stage-2-pre-qat",
                        record_predictions(out.predictions, study, split, "group", "stage-2-pre-qat",
                                           quantized_predict(naive, inputs), labels),
                        0});

  QatConfig qc = cfg.qat;
  qc.seed = derive_seed(task_seed, {kQat});
  qc.class_weights = {weights[0], weights[1]};
  const QatResult qr = qat_retrain(naive, inputs, labels, qc);
  out.stages.push_back({study, split, "stage-2",
                        record_predictions(out.predictions, study, split, "group", "stage-2",
                                           quantized_predict(qr.model, inputs), labels),
                        qr.epochs_trained});
  if (ctx.progress) {
    ctx.progress(tag + ": quantized accuracy " + std::to_string(out.stages[1].metrics.accuracy) + " -> " +
                 std::to_string(out.stages.back().metrics.accuracy) + " after " + std::to_string(qr.epochs_trained) +
                 " QAT epochs");
  }

  for (std::size_t d = 0; d < ids.individual.size(); ++d) {
    run_driver(ctx, study, split, d, ids.individual[d], data, qr.model, task_seed, out);
    if (ctx.progress) {
      const auto& c = out.curves;
      const auto it = std::find_if(c.rbegin(), c.rend(), [&](const CurveRecord& r) {
        return r.epoch == std::min<std::size_t>(3, cfg.edge.epochs);
      });
      ctx.progress(tag + ": driver " + std::to_string(ids.individual[d]) + " epoch-3 accuracy " +
                   std::to_string(it->metrics.accuracy));
    }
  }
  return out;
}

}  // namespace

RunBundle full_run(const RunConfig& config, const ProgressFn& progress) {
  config.validate();
#if defined(__GLIBC__)
  // Training allocates multi-megabyte temporaries per example; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const auto t0 = Clock::now();
  const ExperimentKind kind = kind_from_experiment(config.experiment);
  const auto data = prepare_data(config);
  std::vector<int> ids(config.generator.participants);
  std::iota(ids.begin(), ids.end(), 0);
  const auto splits = split_participants(ids, derive_seed(config.seed, {kSplitStream}), config.repeats);

  struct Task {
    Study study;
    std::size_t split;
  };
  std::vector<Task> tasks;
  for (auto s : config.studies) {
    for (std::size_t i = 0; i < splits.size(); ++i) tasks.push_back({s, i});
  }
  std::vector<TaskOutput> outputs(tasks.size());
  RunBundle bundle;
  bundle.splits.resize(tasks.size());

  std::mutex timing, log;
  ProgressFn safe_progress;
  if (progress) {
    safe_progress = [&](const std::string& msg) {
      std::lock_guard lock(log);
      progress(msg);
    };
  }
  const TaskContext ctx{config, kind, timing, safe_progress};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto [study, split] = tasks[i];
      SplitStatus& st = bundle.splits[i];
      st.study = study;
      st.split = split;
      st.group = splits[split].group;
      st.individual = splits[split].individual;
      const auto ts = Clock::now();
      try {
        outputs[i] = run_task(ctx, study, split, splits[split], data.at(study));
        st.complete = true;
      } catch (const std::exception& e) {
        st.error = e.what();
        outputs[i] = TaskOutput{};
        if (safe_progress) {
          safe_progress(std::string(study_name(study)) + " split " + std::to_string(split) + " aborted: " + e.what());
        }
      }
      st.seconds = seconds_since(ts);
    }
  };
  std::size_t threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = std::min(threads, tasks.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (auto& o : outputs) {
    bundle.stages.insert(bundle.stages.end(), o.stages.begin(), o.stages.end());
    bundle.curves.insert(bundle.curves.end(), o.curves.begin(), o.curves.end());
    bundle.energy.insert(bundle.energy.end(), o.energy.begin(), o.energy.end());
    bundle.predictions.insert(bundle.predictions.end(), o.predictions.begin(), o.predictions.end());
  }
  bundle.seconds = seconds_since(t0);
  return bundle;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(10);
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(10) << *v;
  return os.str();
}

void write_counts(std::ostream& os, const MetricsReport& m) {
  os << m.tp << ',' << m.tn << ',' << m.fp << ',' << m.fn << ',' << m.accuracy << ',' << opt(m.tpr) << ','
     << opt(m.tnr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("CSV lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing bundle file " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty bundle file " + path.string());
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) throw IoError("malformed row in " + path.string() + ": " + line);
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::uint64_t to_u64(const std::string& s) { return std::stoull(s); }
double to_double(const std::string& s) { return std::stod(s); }

MetricsReport counts_from(const CsvTable& t, const std::vector<std::string>& row) {
  return metrics_from_counts(to_u64(row[t.col("tp")]), to_u64(row[t.col("tn")]), to_u64(row[t.col("fp")]),
                             to_u64(row[t.col("fn")]));
}

}  // namespace

void write_bundle(const fs::path& dir, const RunBundle& bundle, const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  {
    const fs::path p = dir / "stage_metrics.csv";
    auto os = open_out(p);
    os << "study,split,stage,epochs,tp,tn,fp,fn,accuracy,tpr,tnr\n";
    for (const auto& r : bundle.stages) {
      os << study_name(r.study) << ',' << r.split << ',' << r.stage << ',' << r.epochs << ',';
      write_counts(os, r.metrics);
      os << '\n';
    }
    close_out(os, p);
  }
  {
    const fs::path p = dir / "curves.csv";
    auto os = open_out(p);
    os << "study,split,driver,participant,num_weights,epoch,tp,tn,fp,fn,accuracy,tpr,tnr\n";
    for (const auto& r : bundle.curves) {
      os << study_name(r.study) << ',' << r.split << ',' << r.driver << ',' << r.participant << ',' << r.num_weights
         << ',' << r.epoch << ',';
      write_counts(os, r.metrics);
      os << '\n';
    }
    close_out(os, p);
  }
  {
    const fs::path p = dir / "energy.csv";
    auto os = open_out(p);
    os << "study,split,driver,participant,segments,dense_macs,dense_accumulates,dense_fetches,event_macs,"
          "event_accumulates,event_fetches,dense_energy,event_energy,conv2_input_density,conv2_dense_macs,"
          "conv2_event_accumulates\n";
    for (const auto& r : bundle.energy) {
      os << study_name(r.study) << ',' << r.split << ',' << r.driver << ',' << r.participant << ',' << r.segments
         << ',' << r.dense.dense_macs << ',' << r.dense.event_accumulates << ',' << r.dense.weight_fetches << ','
         << r.event.dense_macs << ',' << r.event.event_accumulates << ',' << r.event.weight_fetches << ','
         << r.dense_energy << ',' << r.event_energy << ',' << r.conv2_input_density << ',' << r.conv2_dense_macs
         << ',' << r.conv2_event_accumulates << '\n';
    }
    close_out(os, p);
  }
  {
    // Wall-clock values vary run to run, so they live apart from the
    // deterministic tables.
    const fs::path p = dir / "latency.csv";
    auto os = open_out(p);
    os << "study,split,driver,participant,segments,dense_seconds,event_seconds\n";
    for (const auto& r : bundle.energy) {
      os << study_name(r.study) << ',' << r.split << ',' << r.driver << ',' << r.participant << ',' << r.segments
         << ',' << r.dense_seconds << ',' << r.event_seconds << '\n';
    }
    close_out(os, p);
  }
  {
    const fs::path p = dir / "predictions.csv";
    auto os = open_out(p);
    os << "study,split,scope,stage,index,label,prediction\n";
    for (const auto& r : bundle.predictions) {
      os << study_name(r.study) << ',' << r.split << ',' << r.scope << ',' << r.stage << ',' << r.index << ','
         << r.label << ',' << r.prediction << '\n';
    }
    close_out(os, p);
  }
  {
    json m;
    m["config"] = json::parse(run_config_to_json(config));
    m["generator_seed"] = seeded_generator(config).seed;
    m["seconds"] = bundle.seconds;
    m["splits"] = json::array();
    for (const auto& s : bundle.splits) {
      m["splits"].push_back({{"study", std::string(study_name(s.study))},
                             {"split", s.split},
                             {"group", s.group},
                             {"individual", s.individual},
                             {"complete", s.complete},
                             {"error", s.error},
                             {"seconds", s.seconds}});
    }
    const fs::path p = dir / "run_manifest.json";
    auto os = open_out(p);
    os << m.dump(2) << '\n';
    close_out(os, p);
  }
}

RunBundle read_bundle(const fs::path& dir) {
  RunBundle b;
  try {
    const CsvTable st = read_csv(dir / "stage_metrics.csv");
    for (const auto& r : st.rows) {
      b.stages.push_back({parse_study(r[st.col("study")]), to_u64(r[st.col("split")]), r[st.col("stage")],
                          counts_from(st, r), to_u64(r[st.col("epochs")])});
    }
    const CsvTable cv = read_csv(dir / "curves.csv");
    for (const auto& r : cv.rows) {
      b.curves.push_back({parse_study(r[cv.col("study")]), to_u64(r[cv.col("split")]), to_u64(r[cv.col("driver")]),
                          std::stoi(r[cv.col("participant")]), to_u64(r[cv.col("num_weights")]),
                          to_u64(r[cv.col("epoch")]), counts_from(cv, r)});
    }
    const CsvTable en = read_csv(dir / "energy.csv");
    const CsvTable lat = read_csv(dir / "latency.csv");
    if (lat.rows.size() != en.rows.size()) throw IoError("latency.csv and energy.csv disagree in length");
    for (std::size_t i = 0; i < en.rows.size(); ++i) {
      const auto& r = en.rows[i];
      EnergyRecord e;
      e.study = parse_study(r[en.col("study")]);
      e.split = to_u64(r[en.col("split")]);
      e.driver = to_u64(r[en.col("driver")]);
      e.participant = std::stoi(r[en.col("participant")]);
      e.segments = to_u64(r[en.col("segments")]);
      e.dense = {to_u64(r[en.col("dense_macs")]), to_u64(r[en.col("dense_accumulates")]),
                 to_u64(r[en.col("dense_fetches")])};
      e.event = {to_u64(r[en.col("event_macs")]), to_u64(r[en.col("event_accumulates")]),
                 to_u64(r[en.col("event_fetches")])};
      e.dense_energy = to_double(r[en.col("dense_energy")]);
      e.event_energy = to_double(r[en.col("event_energy")]);
      e.conv2_input_density = to_double(r[en.col("conv2_input_density")]);
      e.conv2_dense_macs = to_u64(r[en.col("conv2_dense_macs")]);
      e.conv2_event_accumulates = to_u64(r[en.col("conv2_event_accumulates")]);
      e.dense_seconds = to_double(lat.rows[i][lat.col("dense_seconds")]);
      e.event_seconds = to_double(lat.rows[i][lat.col("event_seconds")]);
      b.energy.push_back(e);
    }
    // Split status and timings live only in the manifest.
    const fs::path mp = dir / "run_manifest.json";
    std::ifstream in(mp);
    if (!in) throw IoError("cannot open " + mp.string());
    try {
      const json m = json::parse(in);
      b.seconds = m.at("seconds").get<double>();
      for (const auto& s : m.at("splits")) {
        SplitStatus st;
        st.study = parse_study(s.at("study").get<std::string>());
        st.split = s.at("split").get<std::size_t>();
        st.group = s.at("group").get<std::vector<int>>();
        st.individual = s.at("individual").get<std::vector<int>>();
        st.complete = s.at("complete").get<bool>();
        st.error = s.at("error").get<std::string>();
        st.seconds = s.at("seconds").get<double>();
        b.splits.push_back(std::move(st));
      }
    } catch (const json::exception& e) {
      throw IoError(mp.string() + ": " + e.what());
    }
  } catch (const std::invalid_argument&) {
    throw IoError("non-numeric value in bundle " + dir.string());
  } catch (const std::out_of_range&) {
    throw IoError("numeric value out of range in bundle " + dir.string());
  }
  return b;
}

namespace {

std::optional<double> metric_value(const MetricsReport& m, const std::string& metric) {
  if (metric == "accuracy") return m.accuracy;
  if (metric == "tpr") return m.tpr;
  return m.tnr;
}

std::vector<Study> studies_in(const RunBundle& b) {
  std::set<Study> s;
  for (const auto& r : b.stages) s.insert(r.study);
  for (const auto& r : b.curves) s.insert(r.study);
  return {s.begin(), s.end()};
}

std::optional<double> compare(const std::map<Study, std::vector<double>>& values) {
  const auto a = values.find(Study::Acs), f = values.find(Study::Fcas);
  if (a == values.end() || f == values.end() || a->second.size() < 2 || f->second.size() < 2) return std::nullopt;
  try {
    return welch_t_test(a->second, f->second).p_value;
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

}  // namespace

Report make_report(const RunBundle& bundle, std::span<const std::size_t> checkpoints) {
  static const std::vector<std::size_t> kDefaultCheckpoints{3, 5, 7};
  if (checkpoints.empty()) checkpoints = kDefaultCheckpoints;
  static const std::array<std::string, 3> kMetrics{"accuracy", "tpr", "tnr"};
  const auto studies = studies_in(bundle);
  Report rep;

  // Row label -> the metric reports it aggregates for one study.
  using Collector = std::function<std::vector<MetricsReport>(Study)>;
  std::vector<std::pair<std::string, Collector>> stages;
  for (const std::string stage : {"stage-1", "stage-2"}) {
    stages.emplace_back(stage, [&bundle, stage](Study s) {
      std::vector<MetricsReport> out;
      for (const auto& r : bundle.stages) {
        if (r.study == s && r.stage == stage) out.push_back(r.metrics);
      }
      return out;
    });
  }
  for (auto epoch : checkpoints) {
    stages.emplace_back("epoch-" + std::to_string(epoch), [&bundle, epoch](Study s) {
      std::vector<MetricsReport> out;
      for (const auto& r : bundle.curves) {
        if (r.study == s && r.epoch == epoch) out.push_back(r.metrics);
      }
      return out;
    });
  }
  for (const auto& [stage, collect] : stages) {
    for (const auto& metric : kMetrics) {
      std::map<Study, std::vector<double>> values;
      for (auto s : studies) {
        for (const auto& m : collect(s)) {
          if (auto v = metric_value(m, metric)) values[s].push_back(*v);
        }
      }
      const auto p = compare(values);
      for (auto s : studies) {
        const auto it = values.find(s);
        if (it == values.end() || it->second.empty()) continue;
        const Aggregate a = aggregate(it->second);
        rep.metrics.push_back({stage, std::string(study_name(s)), metric, a.mean, a.sd, p});
      }
    }
  }

  for (auto s : studies) {
    std::vector<double> de, ee, ds, es;
    for (const auto& r : bundle.energy) {
      if (r.study != s) continue;
      de.push_back(r.dense_energy);
      ee.push_back(r.event_energy);
      ds.push_back(r.dense_seconds);
      es.push_back(r.event_seconds);
    }
    if (de.empty()) continue;
    const std::string study(study_name(s));
    const Aggregate ade = aggregate(de), aee = aggregate(ee), ads = aggregate(ds), aes = aggregate(es);
    rep.energy.push_back({"inference", study, "dense_energy", ade.mean, ade.sd, std::nullopt});
    rep.energy.push_back({"inference", study, "csnn_energy", aee.mean, aee.sd, std::nullopt});
    rep.energy.push_back(
        {"inference", study, "percent_reduction", percent_reduction(ade.mean, aee.mean), std::nullopt, std::nullopt});
    rep.energy.push_back({"inference", study, "dense_seconds", ads.mean, ads.sd, std::nullopt});
    rep.energy.push_back({"inference", study, "csnn_seconds", aes.mean, aes.sd, std::nullopt});
    if (ads.mean > 0.0) {
      rep.energy.push_back(
          {"inference", study, "latency_ratio", latency_ratio(aes.mean, ads.mean), std::nullopt, std::nullopt});
    }
  }

  std::map<std::tuple<Study, std::size_t, std::string>, std::vector<double>> curve;
  for (const auto& r : bundle.curves) {
    for (const auto& metric : kMetrics) {
      if (auto v = metric_value(r.metrics, metric)) curve[{r.study, r.epoch, metric}].push_back(*v);
    }
  }
  for (const auto& [key, values] : curve) {
    const auto& [study, epoch, metric] = key;
    const Aggregate a = aggregate(values);
    rep.curves.push_back({std::string(study_name(study)), epoch, metric, a.mean, a.sd, a.n});
  }
  return rep;
}

void write_report(const fs::path& dir, const Report& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  {
    const fs::path p = dir / "table_metrics.csv";
    auto os = open_out(p);
    write_table_csv(os, report.metrics);
    close_out(os, p);
  }
  {
    const fs::path p = dir / "table_energy.csv";
    auto os = open_out(p);
    write_table_csv(os, report.energy);
    close_out(os, p);
  }
  {
    const fs::path p = dir / "figure_curves.csv";
    auto os = open_out(p);
    os << "study,epoch,metric,mean,sd,n\n";
    for (const auto& c : report.curves) {
      os << c.study << ',' << c.epoch << ',' << c.metric << ',' << c.mean << ',' << c.sd << ',' << c.n << '\n';
    }
    close_out(os, p);
  }
}

void generate_archives(const RunConfig& config, const fs::path& dir) {
  config.generator.validate();
  const GeneratorConfig gen = seeded_generator(config);
  for (auto kind : {ExperimentKind::CountdownNominal, ExperimentKind::CountdownStressed, ExperimentKind::Stoplight}) {
    for (std::size_t p = 0; p < gen.participants; ++p) {
      const int id = static_cast<int>(p);
      const auto trials = generate_participant(gen, id, kind);
      DatasetArchive a;
      a.kind = kind;
      a.generator = gen;
      a.splits.emplace("segments", build_dataset(trials).dataset);
      write_dataset_archive(dir / std::string(kind_name(kind)) / participant_dir(id), a);
    }
  }
}

}  // namespace spikeadapt
