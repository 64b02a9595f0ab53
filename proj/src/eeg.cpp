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

#include "spikeadapt/eeg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "spikeadapt/error.hpp"
#include "spikeadapt/quantization.hpp"
#include "spikeadapt/random.hpp"

namespace spikeadapt {

namespace {

constexpr std::uint64_t kProfileStream = 0xEE6;
constexpr std::uint64_t kTrialStream = 0x7A1;
constexpr std::size_t kLead = 250;
constexpr std::size_t kTail = 250;
constexpr std::size_t kYellowToRed = 800;
constexpr double kAlphaHz = 10.0;

std::size_t ms_to_samples(double ms) { return static_cast<std::size_t>(std::llround(ms * kSampleRate / 1000.0)); }

std::size_t find_marker(const TrialRecording& t, std::string_view label, std::size_t from = 0) {
  for (std::size_t i = from; i < t.markers.size(); ++i) {
    if (t.markers[i].label == label) return i;
  }
  throw ValidationError("trial " + std::to_string(t.participant) + "/" + std::to_string(t.trial) +
                        " rejected: missing marker '" + std::string(label) + "'");
}

Segment cut(const TrialRecording& t, std::size_t begin, std::size_t end, int label) {
  if (end > t.signals.cols || begin >= end) {
    throw ValidationError("trial " + std::to_string(t.participant) + "/" + std::to_string(t.trial) +
                          " rejected: window [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") outside recording");
  }
  FloatMatrix window(t.signals.rows, end - begin);
  for (std::size_t r = 0; r < t.signals.rows; ++r) {
    for (std::size_t c = begin; c < end; ++c) window(r, c - begin) = t.signals(r, c);
  }
  Segment s;
  s.data = quantize_data(window);
  s.label = label;
  s.participant = t.participant;
  s.trial = t.trial;
  return s;
}

struct TrialSynth {
  const GeneratorConfig& config;
  const ParticipantProfile& profile;
  Rng rng;
  double noise_sigma;
  double amplitude;

  void background(FloatMatrix& x) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double drift_sd = config.drift_sigma_uv * noise_sigma / config.noise_sigma_uv;
    const std::vector<double> common = ar1(x.cols, drift_sd * std::sqrt(config.drift_shared));
    const double own_sd = drift_sd * std::sqrt(1.0 - config.drift_shared);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double phi = phase(rng);
      const std::vector<double> own = ar1(x.cols, own_sd);
      for (std::size_t c = 0; c < x.cols; ++c) {
        x(r, c) = noise(rng) + common[c] + own[c] +
                  config.alpha_amplitude_uv * std::sin(2.0 * std::numbers::pi * kAlphaHz * c / kSampleRate + phi);
      }
    }
  }

  // Stationary AR(1) series with standard deviation `sd`.
  std::vector<double> ar1(std::size_t n, double sd) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double a = config.drift_tau_ms > 0.0 ? std::exp(-1000.0 / (config.drift_tau_ms * kSampleRate)) : 0.0;
    const double innovation = sd * std::sqrt(1.0 - a * a);
    std::vector<double> v(n);
    double d = sd * unit(rng);
    for (auto& e : v) {
      e = d;
      d = a * d + innovation * unit(rng);
    }
    return v;
  }

  // Ramp from 0 at `onset` down to -depth at `peak`, held until `release`.
  void cnv(FloatMatrix& x, std::size_t onset, std::size_t peak, std::size_t release, double depth) {
    const auto& names = montage();
    onset = std::min(onset, peak);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double w = cnv_weight(names[r]) * profile.channel_gain[r] * depth;
      if (w == 0.0) continue;
      for (std::size_t c = onset; c < release && c < x.cols; ++c) {
        const double frac = c < peak ? static_cast<double>(c - onset) / static_cast<double>(peak - onset) : 1.0;
        x(r, c) -= w * frac;
      }
    }
  }

  std::size_t jittered_onset(std::size_t window_start) {
    std::normal_distribution<double> jitter(0.0, config.onset_jitter_ms);
    const double ms = std::max(0.0, profile.latency_ms + jitter(rng));
    return window_start + ms_to_samples(ms);
  }
};

TrialRecording countdown_trial(TrialSynth& s, int participant, std::uint32_t trial, ExperimentKind kind) {
  std::uniform_int_distribution<std::size_t> gap(460, 540);
  std::array<std::size_t, 6> at{};
  at[0] = kLead;
  for (std::size_t i = 1; i < at.size(); ++i) at[i] = at[i - 1] + gap(s.rng);
  TrialRecording t;
  t.participant = participant;
  t.trial = trial;
  t.kind = kind;
  t.channels = montage();
  t.signals = FloatMatrix(t.channels.size(), at.back() + kTail);
  static const std::array<const char*, 6> labels{"5", "4", "3", "2", "1", "stop"};
  for (std::size_t i = 0; i < at.size(); ++i) t.markers.push_back({at[i], labels[i]});
  s.background(t.signals);
  s.cnv(t.signals, s.jittered_onset(at[4]), at[5], at[5] + 50, s.amplitude);
  return t;
}

TrialRecording stoplight_trial(TrialSynth& s, int participant, std::uint32_t trial) {
  std::uniform_int_distribution<std::size_t> spacing(200, 400);
  std::uniform_int_distribution<std::size_t> reaction(150, 300);
  std::bernoulli_distribution stop_first(0.5);
  const bool first = stop_first(s.rng);
  const std::size_t y1 = kLead;
  const std::size_t y2 = y1 + kStoplightWidth + spacing(s.rng);
  TrialRecording t;
  t.participant = participant;
  t.trial = trial;
  t.kind = ExperimentKind::Stoplight;
  t.channels = montage();
  t.signals = FloatMatrix(t.channels.size(), y2 + kStoplightWidth + kTail);
  s.background(t.signals);
  for (std::size_t y : {y1, y2}) {
    t.markers.push_back({y, "yellow"});
    t.markers.push_back({y + kYellowToRed, "red"});
    if ((y == y1) == first) {
      t.markers.push_back({y + kYellowToRed + reaction(s.rng), "brake"});
      s.cnv(t.signals, s.jittered_onset(y), y + kYellowToRed, y + kStoplightWidth, s.amplitude);
    }
  }
  return t;
}

}  // namespace

const std::vector<std::string>& montage() {
  static const std::vector<std::string> names{"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7", "C3", "Cz",
                                              "C4",  "T8",  "P7", "P3", "Pz", "P4", "P8", "O1", "O2"};
  return names;
}

std::string_view kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::CountdownNominal: return "countdown-nominal";
    case ExperimentKind::CountdownStressed: return "countdown-stressed";
    case ExperimentKind::Stoplight: return "stoplight";
  }
  return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
  for (auto k : {ExperimentKind::CountdownNominal, ExperimentKind::CountdownStressed, ExperimentKind::Stoplight}) {
    if (kind_name(k) == name) return k;
  }
  throw ValidationError("unknown experiment kind '" + std::string(name) + "'");
}

ExperimentKind kind_from_experiment(int experiment) {
  switch (experiment) {
    case 1: return ExperimentKind::CountdownNominal;
    case 2: return ExperimentKind::CountdownStressed;
    case 3: return ExperimentKind::Stoplight;
    default: throw ValidationError("experiment must be 1, 2 or 3, got " + std::to_string(experiment));
  }
}

std::size_t segment_width(ExperimentKind kind) {
  return kind == ExperimentKind::Stoplight ? kStoplightWidth : kCountdownWidth;
}

void TrialRecording::validate() const {
  if (channels.size() != signals.rows) throw ValidationError("trial channel names do not match signal rows");
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (markers[i].sample >= signals.cols) throw ValidationError("marker beyond end of recording");
    if (i > 0 && markers[i].sample <= markers[i - 1].sample) {
      throw ValidationError("markers not strictly increasing at '" + markers[i].label + "'");
    }
  }
}

std::size_t GeneratorConfig::trials_for(ExperimentKind kind) const {
  switch (kind) {
    case ExperimentKind::CountdownNominal: return countdown_trials;
    case ExperimentKind::CountdownStressed: return stressed_trials;
    case ExperimentKind::Stoplight: return stoplight_trials;
  }
  return 0;
}

void GeneratorConfig::validate() const {
  if (participants == 0 || countdown_trials == 0 || stressed_trials == 0 || stoplight_trials == 0) {
    throw ValidationError("generator counts must be positive");
  }
  if (!(noise_sigma_uv > 0.0)) throw ValidationError("noise_sigma_uv must be positive");
  if (!(amplitude_min_uv >= 0.0 && amplitude_min_uv <= amplitude_max_uv)) {
    throw ValidationError("need 0 <= amplitude_min_uv <= amplitude_max_uv");
  }
  if (!(onset_jitter_ms >= 0.0) || !(alpha_amplitude_uv >= 0.0) || !(drift_sigma_uv >= 0.0) ||
      !(drift_tau_ms >= 0.0) || !(drift_shared >= 0.0 && drift_shared <= 1.0)) {
    throw ValidationError("jitter, alpha and drift parameters must be nonnegative");
  }
  if (!(stress_multiplier >= 1.0)) throw ValidationError("stress_multiplier must be >= 1");
}

double cnv_weight(std::string_view channel) {
  if (channel == "Cz") return 1.0;
  if (channel == "C3" || channel == "C4") return 0.8;
  if (channel == "Pz" || channel == "Fz") return 0.7;
  if (channel == "F3" || channel == "F4" || channel == "P3" || channel == "P4") return 0.6;
  if (channel == "O1" || channel == "O2") return 0.3;
  return 0.4;
}

ParticipantProfile participant_profile(const GeneratorConfig& config, int participant) {
  Rng rng(derive_seed(config.seed, {kProfileStream, static_cast<std::uint64_t>(participant)}));
  std::uniform_real_distribution<double> amp(config.amplitude_min_uv, config.amplitude_max_uv);
  std::uniform_real_distribution<double> latency(100.0, 300.0);
  std::uniform_real_distribution<double> gain(0.7, 1.3);
  std::uniform_real_distribution<double> noise(0.85, 1.15);
  ParticipantProfile p;
  p.amplitude_uv = amp(rng);
  p.latency_ms = latency(rng);
  p.channel_gain.resize(montage().size());
  for (auto& g : p.channel_gain) g = gain(rng);
  p.noise_scale = noise(rng);
  return p;
}

std::vector<TrialRecording> generate_participant(const GeneratorConfig& config, int participant,
                                                 ExperimentKind kind) {
  config.validate();
  const ParticipantProfile profile = participant_profile(config, participant);
  const bool stressed = kind == ExperimentKind::CountdownStressed;
  const double sigma = config.noise_sigma_uv * profile.noise_scale * (stressed ? std::sqrt(config.stress_multiplier) : 1.0);
  const double depth = profile.amplitude_uv * (stressed ? config.stress_multiplier : 1.0);
  std::vector<TrialRecording> trials;
  const std::size_t n = config.trials_for(kind);
  trials.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TrialSynth s{config, profile,
                 Rng(derive_seed(config.seed, {kTrialStream, static_cast<std::uint64_t>(kind),
                                               static_cast<std::uint64_t>(participant), i})),
                 sigma, depth};
    const auto id = static_cast<std::uint32_t>(i);
    trials.push_back(kind == ExperimentKind::Stoplight ? stoplight_trial(s, participant, id)
                                                       : countdown_trial(s, participant, id, kind));
  }
  return trials;
}

Segment pad_segment(Segment segment, std::size_t width) {
  const Int8Matrix& d = segment.data;
  if (d.cols > width) {
    throw ValidationError("segment of width " + std::to_string(d.cols) + " exceeds padded width " +
                          std::to_string(width));
  }
  if (d.cols == width) return segment;
  Int8Matrix out(d.rows, width);
  for (std::size_t r = 0; r < d.rows; ++r) std::copy(d.row(r).begin(), d.row(r).end(), out.row(r).begin());
  segment.data = std::move(out);
  return segment;
}

std::vector<Segment> segment_countdown(const TrialRecording& trial) {
  static const std::array<const char*, 6> order{"5", "4", "3", "2", "1", "stop"};
  std::array<std::size_t, 6> at{};
  std::size_t from = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t m = find_marker(trial, order[i], from);
    at[i] = trial.markers[m].sample;
    from = m + 1;
  }
  std::vector<Segment> out;
  for (std::size_t i = 0; i + 1 < at.size(); ++i) {
    out.push_back(pad_segment(cut(trial, at[i], at[i + 1], i + 2 == at.size() ? 1 : 0), kCountdownWidth));
  }
  return out;
}

std::vector<Segment> segment_stoplight(const TrialRecording& trial) {
  std::vector<std::size_t> yellows;
  for (std::size_t i = 0; i < trial.markers.size(); ++i) {
    if (trial.markers[i].label == "yellow") yellows.push_back(i);
  }
  if (yellows.size() != 2) {
    throw ValidationError("trial " + std::to_string(trial.participant) + "/" + std::to_string(trial.trial) +
                          " rejected: expected two yellow markers, found " + std::to_string(yellows.size()));
  }
  std::vector<Segment> out;
  int positives = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    const std::size_t end = k + 1 < yellows.size() ? yellows[k + 1] : trial.markers.size();
    bool red = false, brake = false;
    for (std::size_t i = yellows[k] + 1; i < end; ++i) {
      red = red || trial.markers[i].label == "red";
      brake = brake || (red && trial.markers[i].label == "brake");
    }
    if (!red) {
      throw ValidationError("trial " + std::to_string(trial.participant) + "/" + std::to_string(trial.trial) +
                            " rejected: yellow light without red");
    }
    positives += brake ? 1 : 0;
    const std::size_t y = trial.markers[yellows[k]].sample;
    out.push_back(cut(trial, y, y + kStoplightWidth, brake ? 1 : 0));
  }
  if (positives != 1) {
    throw ValidationError("trial " + std::to_string(trial.participant) + "/" + std::to_string(trial.trial) +
                          " rejected: need exactly one braking light pair");
  }
  return out;
}

std::vector<Segment> segment_trial(const TrialRecording& trial) {
  return trial.kind == ExperimentKind::Stoplight ? segment_stoplight(trial) : segment_countdown(trial);
}

ChannelSet ChannelSet::all() { return ChannelSet{montage()}; }

ChannelSet ChannelSet::fcas() { return ChannelSet{{"Cz", "Pz", "C3", "C4", "Fz"}}; }

std::vector<std::size_t> ChannelSet::rows_in(const std::vector<std::string>& available) const {
  if (names.empty()) throw ValidationError("channel set is empty");
  const auto& known = montage();
  for (const auto& n : names) {
    if (std::find(known.begin(), known.end(), n) == known.end()) {
      throw ValidationError("unknown channel '" + n + "'");
    }
    if (std::find(available.begin(), available.end(), n) == available.end()) {
      throw ValidationError("channel '" + n + "' not present in data");
    }
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < available.size(); ++r) {
    if (std::find(names.begin(), names.end(), available[r]) != names.end()) rows.push_back(r);
  }
  return rows;
}

std::size_t LabeledDataset::width() const { return segments.empty() ? 0 : segments.front().data.cols; }

std::vector<Int8Matrix> LabeledDataset::inputs() const {
  std::vector<Int8Matrix> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.data);
  return out;
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.label);
  return out;
}

std::size_t LabeledDataset::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(segments.begin(), segments.end(), [&](const Segment& s) { return s.label == label; }));
}

void LabeledDataset::validate() const {
  for (const auto& s : segments) {
    if (s.data.rows != channels.size()) throw ValidationError("segment rows differ from dataset channels");
    if (s.data.cols != width()) throw ValidationError("dataset segments differ in width");
    if (s.label != 0 && s.label != 1) throw ValidationError("segment label outside {0, 1}");
  }
}

namespace {

std::vector<int> participants_of(const std::vector<Segment>& segments) {
  std::set<int> ids;
  for (const auto& s : segments) ids.insert(s.participant);
  return {ids.begin(), ids.end()};
}

}  // namespace

SegmentationReport build_dataset(std::span<const TrialRecording> trials) {
  SegmentationReport report;
  for (const auto& t : trials) {
    if (report.dataset.channels.empty()) report.dataset.channels = t.channels;
    if (t.channels != report.dataset.channels) throw ValidationError("trials use different channel sets");
    try {
      t.validate();
      for (auto& s : segment_trial(t)) report.dataset.segments.push_back(std::move(s));
    } catch (const ValidationError& e) {
      report.rejections.emplace_back(e.what());
    }
  }
  report.dataset.participants = participants_of(report.dataset.segments);
  return report;
}

LabeledDataset merge(std::span<const LabeledDataset> parts) {
  LabeledDataset out;
  for (const auto& p : parts) {
    if (p.segments.empty()) continue;
    if (out.channels.empty()) out.channels = p.channels;
    if (p.channels != out.channels) throw ValidationError("cannot merge datasets with different channels");
    out.segments.insert(out.segments.end(), p.segments.begin(), p.segments.end());
  }
  out.participants = participants_of(out.segments);
  out.validate();
  return out;
}

LabeledDataset select_participants(const LabeledDataset& data, std::span<const int> ids) {
  LabeledDataset out;
  out.channels = data.channels;
  for (const auto& s : data.segments) {
    if (std::find(ids.begin(), ids.end(), s.participant) != ids.end()) out.segments.push_back(s);
  }
  out.participants = participants_of(out.segments);
  return out;
}

TrialRecording select_channels(const TrialRecording& trial, const ChannelSet& set) {
  const auto rows = set.rows_in(trial.channels);
  TrialRecording out = trial;
  out.channels.clear();
  out.signals = FloatMatrix(rows.size(), trial.signals.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.channels.push_back(trial.channels[rows[i]]);
    std::copy(trial.signals.row(rows[i]).begin(), trial.signals.row(rows[i]).end(), out.signals.row(i).begin());
  }
  return out;
}

LabeledDataset select_channels(const LabeledDataset& data, const ChannelSet& set) {
  const auto rows = set.rows_in(data.channels);
  LabeledDataset out;
  out.participants = data.participants;
  for (auto r : rows) out.channels.push_back(data.channels[r]);
  out.segments.reserve(data.segments.size());
  for (const auto& s : data.segments) {
    Segment t = s;
    t.data = Int8Matrix(rows.size(), s.data.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(s.data.row(rows[i]).begin(), s.data.row(rows[i]).end(), t.data.row(i).begin());
    }
    out.segments.push_back(std::move(t));
  }
  return out;
}

std::array<double, 2> compute_class_weights(std::span<const int> labels) {
  std::array<std::size_t, 2> n{};
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("class label outside {0, 1}");
    ++n[static_cast<std::size_t>(l)];
  }
  if (n[0] == 0 || n[1] == 0) throw ValidationError("class weights need both classes present");
  const double total = static_cast<double>(labels.size());
  return {total / (2.0 * static_cast<double>(n[0])), total / (2.0 * static_cast<double>(n[1]))};
}

std::array<double, 2> compute_class_weights(const LabeledDataset& data) {
  const auto labels = data.labels();
  return compute_class_weights(labels);
}

LabeledDataset duplicate_positives(const LabeledDataset& data, std::size_t copies) {
  LabeledDataset out = data;
  for (std::size_t c = 0; c < copies; ++c) {
    for (const auto& s : data.segments) {
      if (s.label == 1) out.segments.push_back(s);
    }
  }
  return out;
}

LabeledDataset augment_noise(const LabeledDataset& data, std::size_t copies, std::uint64_t seed) {
  LabeledDataset out = data;
  Rng rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  out.segments.reserve(data.segments.size() * (1 + copies));
  for (const auto& s : data.segments) {
    for (std::size_t c = 0; c < copies; ++c) {
      Segment noisy = s;
      for (auto& v : noisy.data.data) {
        const double x = static_cast<double>(v) + std::round(unit(rng));
        v = static_cast<std::int8_t>(std::clamp(x, -127.0, 127.0));
      }
      out.segments.push_back(std::move(noisy));
    }
  }
  return out;
}

std::vector<ParticipantSplit> split_participants(std::span<const int> ids, std::uint64_t seed, std::size_t repeats) {
  constexpr std::size_t kIds = 11, kIndividual = 3;
  std::vector<int> pool(ids.begin(), ids.end());
  if (pool.size() != kIds) {
    throw ValidationError("split_participants needs exactly 11 participant ids, got " + std::to_string(pool.size()));
  }
  if (std::set<int>(pool.begin(), pool.end()).size() != kIds) throw ValidationError("participant ids must be unique");
  if (repeats == 0) throw ValidationError("split_participants needs at least one repeat");
  const std::size_t covering = (kIds + kIndividual - 1) / kIndividual;
  Rng rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::vector<int>> individual;
  for (std::size_t s = 0; s < covering; ++s) {
    std::vector<int> chosen;
    for (std::size_t k = s * kIndividual; k < std::min(kIds, (s + 1) * kIndividual); ++k) chosen.push_back(pool[k]);
    while (chosen.size() < kIndividual) {
      std::uniform_int_distribution<std::size_t> pick(0, kIds - 1);
      const int id = pool[pick(rng)];
      if (std::find(chosen.begin(), chosen.end(), id) == chosen.end()) chosen.push_back(id);
    }
    individual.push_back(chosen);
  }
  while (individual.size() < repeats) {
    std::vector<int> order = pool;
    std::shuffle(order.begin(), order.end(), rng);
    individual.emplace_back(order.begin(), order.begin() + kIndividual);
  }
  std::shuffle(individual.begin(), individual.end(), rng);
  individual.resize(repeats);

  std::vector<ParticipantSplit> splits;
  for (auto& ind : individual) {
    std::sort(ind.begin(), ind.end());
    ParticipantSplit s;
    s.individual = ind;
    for (int id : ids) {
      if (std::find(ind.begin(), ind.end(), id) == ind.end()) s.group.push_back(id);
    }
    std::sort(s.group.begin(), s.group.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

Holdout holdout_split(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ValidationError("holdout fraction must lie in [0, 1)");
  Rng rng(seed);
  std::vector<char> to_eval(data.segments.size(), 0);
  for (int label : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.segments.size(); ++i) {
      if (data.segments[i].label == label) idx.push_back(i);
    }
    std::size_t n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (fraction > 0.0 && idx.size() >= 2) n = std::clamp<std::size_t>(n, 1, idx.size() - 1);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < n; ++k) to_eval[idx[k]] = 1;
  }
  Holdout h;
  h.train.channels = h.eval.channels = data.channels;
  for (std::size_t i = 0; i < data.segments.size(); ++i) {
    (to_eval[i] ? h.eval : h.train).segments.push_back(data.segments[i]);
  }
  h.train.participants = participants_of(h.train.segments);
  h.eval.participants = participants_of(h.eval.segments);
  return h;
}

Waveform grand_average(std::span<const TrialRecording> trials, std::string_view channel, std::string_view marker) {
  if (trials.empty()) throw ValidationError("grand_average needs at least one trial");
  std::vector<std::pair<std::size_t, std::size_t>> anchors;  // (row, marker sample)
  std::size_t before = SIZE_MAX, after = SIZE_MAX;
  for (const auto& t : trials) {
    const auto it = std::find(t.channels.begin(), t.channels.end(), channel);
    if (it == t.channels.end()) throw ValidationError("trial lacks channel '" + std::string(channel) + "'");
    const std::size_t at = t.markers[find_marker(t, marker)].sample;
    anchors.emplace_back(static_cast<std::size_t>(it - t.channels.begin()), at);
    before = std::min(before, at);
    after = std::min(after, t.signals.cols - at);
  }
  Waveform w;
  w.marker_index = before;
  w.values.assign(before + after, 0.0);
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const auto [row, at] = anchors[k];
    for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] += trials[k].signals(row, at - before + i);
  }
  for (auto& v : w.values) v /= static_cast<double>(trials.size());
  return w;
}

}  // namespace spikeadapt
