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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spikeadapt/matrix.hpp"

namespace spikeadapt {

inline constexpr double kSampleRate = 500.0;
inline constexpr std::size_t kCountdownWidth = 996;
inline constexpr std::size_t kStoplightWidth = 1074;

/// Standard 19-electrode montage, in row order.
const std::vector<std::string>& montage();

enum class ExperimentKind { CountdownNominal, CountdownStressed, Stoplight };

std::string_view kind_name(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view name);
/// 1, 2, 3 -> nominal countdown, stressed countdown, stoplight.
ExperimentKind kind_from_experiment(int experiment);
std::size_t segment_width(ExperimentKind kind);

struct Marker {
  std::size_t sample = 0;
  std::string label;  // "5".."1", "stop", "yellow", "red", "brake"

  friend bool operator==(const Marker&, const Marker&) = default;
};

struct TrialRecording {
  int participant = 0;
  std::uint32_t trial = 0;
  ExperimentKind kind = ExperimentKind::CountdownNominal;
  std::vector<std::string> channels;
  FloatMatrix signals;  // channels x samples, microvolts
  std::vector<Marker> markers;

  /// Throws ValidationError on unsorted markers or a channel/row mismatch.
  void validate() const;
  friend bool operator==(const TrialRecording&, const TrialRecording&) = default;
};

struct GeneratorConfig {
  std::size_t participants = 11;
  std::size_t countdown_trials = 240;
  std::size_t stressed_trials = 150;
  std::size_t stoplight_trials = 90;
  double amplitude_min_uv = 15.0;   // per-participant CNV depth at Cz
  double amplitude_max_uv = 25.0;
  double onset_jitter_ms = 40.0;    // per-trial CNV onset jitter
  double noise_sigma_uv = 10.0;
  double alpha_amplitude_uv = 4.0;  // 10 Hz background rhythm
  double drift_sigma_uv = 8.0;      // slow AR(1) background, stationary sd
  double drift_tau_ms = 300.0;
  double drift_shared = 0.0;        // variance share common to all channels
  double stress_multiplier = 1.5;
  std::uint64_t seed = 0;

  std::size_t trials_for(ExperimentKind kind) const;
  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Participant-level traits drawn once from the generator seed.
struct ParticipantProfile {
  double amplitude_uv = 0.0;
  double latency_ms = 0.0;          // CNV onset after the window start
  std::vector<double> channel_gain; // multiplies the montage CNV topography
  double noise_scale = 1.0;
};

ParticipantProfile participant_profile(const GeneratorConfig& config, int participant);

/// CNV topography: share of the Cz amplitude seen at each montage channel.
double cnv_weight(std::string_view channel);

std::vector<TrialRecording> generate_participant(const GeneratorConfig& config, int participant, ExperimentKind kind);

struct Segment {
  Int8Matrix data;  // channels x width
  int label = 0;
  int participant = 0;
  std::uint32_t trial = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Windows (5,4) (4,3) (3,2) (2,1) labelled 0 and (1,stop) labelled 1, each
/// quantized and right-padded to 996 columns. Throws ValidationError naming
/// the missing marker when the trial is incomplete.
std::vector<Segment> segment_countdown(const TrialRecording& trial);

/// One 1074-column window per yellow marker; the window whose light pair is
/// followed by a brake marker is labelled 1, the pass-through one 0.
std::vector<Segment> segment_stoplight(const TrialRecording& trial);

std::vector<Segment> segment_trial(const TrialRecording& trial);

/// Right zero-padding of a quantized window.
Segment pad_segment(Segment segment, std::size_t width = kCountdownWidth);

struct ChannelSet {
  std::vector<std::string> names;

  static ChannelSet all();
  /// Cz, Pz, C3, C4, Fz.
  static ChannelSet fcas();
  /// Row indices into `available`, in the order channels appear there.
  std::vector<std::size_t> rows_in(const std::vector<std::string>& available) const;
};

struct LabeledDataset {
  std::vector<std::string> channels;
  std::vector<Segment> segments;
  std::vector<int> participants;

  std::size_t size() const { return segments.size(); }
  std::size_t width() const;
  std::vector<Int8Matrix> inputs() const;
  std::vector<int> labels() const;
  std::size_t count_label(int label) const;
  /// Homogeneous shape and binary labels, else ValidationError.
  void validate() const;
  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

struct SegmentationReport {
  LabeledDataset dataset;
  std::vector<std::string> rejections;
};

/// Segments every trial; incomplete trials are skipped with their reason.
SegmentationReport build_dataset(std::span<const TrialRecording> trials);

LabeledDataset merge(std::span<const LabeledDataset> parts);
LabeledDataset select_participants(const LabeledDataset& data, std::span<const int> ids);

TrialRecording select_channels(const TrialRecording& trial, const ChannelSet& set);
LabeledDataset select_channels(const LabeledDataset& data, const ChannelSet& set);

/// w_c = N / (2 N_c).
std::array<double, 2> compute_class_weights(std::span<const int> labels);
std::array<double, 2> compute_class_weights(const LabeledDataset& data);

/// Appends `copies` copies of every positive segment after the originals.
LabeledDataset duplicate_positives(const LabeledDataset& data, std::size_t copies = 3);

/// Appends `copies` noisy versions of each segment: round(N(0,1)) per value,
/// clamped to [-127, 127].
LabeledDataset augment_noise(const LabeledDataset& data, std::size_t copies = 4, std::uint64_t seed = 0);

struct ParticipantSplit {
  std::vector<int> group;
  std::vector<int> individual;

  friend bool operator==(const ParticipantSplit&, const ParticipantSplit&) = default;
};

/// `repeats` seeded 8/3 splits of exactly 11 ids. With four or more repeats
/// every id lands in some individual set.
std::vector<ParticipantSplit> split_participants(std::span<const int> ids, std::uint64_t seed,
                                                 std::size_t repeats = 10);

struct Holdout {
  LabeledDataset train;
  LabeledDataset eval;
};

/// Seeded per-label split moving round(fraction * N_c) segments of each class
/// (at least one when the class has two or more) into `eval`.
Holdout holdout_split(const LabeledDataset& data, double fraction, std::uint64_t seed);

struct Waveform {
  std::vector<double> values;
  std::size_t marker_index = 0;  // position of the alignment marker in `values`
};

/// Mean of one channel across trials aligned on the first `marker`, over the
/// support shared by all trials.
Waveform grand_average(std::span<const TrialRecording> trials, std::string_view channel, std::string_view marker);

}  // namespace spikeadapt
