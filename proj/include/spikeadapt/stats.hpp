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
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace spikeadapt {

/// Binary classification summary; label 1 is the positive class.
/// Ratios whose denominator is zero are absent rather than zero.
struct MetricsReport {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double accuracy = 0.0;
  std::optional<double> tpr;
  std::optional<double> tnr;

  std::uint64_t total() const { return tp + tn + fp + fn; }

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport metrics_from_counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn);
MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels);

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator, 0 for a single value
  std::size_t n = 0;
};

Aggregate aggregate(std::span<const double> values);

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Two-sided Welch two-sample t-test. Needs two or more values per sample and
/// a nonzero combined standard error.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// 100 * (baseline - comparison) / baseline.
double percent_reduction(double baseline_energy, double comparison_energy);
/// comparison / baseline; above 1 means the comparison is slower.
double latency_ratio(double comparison_time, double baseline_time);

/// Operations performed by one inference path: multiply-accumulates, spike
/// driven accumulates and weight reads.
struct OpCount {
  std::uint64_t dense_macs = 0;
  std::uint64_t event_accumulates = 0;
  std::uint64_t weight_fetches = 0;

  OpCount& operator+=(const OpCount& o) {
    dense_macs += o.dense_macs;
    event_accumulates += o.event_accumulates;
    weight_fetches += o.weight_fetches;
    return *this;
  }
  friend OpCount operator+(OpCount a, const OpCount& b) { return a += b; }
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

/// Energy units per operation. These set a proxy scale only; they do not
/// model any particular device.
struct CostModel {
  double e_mac = 4.6;
  double e_acc = 1.0;
  double e_fetch = 0.0;

  void validate() const;
};

struct EnergyReport {
  OpCount ops;
  double proxy_energy = 0.0;
  double wall_seconds = 0.0;
};

/// proxy = dense_macs * e_mac + event_accumulates * e_acc + weight_fetches * e_fetch.
EnergyReport energy_proxy(const OpCount& ops, const CostModel& cost, double wall_seconds = 0.0);

/// One row of a table-reproduction CSV: stage, study, metric, mean, sd, p_value.
struct TableRow {
  std::string stage;
  std::string study;
  std::string metric;
  double mean = 0.0;
  std::optional<double> sd;
  std::optional<double> p_value;
};

void write_table_csv(std::ostream& os, std::span<const TableRow> rows);

}  // namespace spikeadapt
