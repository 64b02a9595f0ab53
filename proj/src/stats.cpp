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

#include "spikeadapt/stats.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "spikeadapt/error.hpp"

namespace spikeadapt {
namespace {

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

void write_number(std::ostream& os, std::optional<double> v) {
  if (v) os << std::setprecision(10) << *v;
}

}  // namespace

MetricsReport metrics_from_counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  MetricsReport m{tp, tn, fp, fn, 0.0, std::nullopt, std::nullopt};
  const std::uint64_t total = m.total();
  if (total > 0) m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  if (tp + fn > 0) m.tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (tn + fp > 0) m.tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return m;
}

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw ValidationError("compute_metrics: empty input");
  if (predictions.size() != labels.size()) {
    throw ValidationError("compute_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
  }
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] == 1, pred = predictions[i] == 1;
    if (truth && pred) ++tp;
    else if (truth) ++fn;
    else if (pred) ++fp;
    else ++tn;
  }
  return metrics_from_counts(tp, tn, fp, fn);
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw ValidationError("aggregate: empty input");
  Aggregate a;
  a.n = values.size();
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(a.n);
  a.sd = a.n > 1 ? std::sqrt(sample_variance(values, a.mean)) : 0.0;
  return a;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("welch_t_test: need at least two values per sample");
  const Aggregate sa = aggregate(a), sb = aggregate(b);
  const double qa = sa.sd * sa.sd / static_cast<double>(a.size());
  const double qb = sb.sd * sb.sd / static_cast<double>(b.size());
  const double se2 = qa + qb;
  if (!(se2 > 0.0)) throw ValidationError("welch_t_test: both samples have zero variance");
  TTestResult r;
  r.t = (sa.mean - sb.mean) / std::sqrt(se2);
  r.dof = se2 * se2 / (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
  // P(|T| > |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2)
  r.p_value = boost::math::ibeta(r.dof / 2.0, 0.5, r.dof / (r.dof + r.t * r.t));
  return r;
}

double percent_reduction(double baseline_energy, double comparison_energy) {
  if (!(baseline_energy > 0.0)) throw ValidationError("percent_reduction: baseline must be positive");
  return 100.0 * (baseline_energy - comparison_energy) / baseline_energy;
}

double latency_ratio(double comparison_time, double baseline_time) {
  if (!(baseline_time > 0.0)) throw ValidationError("latency_ratio: baseline must be positive");
  return comparison_time / baseline_time;
}

void CostModel::validate() const {
  if (!(e_mac >= 0.0) || !(e_acc >= 0.0) || !(e_fetch >= 0.0)) {
    throw ValidationError("cost model constants must be nonnegative");
  }
}

EnergyReport energy_proxy(const OpCount& ops, const CostModel& cost, double wall_seconds) {
  cost.validate();
  EnergyReport r;
  r.ops = ops;
  r.proxy_energy = static_cast<double>(ops.dense_macs) * cost.e_mac +
                   static_cast<double>(ops.event_accumulates) * cost.e_acc +
                   static_cast<double>(ops.weight_fetches) * cost.e_fetch;
  r.wall_seconds = wall_seconds;
  return r;
}

void write_table_csv(std::ostream& os, std::span<const TableRow> rows) {
  os << "stage,study,metric,mean,sd,p_value\n";
  for (const TableRow& r : rows) {
    os << r.stage << ',' << r.study << ',' << r.metric << ',';
    write_number(os, r.mean);
    os << ',';
    write_number(os, r.sd);
    os << ',';
    write_number(os, r.p_value);
    os << '\n';
  }
}

}  // namespace spikeadapt
