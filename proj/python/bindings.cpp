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


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "spikeadapt/eeg.hpp"
#include "spikeadapt/error.hpp"
#include "spikeadapt/harness.hpp"
#include "spikeadapt/invariants.hpp"
#include "spikeadapt/stats.hpp"

namespace py = pybind11;
using namespace spikeadapt;

namespace {

GeneratorConfig generator_from(const std::string& config_json) {
  return run_config_from_json(config_json).generator;
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["tp"] = m.tp;
  d["tn"] = m.tn;
  d["fp"] = m.fp;
  d["fn"] = m.fn;
  d["accuracy"] = m.accuracy;
  d["tpr"] = m.tpr ? py::cast(*m.tpr) : py::none();
  d["tnr"] = m.tnr ? py::cast(*m.tnr) : py::none();
  return d;
}

py::list generate(int participant, const std::string& kind, const std::string& config_json) {
  const auto trials = generate_participant(generator_from(config_json), participant, parse_kind(kind));
  py::list out;
  for (const auto& t : trials) {
    py::array_t<double> signals({t.signals.rows, t.signals.cols});
    std::memcpy(signals.mutable_data(), t.signals.data.data(), t.signals.data.size() * sizeof(double));
    py::list markers;
    for (const auto& m : t.markers) markers.append(py::make_tuple(m.sample, m.label));
    py::dict d;
    d["participant"] = t.participant;
    d["trial"] = t.trial;
    d["channels"] = t.channels;
    d["signals"] = signals;
    d["markers"] = markers;
    out.append(d);
  }
  return out;
}

// Segments of one participant as (inputs [N, channels, width] int8, labels [N]).
py::tuple segments(int participant, const std::string& kind, const std::string& config_json,
                   const std::string& channel_set) {
  auto trials = generate_participant(generator_from(config_json), participant, parse_kind(kind));
  LabeledDataset d = build_dataset(trials).dataset;
  if (channel_set == "fcas") d = select_channels(d, ChannelSet::fcas());
  else if (channel_set != "acs") throw ValidationError("channel set must be 'acs' or 'fcas'");
  const std::size_t n = d.size(), rows = n ? d.segments[0].data.rows : 0, cols = d.width();
  py::array_t<std::int8_t> x({n, rows, cols});
  py::array_t<int> y(static_cast<py::ssize_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(x.mutable_data(i), d.segments[i].data.data.data(), rows * cols);
    y.mutable_at(i) = d.segments[i].label;
  }
  return py::make_tuple(x, y);
}

py::dict run(const std::string& config_json, const std::string& out_dir) {
  RunConfig cfg = run_config_from_json(config_json);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  RunBundle bundle;
  {
    py::gil_scoped_release release;
    bundle = full_run(cfg);
    write_bundle(cfg.out_dir, bundle, cfg);
    write_report(cfg.out_dir, make_report(bundle, cfg.edge.checkpoints));
  }
  std::size_t complete = 0;
  for (const auto& s : bundle.splits) complete += s.complete ? 1 : 0;
  py::dict d;
  d["out_dir"] = cfg.out_dir;
  d["seconds"] = bundle.seconds;
  d["splits"] = bundle.splits.size();
  d["complete"] = complete;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "spikeadapt native core";

  // Translators run newest first, so the specific mappings below win over the base class.
  py::register_exception<Error>(m, "SpikeAdaptError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    }
  });

  m.def("default_config", [] { return run_config_to_json(default_run_config()); },
        "Default run configuration as a JSON string.");
  m.def("normalize_config", [](const std::string& j) { return run_config_to_json(run_config_from_json(j)); },
        py::arg("config_json"), "Apply overrides to the defaults; raises ValueError on unknown keys.");
  m.def("montage", &montage);
  m.def("generate", &generate, py::arg("participant"), py::arg("kind") = "countdown-nominal",
        py::arg("config_json") = "{}");
  m.def("segments", &segments, py::arg("participant"), py::arg("kind") = "countdown-nominal",
        py::arg("config_json") = "{}", py::arg("channels") = "acs");
  m.def("class_weights", [](const std::vector<int>& labels) { return compute_class_weights(labels); });
  m.def("compute_metrics", [](const std::vector<int>& pred, const std::vector<int>& labels) {
    return metrics_dict(compute_metrics(pred, labels));
  });
  m.def("welch_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const TTestResult r = welch_t_test(a, b);
    return py::make_tuple(r.t, r.dof, r.p_value);
  });
  m.def("percent_reduction", &percent_reduction, py::arg("baseline"), py::arg("comparison"));
  m.def("latency_ratio", &latency_ratio, py::arg("comparison"), py::arg("baseline"));
  m.def(
      "verify",
      [](std::uint64_t seed, std::size_t pairs, std::size_t steps) {
        VerifyOptions o;
        o.seed = seed;
        o.equivalence_pairs = pairs;
        o.edge_steps = steps;
        std::vector<CheckResult> r;
        {
          py::gil_scoped_release release;
          r = run_verify(o);
        }
        py::list out;
        for (const auto& c : r) out.append(py::make_tuple(c.name, c.passed, c.detail));
        return out;
      },
      py::arg("seed") = 0, py::arg("pairs") = 1000, py::arg("steps") = 10000);
  m.def("full_run", &run, py::arg("config_json") = "{}", py::arg("out_dir") = "");
}
