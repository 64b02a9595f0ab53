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

#include <filesystem>
#include <map>
#include <string>

#include "spikeadapt/edge_layer.hpp"
#include "spikeadapt/eeg.hpp"

namespace spikeadapt {

/// Labelled segments plus the generator settings that produced them.
struct DatasetArchive {
  ExperimentKind kind = ExperimentKind::CountdownNominal;
  GeneratorConfig generator;
  std::map<std::string, LabeledDataset> splits;

  friend bool operator==(const DatasetArchive&, const DatasetArchive&) = default;
};

/// Directory with manifest.json and one <split>.i8 blob per split holding
/// segments x channels x width int8 values, row-major. Throws IoError with
/// the offending path.
void write_dataset_archive(const std::filesystem::path& dir, const DatasetArchive& archive);
DatasetArchive read_dataset_archive(const std::filesystem::path& dir);

/// Directory with manifest.json, weights.u64 (row-major packed rows,
/// little-endian) and plasticity.f64.
void write_edge_layer(const std::filesystem::path& dir, const EdgeLayer& layer);
EdgeLayer read_edge_layer(const std::filesystem::path& dir);

}  // namespace spikeadapt
