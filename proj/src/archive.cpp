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

#include "spikeadapt/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "json_io.hpp"
#include "spikeadapt/error.hpp"

namespace spikeadapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void write_bytes(const fs::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> buf(size);
  in.seekg(0);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed: " + path.string());
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_bytes(path, text.data(), text.size());
}

json read_json(const fs::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw IoError("malformed " + path.string() + ": " + e.what());
  }
}

template <class T>
std::vector<char> to_le(std::span<const T> values) {
  std::vector<char> out(values.size() * sizeof(T));
  std::memcpy(out.data(), values.data(), out.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::reverse(out.begin() + i * sizeof(T), out.begin() + (i + 1) * sizeof(T));
    }
  }
  return out;
}

template <class T>
std::vector<T> from_le(std::vector<char> bytes, const fs::path& path) {
  if (bytes.size() % sizeof(T) != 0) throw IoError("truncated blob " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += sizeof(T)) {
      std::reverse(bytes.begin() + i, bytes.begin() + i + sizeof(T));
    }
  }
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

void check_split_name(const std::string& name) {
  if (name.empty()) throw ValidationError("archive split name is empty");
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) throw ValidationError("archive split name '" + name + "' has characters outside [A-Za-z0-9_-]");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

template <class T>
T field(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) throw IoError(where.string() + ": manifest lacks '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(where.string() + ": bad '" + key + "': " + e.what());
  }
}

}  // namespace

void write_dataset_archive(const fs::path& dir, const DatasetArchive& archive) {
  ensure_dir(dir);
  json manifest;
  manifest["format"] = "spikeadapt-dataset";
  manifest["version"] = kFormatVersion;
  manifest["kind"] = std::string(kind_name(archive.kind));
  manifest["sample_rate"] = kSampleRate;
  manifest["montage"] = montage();
  manifest["generator"] = archive.generator;
  manifest["splits"] = json::array();
  for (const auto& [name, data] : archive.splits) {
    check_split_name(name);
    data.validate();
    const std::string file = name + ".i8";
    std::vector<std::int8_t> blob;
    std::vector<int> labels, participants;
    std::vector<std::uint32_t> trials;
    for (const auto& s : data.segments) {
      blob.insert(blob.end(), s.data.data.begin(), s.data.data.end());
      labels.push_back(s.label);
      participants.push_back(s.participant);
      trials.push_back(s.trial);
    }
    write_bytes(dir / file, blob.data(), blob.size());
    manifest["splits"].push_back({{"name", name},
                                  {"file", file},
                                  {"segments", data.segments.size()},
                                  {"channels", data.channels},
                                  {"width", data.width()},
                                  {"labels", labels},
                                  {"participants", participants},
                                  {"trials", trials},
                                  {"participant_ids", data.participants}});
  }
  write_json(dir / "manifest.json", manifest);
}

DatasetArchive read_dataset_archive(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  const json m = read_json(mpath);
  if (field<std::string>(m, "format", mpath) != "spikeadapt-dataset") throw IoError(mpath.string() + ": not a dataset archive");
  if (field<int>(m, "version", mpath) != kFormatVersion) throw IoError(mpath.string() + ": unsupported version");
  DatasetArchive a;
  a.kind = parse_kind(field<std::string>(m, "kind", mpath));
  a.generator = field<GeneratorConfig>(m, "generator", mpath);
  for (const auto& s : field<json>(m, "splits", mpath)) {
    const auto name = field<std::string>(s, "name", mpath);
    check_split_name(name);
    const auto file = field<std::string>(s, "file", mpath);
    const auto n = field<std::size_t>(s, "segments", mpath);
    const auto width = field<std::size_t>(s, "width", mpath);
    const auto labels = field<std::vector<int>>(s, "labels", mpath);
    const auto participants = field<std::vector<int>>(s, "participants", mpath);
    const auto trials = field<std::vector<std::uint32_t>>(s, "trials", mpath);
    LabeledDataset d;
    d.channels = field<std::vector<std::string>>(s, "channels", mpath);
    d.participants = field<std::vector<int>>(s, "participant_ids", mpath);
    const auto blob = read_bytes(dir / file);
    const std::size_t per = d.channels.size() * width;
    if (labels.size() != n || participants.size() != n || trials.size() != n || blob.size() != n * per) {
      throw IoError((dir / file).string() + ": size disagrees with manifest");
    }
    for (std::size_t i = 0; i < n; ++i) {
      Segment seg;
      seg.data = Int8Matrix(d.channels.size(), width);
      std::memcpy(seg.data.data.data(), blob.data() + i * per, per);
      seg.label = labels[i];
      seg.participant = participants[i];
      seg.trial = trials[i];
      d.segments.push_back(std::move(seg));
    }
    d.validate();
    a.splits.emplace(name, std::move(d));
  }
  return a;
}

void write_edge_layer(const fs::path& dir, const EdgeLayer& layer) {
  ensure_dir(dir);
  const auto weights = to_le<std::uint64_t>(layer.bits());
  const auto plasticity = to_le<double>(layer.plasticities());
  write_bytes(dir / "weights.u64", weights.data(), weights.size());
  write_bytes(dir / "plasticity.f64", plasticity.data(), plasticity.size());
  json m;
  m["format"] = "spikeadapt-edge-layer";
  m["version"] = kFormatVersion;
  m["config"] = layer.config();
  m["input_dim"] = layer.input_dim();
  m["num_weights"] = layer.num_weights();
  m["num_neurons"] = layer.num_neurons();
  m["words_per_row"] = layer.words_per_row();
  m["steps"] = layer.steps();
  write_json(dir / "manifest.json", m);
}

EdgeLayer read_edge_layer(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  const json m = read_json(mpath);
  if (field<std::string>(m, "format", mpath) != "spikeadapt-edge-layer") {
    throw IoError(mpath.string() + ": not an edge layer checkpoint");
  }
  if (field<int>(m, "version", mpath) != kFormatVersion) throw IoError(mpath.string() + ": unsupported version");
  auto bits = from_le<std::uint64_t>(read_bytes(dir / "weights.u64"), dir / "weights.u64");
  auto plasticity = from_le<double>(read_bytes(dir / "plasticity.f64"), dir / "plasticity.f64");
  return EdgeLayer::from_parts(field<EdgeLearnConfig>(m, "config", mpath), field<std::size_t>(m, "input_dim", mpath),
                               field<std::size_t>(m, "num_weights", mpath), std::move(bits), std::move(plasticity),
                               field<std::uint64_t>(m, "steps", mpath));
}

}  // namespace spikeadapt
