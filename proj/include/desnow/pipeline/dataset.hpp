// Copyright 2026, The desnow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * \file dataset.hpp
 * \brief On-disk synthetic datasets.
 *
 * Layout of a dataset directory:
 *
 *     manifest.json          sensor, synthesis settings, split, per-scan noise level
 *     noisy/<name>.ri        scan with injected snow (range + intensity)
 *     clean/<name>.ri        the same scan before injection
 *     labels/<name>.lbl      u8 ground truth, 0 Clean / 1 Noise / 255 Invalid
 */
#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "desnow/geom.hpp"
#include "desnow/io.hpp"
#include "desnow/pipeline/split.hpp"
#include "desnow/synth.hpp"

namespace desnow::pipeline {

inline constexpr const char* kDatasetFormat = "desnow-dataset";

struct ScanEntry {
  std::string name;
  double noise_fraction = 0.0;
  synth::NoiseLevel level = synth::NoiseLevel::Light;
  std::string split;  ///< "train", "val" or "test"
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  SensorConfig sensor;
  synth::DatasetParams params;
  std::array<double, 3> split_ratios{0.70, 0.15, 0.15};
  std::vector<ScanEntry> scans;

  [[nodiscard]] std::vector<std::size_t> in_split(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scans.size(); ++i)
      if (split == "all" || scans[i].split == split) out.push_back(i);
    return out;
  }
};

[[nodiscard]] inline synth::NoiseLevel parse_noise_level(const std::string& s) {
  for (auto l : {synth::NoiseLevel::Light, synth::NoiseLevel::Medium, synth::NoiseLevel::Heavy, synth::NoiseLevel::Extreme})
    if (s == synth::to_string(l)) return l;
  throw std::invalid_argument("unknown noise level '" + s + "'");
}

[[nodiscard]] inline std::string scan_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scan_%05zu", index);
  return buf;
}

[[nodiscard]] inline std::filesystem::path noisy_path(const std::filesystem::path& dir, const std::string& name) {
  return dir / "noisy" / (name + ".ri");
}
[[nodiscard]] inline std::filesystem::path clean_path(const std::filesystem::path& dir, const std::string& name) {
  return dir / "clean" / (name + ".ri");
}
[[nodiscard]] inline std::filesystem::path label_path(const std::filesystem::path& dir, const std::string& name) {
  return dir / "labels" / (name + ".lbl");
}

inline void save_label_map(const std::filesystem::path& path, const LabelMap& m) { io::save_labels(path, m.labels); }

[[nodiscard]] inline LabelMap load_label_map(const std::filesystem::path& path, int rows, int cols) {
  LabelMap m(rows, cols);
  m.labels = io::load_labels(path);
  if (m.labels.size() != static_cast<std::size_t>(rows) * cols)
    throw std::runtime_error(path.string() + ": expected " + std::to_string(rows * cols) + " labels, found " +
                             std::to_string(m.labels.size()));
  return m;
}

inline void save_manifest(const std::filesystem::path& dir, const DatasetManifest& m) {
  nlohmann::json j;
  j["format"] = kDatasetFormat;
  j["version"] = 1;
  j["seed"] = m.seed;
  j["sensor"] = {{"rows", m.sensor.n_rows}, {"cols", m.sensor.n_cols()}, {"max_range", m.sensor.max_range},
                 {"elevation", m.sensor.elevation}};
  const auto& p = m.params;
  j["synthesis"] = {{"tau", p.synth.tau},
                    {"gain", p.synth.gain},
                    {"beta", p.synth.beta},
                    {"noise_floor", p.synth.noise_floor},
                    {"noise_count_range", {p.snow.min_count, p.snow.max_count}},
                    {"snow_mean_range", p.snow.mean_range},
                    {"snow_min_range", p.snow.min_range},
                    {"dropout", p.dropout},
                    {"range_sigma", p.range_sigma}};
  j["split_ratios"] = m.split_ratios;
  nlohmann::json scans = nlohmann::json::array();
  for (const auto& s : m.scans)
    scans.push_back({{"name", s.name}, {"noise_fraction", s.noise_fraction}, {"level", synth::to_string(s.level)},
                     {"split", s.split}});
  j["scans"] = scans;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2) << '\n';
}

[[nodiscard]] inline DatasetManifest load_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("no manifest.json in " + dir.string());
  const auto j = nlohmann::json::parse(is);
  if (j.value("format", std::string{}) != kDatasetFormat) throw std::runtime_error("manifest: unknown format tag");
  DatasetManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& s = j.at("sensor");
  m.sensor = SensorConfig::spinning(s.at("rows").get<int>(), s.at("cols").get<int>(), s.at("max_range").get<double>());
  m.sensor.elevation = s.at("elevation").get<std::vector<double>>();
  const auto& p = j.at("synthesis");
  m.params.synth = {p.at("tau").get<double>(), p.at("gain").get<double>(), p.at("beta").get<double>(),
                    p.at("noise_floor").get<double>()};
  m.params.snow.min_count = p.at("noise_count_range")[0].get<int>();
  m.params.snow.max_count = p.at("noise_count_range")[1].get<int>();
  m.params.snow.mean_range = p.at("snow_mean_range").get<double>();
  m.params.snow.min_range = p.at("snow_min_range").get<double>();
  m.params.dropout = p.at("dropout").get<double>();
  m.params.range_sigma = p.at("range_sigma").get<double>();
  m.split_ratios = j.at("split_ratios").get<std::array<double, 3>>();
  for (const auto& e : j.at("scans"))
    m.scans.push_back({e.at("name").get<std::string>(), e.at("noise_fraction").get<double>(),
                       parse_noise_level(e.at("level").get<std::string>()), e.at("split").get<std::string>()});
  return m;
}

/// Synthesizes `scenes` scans into `dir` and writes the manifest. Deterministic per seed.
inline DatasetManifest synthesize_dataset(const std::filesystem::path& dir, std::size_t scenes, std::uint64_t seed,
                                          const SensorConfig& sensor, const synth::DatasetParams& params,
                                          std::array<double, 3> ratios = {0.70, 0.15, 0.15}) {
  for (const char* sub : {"noisy", "clean", "labels"}) std::filesystem::create_directories(dir / sub);
  DatasetManifest m{seed, sensor, params, ratios, {}};
  const Split split = split_dataset(scenes, ratios, seed);
  std::vector<std::string> split_of(scenes);
  for (auto i : split.train) split_of[i] = "train";
  for (auto i : split.val) split_of[i] = "val";
  for (auto i : split.test) split_of[i] = "test";
  for (std::size_t i = 0; i < scenes; ++i) {
    const synth::SnowyScan scan = synth::synthesize_scan(seed, i, sensor, params);
    const std::string name = scan_name(i);
    io::save_range_image(noisy_path(dir, name), scan.noisy, sensor);
    io::save_range_image(clean_path(dir, name), scan.clean, sensor);
    save_label_map(label_path(dir, name), scan.truth);
    m.scans.push_back({name, scan.noise_fraction, scan.level, split_of[i]});
  }
  save_manifest(dir, m);
  return m;
}

/// A scan with its ground truth, loaded from a dataset directory.
struct LoadedScan {
  std::string name;
  RangeImage noisy;
  LabelMap truth;
};

[[nodiscard]] inline LoadedScan load_scan(const std::filesystem::path& dir, const ScanEntry& e) {
  LoadedScan s;
  s.name = e.name;
  s.noisy = io::load_range_image(noisy_path(dir, e.name)).image;
  s.truth = load_label_map(label_path(dir, e.name), s.noisy.rows, s.noisy.cols);
  return s;
}

[[nodiscard]] inline std::vector<LoadedScan> load_split(const std::filesystem::path& dir, const DatasetManifest& m,
                                                        const std::string& split) {
  std::vector<LoadedScan> out;
  for (auto i : m.in_split(split)) out.push_back(load_scan(dir, m.scans[i]));
  return out;
}

}  // namespace desnow::pipeline
