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
 * \file checkpoint.hpp
 * \brief Model checkpoints: one JSON manifest line, then every parameter as
 *        raw little-endian float64 in manifest order.
 */
#pragma once

#include <bit>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "desnow/core/model.hpp"

namespace desnow::core {

inline constexpr const char* kCheckpointFormat = "desnow-checkpoint";

struct Checkpoint {
  DesnowModel model;
  int step = 0;
  double rho = 100.0;
};

inline void write_checkpoint(std::ostream& os, const DesnowModel& model, int step, double rho) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  const NetConfig& c = model.config();
  nlohmann::json h;
  h["format"] = kCheckpointFormat;
  h["version"] = 1;
  h["architecture"] = {{"channels", c.channels},       {"blocks", c.blocks},         {"encoder_blocks", c.encoder_blocks},
                       {"kernel", c.kernel},           {"hypotheses", c.hypotheses}, {"classifier", c.classifier}};
  h["seed"] = model.seed();
  h["step"] = step;
  h["rho"] = rho;
  if (const auto res = model.resolution()) h["resolution"] = {res->first, res->second};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, t] : model.named_parameters()) {
    const nn::Shape s = t.shape();
    params.push_back({{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  h["parameters"] = params;
  os << h.dump() << '\n';
  for (const auto& [name, t] : model.named_parameters()) {
    const auto v = t.values();
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

[[nodiscard]] inline Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("checkpoint: missing header");
  const auto h = nlohmann::json::parse(line);
  if (h.value("format", std::string{}) != kCheckpointFormat) throw std::runtime_error("checkpoint: unknown format tag");
  const auto& a = h.at("architecture");
  NetConfig cfg;
  cfg.channels = a.at("channels").get<int>();
  cfg.blocks = a.at("blocks").get<int>();
  cfg.encoder_blocks = a.at("encoder_blocks").get<int>();
  cfg.kernel = a.at("kernel").get<int>();
  cfg.hypotheses = a.at("hypotheses").get<int>();
  cfg.classifier = a.at("classifier").get<bool>();
  Checkpoint ck{DesnowModel(cfg, h.at("seed").get<std::uint64_t>()), h.at("step").get<int>(), h.at("rho").get<double>()};
  if (h.contains("resolution")) ck.model.set_resolution(h["resolution"][0].get<int>(), h["resolution"][1].get<int>());

  const auto params = ck.model.named_parameters();
  const auto& listed = h.at("parameters");
  if (listed.size() != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const nn::Shape s = params[i].second.shape();
    const auto shape = listed[i].at("shape").get<std::vector<int>>();
    if (listed[i].at("name").get<std::string>() != params[i].first || shape != std::vector<int>{s.n, s.c, s.h, s.w})
      throw std::runtime_error("checkpoint: parameter '" + params[i].first + "' does not match the manifest");
  }
  for (auto [name, t] : params) {  // Tensor copies share storage
    auto v = t.values();
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated data for '" + name + "'");
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const DesnowModel& model, int step, double rho) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, model, step, rho);
}

[[nodiscard]] inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace desnow::core
