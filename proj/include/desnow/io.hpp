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
 * \file io.hpp
 * \brief On-disk formats for point clouds, range images and label planes.
 *
 * Point cloud, text:   one `x,y,z,intensity,laser_id` line per point.
 * Point cloud, binary: 16-byte magic `SLIDEPC1` (zero padded), u32 count,
 *                      then per point f32 x, y, z, intensity and u16 laser_id.
 * Range image:         one JSON header line, then row-major planes: f32 range
 *                      (0 = invalid), optional f32 intensity, optional u8 label.
 * Label plane:         raw u8 per entry {0 = Clean, 1 = Noise, 255 = Invalid}.
 *
 * All binary data is little-endian.
 */
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "desnow/geom.hpp"

namespace desnow::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline constexpr char kCloudMagic[16] = {'S', 'L', 'I', 'D', 'E', 'P', 'C', '1', 0, 0, 0, 0, 0, 0, 0, 0};
inline constexpr const char* kRangeImageFormat = "desnow-range-image";

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("unexpected end of binary data");
  return v;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary) {
  std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot open for writing: " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary) {
  std::ifstream is(p, binary ? std::ios::binary : std::ios::in);
  if (!is) throw std::runtime_error("cannot open for reading: " + p.string());
  return is;
}

}  // namespace detail

// ---------------------------------------------------------------- point clouds

inline void write_cloud_csv(std::ostream& os, const PointCloud& cloud) {
  os.precision(9);
  for (const Point& p : cloud) os << p.x << ',' << p.y << ',' << p.z << ',' << p.intensity << ',' << p.laser_id << '\n';
}

inline PointCloud read_cloud_csv(std::istream& is) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    Point p;
    if (!(ls >> p.x >> p.y >> p.z >> p.intensity >> p.laser_id))
      throw std::runtime_error("malformed point on line " + std::to_string(line_no));
    cloud.push_back(p);
  }
  return cloud;
}

inline void write_cloud_binary(std::ostream& os, const PointCloud& cloud) {
  os.write(kCloudMagic, sizeof(kCloudMagic));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.size()));
  for (const Point& p : cloud) {
    detail::put<float>(os, static_cast<float>(p.x));
    detail::put<float>(os, static_cast<float>(p.y));
    detail::put<float>(os, static_cast<float>(p.z));
    detail::put<float>(os, static_cast<float>(p.intensity));
    detail::put<std::uint16_t>(os, static_cast<std::uint16_t>(p.laser_id));
  }
}

inline PointCloud read_cloud_binary(std::istream& is) {
  char magic[16];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCloudMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a binary point cloud (bad magic)");
  const auto n = detail::get<std::uint32_t>(is);
  PointCloud cloud(n);
  for (Point& p : cloud) {
    p.x = detail::get<float>(is);
    p.y = detail::get<float>(is);
    p.z = detail::get<float>(is);
    p.intensity = detail::get<float>(is);
    p.laser_id = detail::get<std::uint16_t>(is);
  }
  return cloud;
}

/// Picks the text or binary reader by extension (`.csv` / `.txt` are text).
inline PointCloud load_cloud(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") {
    auto is = detail::open_in(path, false);
    return read_cloud_csv(is);
  }
  auto is = detail::open_in(path, true);
  return read_cloud_binary(is);
}

inline void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  const auto ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") {
    auto os = detail::open_out(path, false);
    write_cloud_csv(os, cloud);
    return;
  }
  auto os = detail::open_out(path, true);
  write_cloud_binary(os, cloud);
}

// ---------------------------------------------------------------- range images

/// A range image together with the sensor geometry it was recorded with.
struct RangeImageFile {
  RangeImage image;
  SensorConfig sensor;
};

inline void write_range_image(std::ostream& os, const RangeImage& img, const SensorConfig& sensor) {
  nlohmann::json header;
  header["format"] = kRangeImageFormat;
  header["version"] = 1;
  header["rows"] = img.rows;
  header["cols"] = img.cols;
  header["delta_h"] = sensor.delta_h;
  header["max_range"] = sensor.max_range;
  header["elevation"] = sensor.elevation;
  std::vector<std::string> channels{"range"};
  if (img.has_intensity()) channels.emplace_back("intensity");
  if (img.has_labels()) channels.emplace_back("label");
  header["channels"] = channels;
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < img.size(); ++i) detail::put<float>(os, img.valid[i] ? static_cast<float>(img.range[i]) : 0.0f);
  if (img.has_intensity())
    for (double v : img.intensity) detail::put<float>(os, static_cast<float>(v));
  if (img.has_labels())
    for (Label l : img.labels) detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(l));
}

inline RangeImageFile read_range_image(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("range image: missing header");
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", std::string{}) != kRangeImageFormat)
    throw std::runtime_error("range image: unknown format tag");
  RangeImageFile f;
  f.sensor.n_rows = header.at("rows").get<int>();
  f.sensor.delta_h = header.at("delta_h").get<double>();
  f.sensor.max_range = header.at("max_range").get<double>();
  f.sensor.elevation = header.value("elevation", std::vector<double>{});
  f.image = RangeImage(header.at("rows").get<int>(), header.at("cols").get<int>());
  const auto channels = header.at("channels").get<std::vector<std::string>>();
  for (const auto& ch : channels) {
    if (ch == "range") {
      for (std::size_t i = 0; i < f.image.size(); ++i) {
        const double r = detail::get<float>(is);
        f.image.range[i] = r > 0.0 ? r : 0.0;
        f.image.valid[i] = r > 0.0 ? 1 : 0;
      }
    } else if (ch == "intensity") {
      f.image.intensity.resize(f.image.size());
      for (double& v : f.image.intensity) v = detail::get<float>(is);
    } else if (ch == "label") {
      f.image.labels.resize(f.image.size());
      for (Label& l : f.image.labels) l = static_cast<Label>(detail::get<std::uint8_t>(is));
    } else {
      throw std::runtime_error("range image: unknown channel '" + ch + "'");
    }
  }
  return f;
}

inline void save_range_image(const std::filesystem::path& path, const RangeImage& img, const SensorConfig& sensor) {
  auto os = detail::open_out(path, true);
  write_range_image(os, img, sensor);
}

inline RangeImageFile load_range_image(const std::filesystem::path& path) {
  auto is = detail::open_in(path, true);
  return read_range_image(is);
}

// ---------------------------------------------------------------- label planes

inline void save_labels(const std::filesystem::path& path, const std::vector<Label>& labels) {
  auto os = detail::open_out(path, true);
  for (Label l : labels) detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(l));
}

inline std::vector<Label> load_labels(const std::filesystem::path& path) {
  auto is = detail::open_in(path, true);
  std::vector<Label> out;
  char c;
  while (is.get(c)) out.push_back(static_cast<Label>(static_cast<std::uint8_t>(c)));
  return out;
}

}  // namespace desnow::io
