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
 * \file geom.hpp
 * \brief Point clouds, range images and the spherical projection between them.
 *
 * A range image row is the laser id of the return; a column is the azimuth
 * bin `floor((pi - atan2(y, x)) / delta_h) mod cols`. An invalid pixel holds
 * range 0 and a cleared validity flag.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace desnow {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
  int laser_id = 0;
};

using PointCloud = std::vector<Point>;

/// Euclidean distance of a point from the sensor origin.
[[nodiscard]] inline double range_of(const Point& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

/// Per-pixel ground truth or prediction.
enum class Label : std::uint8_t { Clean = 0, Noise = 1, Invalid = 255 };

struct SensorConfig {
  int n_rows = 32;
  double delta_h = 2.0 * std::numbers::pi / 512.0;  ///< horizontal angular resolution [rad]
  double max_range = 80.0;                           ///< [m]
  /// Elevation angle of each laser row [rad], row 0 first. Empty means "all zero".
  std::vector<double> elevation;

  [[nodiscard]] int n_cols() const { return static_cast<int>(std::lround(2.0 * std::numbers::pi / delta_h)); }

  [[nodiscard]] double elevation_of(int row) const {
    return elevation.empty() ? 0.0 : elevation.at(static_cast<std::size_t>(row));
  }

  void validate() const {
    if (n_rows < 1) throw std::invalid_argument("SensorConfig: n_rows must be >= 1");
    if (!(delta_h > 0.0)) throw std::invalid_argument("SensorConfig: delta_h must be > 0");
    if (n_cols() < 8) throw std::invalid_argument("SensorConfig: fewer than 8 azimuth columns");
    if (!(max_range > 0.0)) throw std::invalid_argument("SensorConfig: max_range must be > 0");
    if (!elevation.empty() && elevation.size() != static_cast<std::size_t>(n_rows))
      throw std::invalid_argument("SensorConfig: elevation table size must equal n_rows");
  }

  /// A 32-beam spinning sensor: elevations evenly spaced from +10.67 deg (row 0) to -30.67 deg.
  static SensorConfig spinning32(int cols = 512, double max_range = 80.0) {
    SensorConfig cfg;
    cfg.n_rows = 32;
    cfg.delta_h = 2.0 * std::numbers::pi / cols;
    cfg.max_range = max_range;
    const double top = 10.67 * std::numbers::pi / 180.0;
    const double bottom = -30.67 * std::numbers::pi / 180.0;
    for (int r = 0; r < cfg.n_rows; ++r) cfg.elevation.push_back(top + (bottom - top) * r / (cfg.n_rows - 1));
    return cfg;
  }

  /// Same angular layout with a different number of laser rows.
  static SensorConfig spinning(int rows, int cols, double max_range = 80.0, double top_deg = 10.67,
                               double bottom_deg = -30.67) {
    SensorConfig cfg;
    cfg.n_rows = rows;
    cfg.delta_h = 2.0 * std::numbers::pi / cols;
    cfg.max_range = max_range;
    for (int r = 0; r < rows; ++r) {
      const double deg = rows == 1 ? top_deg : top_deg + (bottom_deg - top_deg) * r / (rows - 1);
      cfg.elevation.push_back(deg * std::numbers::pi / 180.0);
    }
    return cfg;
  }
};

struct RangeImage {
  int rows = 0;
  int cols = 0;
  std::vector<double> range;          ///< row-major, 0 for invalid pixels
  std::vector<std::uint8_t> valid;    ///< 1 where the pixel holds a return
  std::vector<double> intensity;      ///< optional; empty or rows*cols
  std::vector<Label> labels;          ///< optional; empty or rows*cols

  RangeImage() = default;
  RangeImage(int r, int c)
      : rows(r), cols(c), range(static_cast<std::size_t>(r) * c, 0.0), valid(static_cast<std::size_t>(r) * c, 0) {}

  static RangeImage empty_for(const SensorConfig& cfg) { return RangeImage(cfg.n_rows, cfg.n_cols()); }

  [[nodiscard]] std::size_t size() const { return range.size(); }
  [[nodiscard]] std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * cols + col; }
  [[nodiscard]] bool has_intensity() const { return !intensity.empty(); }
  [[nodiscard]] bool has_labels() const { return !labels.empty(); }

  [[nodiscard]] std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v ? 1 : 0;
    return n;
  }

  void set(int row, int col, double r) {
    const std::size_t i = index(row, col);
    range[i] = r;
    valid[i] = r > 0.0 ? 1 : 0;
  }

  void invalidate(std::size_t i) {
    range[i] = 0.0;
    valid[i] = 0;
    if (has_intensity()) intensity[i] = 0.0;
    if (has_labels()) labels[i] = Label::Invalid;
  }

  [[nodiscard]] bool same_shape(const RangeImage& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const RangeImage&, const RangeImage&) = default;
};

/// Per-pixel labels with the shape of a range image. Invalid exactly on invalid pixels.
struct LabelMap {
  int rows = 0;
  int cols = 0;
  std::vector<Label> labels;

  LabelMap() = default;
  LabelMap(int r, int c, Label fill = Label::Invalid)
      : rows(r), cols(c), labels(static_cast<std::size_t>(r) * c, fill) {}

  /// Clean on valid pixels, Invalid elsewhere.
  static LabelMap clean_for(const RangeImage& img) {
    LabelMap m(img.rows, img.cols);
    for (std::size_t i = 0; i < img.size(); ++i) m.labels[i] = img.valid[i] ? Label::Clean : Label::Invalid;
    return m;
  }

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::size_t count(Label l) const {
    std::size_t n = 0;
    for (Label x : labels) n += x == l ? 1 : 0;
    return n;
  }
  Label& operator[](std::size_t i) { return labels[i]; }
  Label operator[](std::size_t i) const { return labels[i]; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* where) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols));
  }
}

/// Azimuth column of a point for a sensor with `cols` bins of width `delta_h`.
[[nodiscard]] inline int azimuth_column(double x, double y, double delta_h, int cols) {
  const double a = (std::numbers::pi - std::atan2(y, x)) / delta_h;
  int u = static_cast<int>(std::floor(a)) % cols;
  if (u < 0) u += cols;
  return u;
}

struct ProjectionStats {
  std::size_t projected = 0;
  std::size_t rejected_laser_id = 0;  ///< laser_id outside [0, n_rows)
  std::size_t rejected_range = 0;     ///< zero, non-finite or beyond max_range
  std::size_t collisions = 0;         ///< points that shared a pixel with another return
};

/// Spherical projection. Colliding points keep the nearest return.
[[nodiscard]] inline RangeImage project(const PointCloud& cloud, const SensorConfig& cfg,
                                        ProjectionStats* stats = nullptr) {
  cfg.validate();
  RangeImage img = RangeImage::empty_for(cfg);
  img.intensity.assign(img.size(), 0.0);
  ProjectionStats local;
  for (const Point& p : cloud) {
    if (p.laser_id < 0 || p.laser_id >= cfg.n_rows) {
      ++local.rejected_laser_id;
      continue;
    }
    const double r = range_of(p);
    if (!std::isfinite(r) || !(r > 0.0) || r > cfg.max_range) {
      ++local.rejected_range;
      continue;
    }
    const int u = azimuth_column(p.x, p.y, cfg.delta_h, img.cols);
    const std::size_t i = img.index(p.laser_id, u);
    if (img.valid[i]) {
      ++local.collisions;
      if (r >= img.range[i]) continue;
    }
    img.range[i] = r;
    img.valid[i] = 1;
    img.intensity[i] = p.intensity;
    ++local.projected;
  }
  if (stats) *stats = local;
  return img;
}

/// Unit direction of the ray through the centre of pixel (row, col).
struct RayDirection {
  double x, y, z;
};

[[nodiscard]] inline RayDirection pixel_ray(const SensorConfig& cfg, int row, int col) {
  const double azimuth = std::numbers::pi - (col + 0.5) * cfg.delta_h;
  const double el = cfg.elevation_of(row);
  return {std::cos(el) * std::cos(azimuth), std::cos(el) * std::sin(azimuth), std::sin(el)};
}

/// Inverse projection; `pixel_of`, when given, receives the flat pixel index of each point.
[[nodiscard]] inline PointCloud unproject(const RangeImage& img, const SensorConfig& cfg,
                                          std::vector<std::size_t>* pixel_of = nullptr) {
  cfg.validate();
  if (img.rows != cfg.n_rows || img.cols != cfg.n_cols())
    throw std::invalid_argument("unproject: image shape does not match sensor configuration");
  PointCloud cloud;
  cloud.reserve(img.valid_count());
  if (pixel_of) pixel_of->clear();
  for (int v = 0; v < img.rows; ++v)
    for (int u = 0; u < img.cols; ++u) {
      const std::size_t i = img.index(v, u);
      if (!img.valid[i]) continue;
      const RayDirection d = pixel_ray(cfg, v, u);
      const double r = img.range[i];
      cloud.push_back({r * d.x, r * d.y, r * d.z, img.has_intensity() ? img.intensity[i] : 0.0, v});
      if (pixel_of) pixel_of->push_back(i);
    }
  return cloud;
}

/// Reverses the azimuth order of every channel present in the image.
[[nodiscard]] inline RangeImage flip_horizontal(const RangeImage& img) {
  RangeImage out = img;
  for (int v = 0; v < img.rows; ++v)
    for (int u = 0; u < img.cols; ++u) {
      const std::size_t src = img.index(v, img.cols - 1 - u);
      const std::size_t dst = img.index(v, u);
      out.range[dst] = img.range[src];
      out.valid[dst] = img.valid[src];
      if (img.has_intensity()) out.intensity[dst] = img.intensity[src];
      if (img.has_labels()) out.labels[dst] = img.labels[src];
    }
  return out;
}

}  // namespace desnow
