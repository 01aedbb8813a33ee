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
 * \file render.hpp
 * \brief Bird's-eye-view outcome rasters and range-image heatmaps.
 *
 * BEV colors: TP red, FP green, TN gray, FN yellow, on black. The top
 * `legend_height` rows hold four swatches in that order. Below the legend,
 * a point (x, y) lands at
 *
 *     col = floor((x + extent) / resolution)
 *     row = legend_height + floor((extent - y) / resolution)
 *
 * so +x points right and +y points up. Points outside the square are dropped.
 *
 * Heatmaps use a piecewise-linear ramp through five viridis anchor colors;
 * luminance increases monotonically from low to high values.
 */
#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "desnow/core/train.hpp"
#include "desnow/geom.hpp"

namespace desnow::pipeline {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kTruePositive{255, 0, 0};
inline constexpr Rgb kFalsePositive{0, 255, 0};
inline constexpr Rgb kTrueNegative{128, 128, 128};
inline constexpr Rgb kFalseNegative{255, 255, 0};
inline constexpr Rgb kBackground{0, 0, 0};

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  ///< row-major, 3 bytes per pixel

  Raster() = default;
  Raster(int w, int h, Rgb fill = kBackground) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + static_cast<std::ptrdiff_t>(i));
  }

  [[nodiscard]] Rgb at(int row, int col) const {
    const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void put(int row, int col, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }
};

inline void write_png(const std::filesystem::path& path, const Raster& img) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.height; ++r)
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(r) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

[[nodiscard]] inline Raster read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw std::runtime_error("cannot read " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("cannot decode " + path.string());
  }
  return out;
}

// ------------------------------------------------------------------------ BEV

enum class Outcome { TruePositive, FalsePositive, TrueNegative, FalseNegative };

[[nodiscard]] inline Rgb color_of(Outcome o) {
  switch (o) {
    case Outcome::TruePositive: return kTruePositive;
    case Outcome::FalsePositive: return kFalsePositive;
    case Outcome::TrueNegative: return kTrueNegative;
    case Outcome::FalseNegative: return kFalseNegative;
  }
  return kBackground;
}

/// Outcome of one point, or nothing when either label is Invalid.
[[nodiscard]] inline std::optional<Outcome> outcome_of(Label pred, Label gt) {
  if (pred == Label::Invalid || gt == Label::Invalid) return std::nullopt;
  const bool p = pred == Label::Noise, g = gt == Label::Noise;
  if (p) return g ? Outcome::TruePositive : Outcome::FalsePositive;
  return g ? Outcome::FalseNegative : Outcome::TrueNegative;
}

struct BevConfig {
  double resolution = 0.2;  ///< meters per pixel
  double extent = 40.0;     ///< half-width of the square view [m]
  int legend_height = 12;

  [[nodiscard]] int side() const { return static_cast<int>(std::ceil(2.0 * extent / resolution)); }
  void validate() const {
    if (!(resolution > 0.0) || !(extent > 0.0) || legend_height < 0)
      throw std::invalid_argument("BevConfig: resolution and extent must be > 0");
  }
};

/// (row, col) of a point in the BEV raster, including the legend offset.
[[nodiscard]] inline std::optional<std::pair<int, int>> bev_pixel(double x, double y, const BevConfig& cfg) {
  const double c = std::floor((x + cfg.extent) / cfg.resolution);
  const double r = std::floor((cfg.extent - y) / cfg.resolution);
  const int n = cfg.side();
  if (!(c >= 0 && c < n && r >= 0 && r < n)) return std::nullopt;
  return std::make_pair(cfg.legend_height + static_cast<int>(r), static_cast<int>(c));
}

inline void draw_legend(Raster& img, int height) {
  if (height <= 0) return;
  const std::array<Rgb, 4> order{kTruePositive, kFalsePositive, kTrueNegative, kFalseNegative};
  const int swatch = std::max(1, img.width / 8);
  const int pad = std::max(1, height / 6);
  for (int k = 0; k < 4; ++k)
    for (int r = pad; r < height - pad; ++r)
      for (int c = k * 2 * swatch + pad; c < std::min(img.width, (k * 2 + 1) * swatch); ++c) img.put(r, c, order[static_cast<std::size_t>(k)]);
}

/**
 * BEV scatter of a cloud colored by outcome. Points are painted TN first,
 * then FN, FP, TP, so errors and detections stay visible where pixels overlap.
 */
[[nodiscard]] inline Raster render_bev(const PointCloud& cloud, const std::vector<Label>& pred,
                                       const std::vector<Label>& gt, const BevConfig& cfg = {}) {
  cfg.validate();
  if (pred.size() != cloud.size() || gt.size() != cloud.size())
    throw std::invalid_argument("render_bev: labels must align with the cloud");
  const int n = cfg.side();
  Raster img(n, n + cfg.legend_height);
  draw_legend(img, cfg.legend_height);
  for (Outcome pass : {Outcome::TrueNegative, Outcome::FalseNegative, Outcome::FalsePositive, Outcome::TruePositive})
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto o = outcome_of(pred[i], gt[i]);
      if (!o || *o != pass) continue;
      if (const auto px = bev_pixel(cloud[i].x, cloud[i].y, cfg)) img.put(px->first, px->second, color_of(pass));
    }
  return img;
}

// -------------------------------------------------------------------- heatmap

/// Viridis-like ramp; t is clamped to [0, 1].
[[nodiscard]] inline Rgb colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> anchors{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  if (std::isnan(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0) * (anchors.size() - 1);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), anchors.size() - 2);
  const double f = t - static_cast<double>(k);
  Rgb out{};
  for (std::size_t c = 0; c < 3; ++c)
    out[c] = static_cast<std::uint8_t>(std::lround(anchors[k][c] + f * (anchors[k + 1][c] - anchors[k][c])));
  return out;
}

struct HeatmapConfig {
  int scale = 2;                ///< output pixels per range-image pixel
  std::optional<double> lo;     ///< defaults to the minimum present value
  std::optional<double> hi;     ///< defaults to the maximum present value
};

/// Per-pixel heatmap of a score field; pixels without a score are black.
[[nodiscard]] inline Raster render_heatmap(const core::ScoreMap& s, const HeatmapConfig& cfg = {}) {
  if (cfg.scale < 1) throw std::invalid_argument("render_heatmap: scale must be >= 1");
  double lo = cfg.lo.value_or(INFINITY), hi = cfg.hi.value_or(-INFINITY);
  for (std::size_t i = 0; i < s.score.size(); ++i) {
    if (!s.present[i]) continue;
    if (!cfg.lo) lo = std::min(lo, s.score[i]);
    if (!cfg.hi) hi = std::max(hi, s.score[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  Raster img(s.cols * cfg.scale, s.rows * cfg.scale);
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * s.cols + c;
      if (!s.present[i]) continue;
      const Rgb col = colormap((s.score[i] - lo) / span);
      for (int dr = 0; dr < cfg.scale; ++dr)
        for (int dc = 0; dc < cfg.scale; ++dc) img.put(r * cfg.scale + dr, c * cfg.scale + dc, col);
    }
  return img;
}

/// Range plane as a score field, for heatmaps of raw scans.
[[nodiscard]] inline core::ScoreMap range_field(const RangeImage& img) {
  return {img.rows, img.cols, img.range, img.valid};
}

/// Writes a raster as an SVG of one rect per run of equal-colored pixels in a row.
inline void write_svg(const std::filesystem::path& path, const Raster& img) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << img.width << "\" height=\"" << img.height
     << "\" shape-rendering=\"crispEdges\">\n";
  char hex[8];
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width;) {
      const Rgb col = img.at(r, c);
      int e = c + 1;
      while (e < img.width && img.at(r, e) == col) ++e;
      std::snprintf(hex, sizeof hex, "#%02x%02x%02x", col[0], col[1], col[2]);
      os << "<rect x=\"" << c << "\" y=\"" << r << "\" width=\"" << e - c << "\" height=\"1\" fill=\"" << hex << "\"/>\n";
      c = e;
    }
  os << "</svg>\n";
}

/// PNG or SVG by file extension.
inline void save_raster(const std::filesystem::path& path, const Raster& img) {
  if (path.extension() == ".svg") write_svg(path, img);
  else write_png(path, img);
}

}  // namespace desnow::pipeline
