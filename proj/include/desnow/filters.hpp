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
 * \file filters.hpp
 * \brief Sparsity-based snow filters: radius and dynamic-radius outlier removal.
 */
#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "desnow/geom.hpp"
#include "desnow/kdtree.hpp"

namespace desnow::filters {

struct RorConfig {
  double search_radius = 0.5;  ///< [m]
  std::size_t min_neighbors = 3;

  void validate() const {
    if (!(search_radius > 0.0)) throw std::invalid_argument("RorConfig: search_radius must be > 0");
    if (min_neighbors < 1) throw std::invalid_argument("RorConfig: min_neighbors must be >= 1");
  }
};

struct DrorConfig {
  double radius_multiplier = 3.0;   ///< gamma
  double min_search_radius = 0.04;  ///< [m]
  std::size_t min_neighbors = 3;

  void validate() const {
    if (!(radius_multiplier > 0.0)) throw std::invalid_argument("DrorConfig: radius_multiplier must be > 0");
    if (!(min_search_radius > 0.0)) throw std::invalid_argument("DrorConfig: min_search_radius must be > 0");
    if (min_neighbors < 1) throw std::invalid_argument("DrorConfig: min_neighbors must be >= 1");
  }
};

/// Search radius of a point at range `r`: max(min_search_radius, gamma * r * delta_h).
[[nodiscard]] inline double dror_radius(double r, const DrorConfig& cfg, double delta_h) {
  return std::max(cfg.min_search_radius, cfg.radius_multiplier * r * delta_h);
}

/// Labels a point Noise when fewer than `min_neighbors` other points lie within its radius.
template <typename RadiusFn>
[[nodiscard]] std::vector<Label> radius_outlier_labels(const PointCloud& cloud, std::size_t min_neighbors,
                                                       RadiusFn&& radius_of) {
  std::vector<Label> labels(cloud.size(), Label::Clean);
  const KdTree tree(cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t n = tree.count_within(cloud[i], radius_of(cloud[i]), i, min_neighbors);
    labels[i] = n < min_neighbors ? Label::Noise : Label::Clean;
  }
  return labels;
}

[[nodiscard]] inline std::vector<Label> ror(const PointCloud& cloud, const RorConfig& cfg) {
  cfg.validate();
  return radius_outlier_labels(cloud, cfg.min_neighbors, [&](const Point&) { return cfg.search_radius; });
}

[[nodiscard]] inline std::vector<Label> dror(const PointCloud& cloud, const DrorConfig& cfg, const SensorConfig& sensor) {
  cfg.validate();
  return radius_outlier_labels(cloud, cfg.min_neighbors,
                               [&](const Point& p) { return dror_radius(range_of(p), cfg, sensor.delta_h); });
}

/// Runs a point filter on the returns of a range image and writes the verdicts back per pixel.
template <typename Filter>
[[nodiscard]] LabelMap filter_range_image(const RangeImage& img, const SensorConfig& sensor, Filter&& filter) {
  std::vector<std::size_t> pixel_of;
  const PointCloud cloud = unproject(img, sensor, &pixel_of);
  LabelMap out(img.rows, img.cols, Label::Invalid);
  if (cloud.empty()) return out;
  const std::vector<Label> labels = filter(cloud);
  for (std::size_t k = 0; k < cloud.size(); ++k) out[pixel_of[k]] = labels[k];
  return out;
}

}  // namespace desnow::filters
