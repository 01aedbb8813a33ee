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
 * \file synth.hpp
 * \brief Snow-noise dataset synthesis.
 *
 * A snowy scan is built in three stages:
 *  1. a "noise capture": snow returns recorded in front of a static reference
 *     scene are separated from scene returns by comparing against a snow-free
 *     capture of the same scene (extract_noise_labels);
 *  2. the maximum range at which a return could have been detected through
 *     the atmosphere is computed per pixel of a clean base scan
 *     (max_detectable_range);
 *  3. snow returns are copied into the base scan where they are closer than
 *     that limit (inject_noise), which also yields exact ground truth.
 *
 * Base scans and reference scenes come from an analytic ray caster over a
 * ground plane and axis-aligned boxes (generate_scene); snow comes from
 * generate_snow.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "desnow/geom.hpp"
#include "desnow/random.hpp"

namespace desnow::synth {

struct SynthConfig {
  double tau = 1.0;           ///< margin for sensing errors [m]
  double gain = 0.45;         ///< adaptive laser gain g
  double beta = 0.02;         ///< atmospheric extinction coefficient [1/m]
  double noise_floor = 0.05;  ///< detectable noise floor n

  void validate() const {
    if (!(tau >= 0.0)) throw std::invalid_argument("SynthConfig: tau must be >= 0");
    if (!(beta > 0.0)) throw std::invalid_argument("SynthConfig: beta must be > 0");
    if (!(noise_floor > 0.0)) throw std::invalid_argument("SynthConfig: noise floor must be > 0");
    if (!(gain >= 0.0)) throw std::invalid_argument("SynthConfig: gain must be >= 0");
  }
};

/**
 * Labels the returns of a snowy capture. A pixel is Noise when the snow-free
 * reference is at least `tau` farther away, or when the reference saw empty
 * space there. Pixels without a snowy return are Invalid.
 */
[[nodiscard]] inline LabelMap extract_noise_labels(const RangeImage& noisy, const RangeImage& clean_ref, double tau) {
  require_same_shape(noisy, clean_ref, "extract_noise_labels");
  LabelMap out(noisy.rows, noisy.cols, Label::Invalid);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    if (!noisy.valid[i]) continue;
    if (!clean_ref.valid[i]) {
      out[i] = Label::Noise;
      continue;
    }
    out[i] = clean_ref.range[i] >= noisy.range[i] + tau ? Label::Noise : Label::Clean;
  }
  return out;
}

struct DetectableRange {
  double meters = 0.0;
  bool below_noise_floor = false;  ///< n >= I_B + g: nothing can be detected
};

/// min(-ln(n / (I_B + g)) / (2 beta), R_B).
[[nodiscard]] inline DetectableRange max_detectable_range(double intensity, double base_range, const SynthConfig& cfg) {
  const double signal = intensity + cfg.gain;
  if (!(signal > cfg.noise_floor)) return {0.0, true};
  const double limit = -std::log(cfg.noise_floor / signal) / (2.0 * cfg.beta);
  return {std::min(limit, base_range), false};
}

struct InjectionResult {
  RangeImage scan;   ///< base with snow returns copied in
  LabelMap truth;    ///< Noise exactly where a snow return was copied
  std::size_t injected = 0;
};

/**
 * Copies Noise-labelled returns of `noisy` into `base` wherever they lie within
 * the per-pixel detectable range. An empty base pixel contributes zero
 * intensity and no range cap, so only atmospheric attenuation limits it.
 */
[[nodiscard]] inline InjectionResult inject_noise(const RangeImage& base, const RangeImage& noisy,
                                                  const LabelMap& noise_labels, const SynthConfig& cfg) {
  require_same_shape(base, noisy, "inject_noise");
  require_same_shape(base, noise_labels, "inject_noise");
  cfg.validate();
  InjectionResult res{base, LabelMap::clean_for(base), 0};
  res.scan.labels.clear();
  if (!res.scan.has_intensity()) res.scan.intensity.assign(base.size(), 0.0);
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (noise_labels[i] != Label::Noise || !noisy.valid[i]) continue;
    const double i_b = base.valid[i] && base.has_intensity() ? base.intensity[i] : 0.0;
    const double r_b = base.valid[i] ? base.range[i] : std::numeric_limits<double>::infinity();
    const DetectableRange r_max = max_detectable_range(i_b, r_b, cfg);
    if (noisy.range[i] <= r_max.meters) {
      res.scan.range[i] = noisy.range[i];
      res.scan.valid[i] = 1;
      res.scan.intensity[i] = noisy.has_intensity() ? noisy.intensity[i] : 0.0;
      res.truth[i] = Label::Noise;
      ++res.injected;
    }
  }
  return res;
}

// ------------------------------------------------------------------ scenes

struct Box {
  std::array<double, 3> min{};
  std::array<double, 3> max{};
  double albedo = 0.5;
};

struct SnowModel {
  int min_count = 500;
  int max_count = 1700;
  double mean_range = 8.0;  ///< exponential radial law [m]
  double min_range = 0.5;   ///< lower truncation of the radial law [m]
};

struct SceneSpec {
  std::optional<double> ground_z = -1.8;  ///< ground plane height below the sensor [m]
  double ground_albedo = 0.3;
  std::vector<Box> boxes;
  SnowModel snow;
  double dropout = 0.0;        ///< probability a return is missing
  double range_sigma = 0.0;    ///< Gaussian range noise [m]
};

namespace detail {

// Ray/box slab test. Returns the entry distance and the hit face normal axis.
inline std::optional<std::pair<double, int>> ray_box(const RayDirection& d, const Box& b) {
  const std::array<double, 3> dir{d.x, d.y, d.z};
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (0.0 < b.min[a] || 0.0 > b.max[a]) return std::nullopt;
      continue;
    }
    double tn = b.min[a] / dir[a];
    double tf = b.max[a] / dir[a];
    if (tn > tf) std::swap(tn, tf);
    if (tn > t0) {
      t0 = tn;
      axis = a;
    }
    t1 = std::min(t1, tf);
    if (t0 > t1) return std::nullopt;
  }
  if (axis < 0) return std::nullopt;  // origin inside the box
  return std::make_pair(t0, axis);
}

inline double gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

/**
 * Ray casts a ground plane and axis-aligned boxes from the sensor origin.
 * With zero dropout and zero range noise every valid pixel holds the exact
 * intersection distance. Intensity is albedo * |cos(incidence)|.
 */
[[nodiscard]] inline RangeImage generate_scene(const SceneSpec& spec, const SensorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  for (const Box& b : spec.boxes)
    for (int a = 0; a < 3; ++a)
      if (!(b.max[a] > b.min[a])) throw std::invalid_argument("generate_scene: box with zero or negative extent");
  if (spec.dropout < 0.0 || spec.dropout >= 1.0) throw std::invalid_argument("generate_scene: dropout must be in [0,1)");

  Rng rng = make_rng(seed, 11);
  RangeImage img = RangeImage::empty_for(cfg);
  img.intensity.assign(img.size(), 0.0);
  for (int v = 0; v < img.rows; ++v)
    for (int u = 0; u < img.cols; ++u) {
      const RayDirection d = pixel_ray(cfg, v, u);
      double best = std::numeric_limits<double>::infinity();
      double cos_inc = 1.0;
      double albedo = 0.0;
      if (spec.ground_z && d.z < 0.0 && *spec.ground_z < 0.0) {
        best = *spec.ground_z / d.z;
        cos_inc = std::abs(d.z);
        albedo = spec.ground_albedo;
      }
      for (const Box& b : spec.boxes) {
        if (auto hit = detail::ray_box(d, b); hit && hit->first < best) {
          best = hit->first;
          const std::array<double, 3> dir{d.x, d.y, d.z};
          cos_inc = std::abs(dir[static_cast<std::size_t>(hit->second)]);
          albedo = b.albedo;
        }
      }
      // The random stream advances identically for every pixel.
      const double drop = uniform01(rng);
      const double jitter = spec.range_sigma > 0.0 ? spec.range_sigma * detail::gaussian(rng) : 0.0;
      if (!std::isfinite(best) || best > cfg.max_range) continue;
      if (drop < spec.dropout) continue;
      const double r = std::clamp(best + jitter, 1e-3, cfg.max_range);
      const std::size_t i = img.index(v, u);
      img.range[i] = r;
      img.valid[i] = 1;
      img.intensity[i] = std::clamp(albedo * cos_inc, 0.0, 1.0);
    }
  return img;
}

/**
 * Places exactly `count` snow returns on distinct uniformly drawn pixels with
 * ranges from an exponential law (mean `mean_range`) truncated to
 * (min_range, max_range). The returned image carries a label plane that is Noise
 * on every return.
 */
[[nodiscard]] inline RangeImage generate_snow(int count, double mean_range, std::uint64_t seed, const SensorConfig& cfg,
                                              double min_range = 0.5) {
  cfg.validate();
  if (count < 0) throw std::invalid_argument("generate_snow: negative count");
  if (!(min_range >= 0.0 && min_range < cfg.max_range) || !(mean_range > 0.0))
    throw std::invalid_argument("generate_snow: bad radial law");
  RangeImage img = RangeImage::empty_for(cfg);
  img.intensity.assign(img.size(), 0.0);
  img.labels.assign(img.size(), Label::Invalid);
  const std::size_t n = img.size();
  if (static_cast<std::size_t>(count) > n) throw std::invalid_argument("generate_snow: more flakes than pixels");
  Rng rng = make_rng(seed, 23);
  // partial Fisher-Yates over pixel indices
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (int k = 0; k < count; ++k) {
    const std::size_t j = static_cast<std::size_t>(k) + uniform_index(rng, n - static_cast<std::size_t>(k));
    std::swap(order[static_cast<std::size_t>(k)], order[j]);
    double r;
    do {
      r = -mean_range * std::log(1.0 - uniform01(rng));
    } while (!(r > min_range && r < cfg.max_range));
    const std::size_t i = order[static_cast<std::size_t>(k)];
    img.range[i] = r;
    img.valid[i] = 1;
    img.intensity[i] = uniform(rng, 0.02, 0.3);
    img.labels[i] = Label::Noise;
  }
  return img;
}

/// Nearest-return composite of a scene and a snow image, as a sensor in snowfall would record it.
[[nodiscard]] inline RangeImage overlay_nearest(const RangeImage& scene, const RangeImage& snow) {
  require_same_shape(scene, snow, "overlay_nearest");
  RangeImage out = scene;
  out.labels.clear();
  if (!out.has_intensity()) out.intensity.assign(out.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!snow.valid[i]) continue;
    if (!out.valid[i] || snow.range[i] < out.range[i]) {
      out.range[i] = snow.range[i];
      out.valid[i] = 1;
      out.intensity[i] = snow.has_intensity() ? snow.intensity[i] : 0.0;
    }
  }
  return out;
}

enum class NoiseLevel { Light, Medium, Heavy, Extreme };

[[nodiscard]] inline const char* to_string(NoiseLevel l) {
  switch (l) {
    case NoiseLevel::Light: return "Light";
    case NoiseLevel::Medium: return "Medium";
    case NoiseLevel::Heavy: return "Heavy";
    case NoiseLevel::Extreme: return "Extreme";
  }
  return "?";
}

[[nodiscard]] inline NoiseLevel noise_level_for_fraction(double f) {
  if (f < 0.02) return NoiseLevel::Light;
  if (f < 0.05) return NoiseLevel::Medium;
  if (f < 0.10) return NoiseLevel::Heavy;
  return NoiseLevel::Extreme;
}

/// Buckets a scan by the fraction of its valid returns that are snow.
[[nodiscard]] inline NoiseLevel stratify_noise_level(const LabelMap& truth) {
  const std::size_t noise = truth.count(Label::Noise);
  const std::size_t clean = truth.count(Label::Clean);
  if (noise + clean == 0) throw std::invalid_argument("stratify_noise_level: no valid pixels");
  return noise_level_for_fraction(static_cast<double>(noise) / static_cast<double>(noise + clean));
}

// ------------------------------------------------------------ street scenes

/// Random street: ground, building facades along the x axis with gaps, parked cars and poles.
[[nodiscard]] inline SceneSpec random_street(std::uint64_t seed) {
  Rng rng = make_rng(seed, 31);
  SceneSpec s;
  s.ground_z = -1.8;
  s.ground_albedo = uniform(rng, 0.2, 0.4);
  const double z0 = *s.ground_z;
  for (int side : {-1, 1}) {
    const double offset = uniform(rng, 6.0, 12.0);
    double x = -70.0;
    while (x < 70.0) {
      const double len = uniform(rng, 8.0, 35.0);
      const double depth = uniform(rng, 0.0, 2.0);
      const double height = uniform(rng, 4.0, 15.0);
      const double y_in = side * (offset + depth);
      Box b;
      b.min = {x, std::min(y_in, y_in + side * 8.0), z0};
      b.max = {x + len, std::max(y_in, y_in + side * 8.0), z0 + height};
      b.albedo = uniform(rng, 0.3, 0.9);
      s.boxes.push_back(b);
      x += len + (uniform01(rng) < 0.4 ? uniform(rng, 2.0, 10.0) : 0.0);
    }
  }
  const int cars = 3 + static_cast<int>(uniform_index(rng, 6));
  for (int c = 0; c < cars; ++c) {
    double cx, cy;
    do {
      cx = uniform(rng, -40.0, 40.0);
      cy = uniform(rng, -4.5, 4.5);
    } while (std::abs(cx) < 4.0 && std::abs(cy) < 2.5);
    const bool along = uniform01(rng) < 0.8;
    const double hl = along ? 2.1 : 0.9, hw = along ? 0.9 : 2.1;
    Box b;
    b.min = {cx - hl, cy - hw, z0};
    b.max = {cx + hl, cy + hw, z0 + uniform(rng, 1.4, 2.2)};
    b.albedo = uniform(rng, 0.2, 0.95);
    s.boxes.push_back(b);
  }
  const int poles = static_cast<int>(uniform_index(rng, 6));
  for (int p = 0; p < poles; ++p) {
    const double px = uniform(rng, -40.0, 40.0);
    const double py = (uniform01(rng) < 0.5 ? -1 : 1) * uniform(rng, 5.0, 6.0);
    Box b;
    b.min = {px - 0.12, py - 0.12, z0};
    b.max = {px + 0.12, py + 0.12, z0 + uniform(rng, 3.0, 6.0)};
    b.albedo = 0.6;
    s.boxes.push_back(b);
  }
  return s;
}

/// Open reference scene for the stationary snow capture: ground and one distant wall.
[[nodiscard]] inline SceneSpec capture_site() {
  SceneSpec s;
  s.ground_z = -1.8;
  Box wall;
  wall.min = {30.0, -40.0, -1.8};
  wall.max = {31.0, 40.0, 8.0};
  s.boxes.push_back(wall);
  return s;
}

/// One synthesized snowy scan plus everything needed to audit it.
struct SnowyScan {
  RangeImage clean;      ///< base scan
  RangeImage noisy;      ///< base with injected snow
  LabelMap truth;        ///< Noise / Clean / Invalid per pixel of `noisy`
  std::size_t injected = 0;
  double noise_fraction = 0.0;
  NoiseLevel level = NoiseLevel::Light;
};

/**
 * Dataset-level synthesis settings. The snow law starts at 3 m, the radius
 * where the lowest beam meets the ground: closer in, a scan holds no scene
 * returns, so a depth bin there would contain snow only.
 */
struct DatasetParams {
  SynthConfig synth;
  SnowModel snow{1080, 2950, 8.0, 3.0};
  double dropout = 0.08;
  double range_sigma = 0.02;
};

/// Full synthesis of scan `index` of a dataset with master seed `seed`.
[[nodiscard]] inline SnowyScan synthesize_scan(std::uint64_t seed, std::uint64_t index, const SensorConfig& sensor,
                                               const DatasetParams& params) {
  const std::uint64_t scan_seed = mix_seed(seed, index);
  SceneSpec street = random_street(scan_seed);
  street.dropout = params.dropout;
  street.range_sigma = params.range_sigma;
  SnowyScan out;
  out.clean = generate_scene(street, sensor, mix_seed(scan_seed, 1));

  Rng rng = make_rng(scan_seed, 2);
  const int lo = params.snow.min_count, hi = std::max(params.snow.min_count, params.snow.max_count);
  const int count = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
  const RangeImage snow =
      generate_snow(count, params.snow.mean_range, mix_seed(scan_seed, 3), sensor, params.snow.min_range);

  SceneSpec site = capture_site();
  site.range_sigma = params.range_sigma;
  const RangeImage reference = generate_scene(site, sensor, mix_seed(scan_seed, 4));
  const RangeImage captured = overlay_nearest(reference, snow);
  const LabelMap capture_labels = extract_noise_labels(captured, reference, params.synth.tau);

  InjectionResult inj = inject_noise(out.clean, captured, capture_labels, params.synth);
  out.noisy = std::move(inj.scan);
  out.truth = std::move(inj.truth);
  out.injected = inj.injected;
  const std::size_t noise = out.truth.count(Label::Noise);
  const std::size_t clean = out.truth.count(Label::Clean);
  out.noise_fraction = noise + clean ? static_cast<double>(noise) / static_cast<double>(noise + clean) : 0.0;
  out.level = noise_level_for_fraction(out.noise_fraction);
  return out;
}

}  // namespace desnow::synth
