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
 * \file train.hpp
 * \brief Joint training of the reconstruction and difficulty networks, and
 *        inference with the trained difficulty network.
 *
 * Every step draws a batch of scans, optionally mirrors them in azimuth,
 * hides a fresh random subset of valid pixels, and minimises the
 * multi-hypothesis Laplace objective over the hidden pixels. In semi mode a
 * cross-entropy term on labelled scans is mixed in by a Schedule.
 *
 * Training may run on azimuth crops to bound the cost per step. The network
 * pads columns circularly, which is only correct on full sweeps, so pixels
 * within the receptive radius of a crop edge are excluded from every loss.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "desnow/core/blank.hpp"
#include "desnow/core/losses.hpp"
#include "desnow/core/model.hpp"
#include "desnow/core/schedule.hpp"
#include "desnow/geom.hpp"
#include "desnow/nn/adam.hpp"
#include "desnow/random.hpp"

namespace desnow::core {

enum class TrainMode { Self, Semi };

struct TrainConfig {
  NetConfig net;
  TrainMode mode = TrainMode::Self;
  Schedule schedule = Schedule::Smooth;
  ScheduleParams schedule_params;
  double blank_ratio = 0.5;
  int steps = 600;
  int batch_size = 1;
  double learning_rate = 3e-3;
  double final_lr_fraction = 0.1;  ///< cosine decay floor, relative to learning_rate
  double rho = 100.0;              ///< meters per normalized range unit
  /// Semi mode only: multiplies the self-supervised term before w_self. At
  /// scale 1 its encoder gradients outweigh the cross-entropy's by 10-60x and
  /// the classifier never leaves the class-prior plateau.
  double self_scale = 0.01;
  bool flip = true;
  int crop_cols = 128;             ///< 0 trains on full sweeps
  std::uint64_t seed = 1;

  void validate() const {
    net.validate();
    if (!(blank_ratio > 0.0 && blank_ratio < 1.0)) throw std::invalid_argument("TrainConfig: blank_ratio must be in (0,1)");
    if (!(rho > 0.0)) throw std::invalid_argument("TrainConfig: rho must be > 0");
    if (steps < 0 || batch_size < 1) throw std::invalid_argument("TrainConfig: bad steps or batch size");
    if (!(self_scale > 0.0)) throw std::invalid_argument("TrainConfig: self_scale must be > 0");
    if (mode == TrainMode::Semi && !net.classifier)
      throw std::invalid_argument("TrainConfig: semi mode needs a classifier head");
  }
};

/// Training scans; `labels[i]` is set only for scans whose labels may be used.
struct TrainingSet {
  std::vector<RangeImage> scans;
  std::vector<std::optional<LabelMap>> labels;

  [[nodiscard]] std::vector<std::size_t> labeled_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i]) out.push_back(i);
    return out;
  }
};

struct LossRecord {
  int step = 0;
  double l_self = 0.0;  ///< mean per hidden pixel
  double l_sup = 0.0;   ///< mean per labelled pixel
  double w_self = 0.0;
  double w_sup = 0.0;
};

struct TrainResult {
  DesnowModel model;
  std::vector<LossRecord> history;
};

/// Receptive radius in pixels of the deepest network head.
[[nodiscard]] inline int receptive_radius(const NetConfig& cfg) { return (1 + 2 * cfg.blocks) * (cfg.kernel / 2); }

namespace detail {

struct Crop {
  RangeImage image;
  std::optional<LabelMap> labels;
  std::vector<std::uint8_t> interior;  ///< 1 where the loss may look
};

inline Crop make_crop(const RangeImage& scan, const std::optional<LabelMap>& labels, int crop_cols, int margin,
                      bool flip, Rng& rng) {
  Crop c;
  const bool full = crop_cols <= 0 || crop_cols >= scan.cols;
  const int w = full ? scan.cols : crop_cols;
  const int c0 = full ? 0 : static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(scan.cols)));
  c.image = RangeImage(scan.rows, w);
  if (labels) c.labels = LabelMap(scan.rows, w);
  c.interior.assign(static_cast<std::size_t>(scan.rows) * w, 1);
  for (int v = 0; v < scan.rows; ++v)
    for (int u = 0; u < w; ++u) {
      const int src_u = (c0 + u) % scan.cols;
      const int dst_u = flip ? w - 1 - u : u;
      const std::size_t s = scan.index(v, src_u);
      const std::size_t d = c.image.index(v, dst_u);
      c.image.range[d] = scan.range[s];
      c.image.valid[d] = scan.valid[s];
      if (labels) (*c.labels)[d] = (*labels)[s];
      if (!full && (u < margin || u >= w - margin)) c.interior[d] = 0;
    }
  return c;
}

}  // namespace detail

/// Cosine decay from lr to lr * floor over training progress t in [0, 1].
[[nodiscard]] inline double learning_rate_at(const TrainConfig& cfg, double t) {
  const double f = cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  return cfg.learning_rate * f;
}

/**
 * Trains a model on `data`. When `init` is given training continues from a
 * copy of it, otherwise from a fresh initialisation seeded by cfg.seed.
 * Deterministic for a fixed configuration. Throws std::runtime_error on a
 * non-finite loss, naming the step and the offending pixel.
 */
[[nodiscard]] inline TrainResult train(const TrainingSet& data, const TrainConfig& cfg,
                                       const DesnowModel* init = nullptr,
                                       const std::function<void(const LossRecord&)>& on_step = {}) {
  cfg.validate();
  if (data.scans.empty()) throw std::invalid_argument("train: no training scans");
  if (!data.labels.empty() && data.labels.size() != data.scans.size())
    throw std::invalid_argument("train: labels must be empty or one slot per scan");
  const std::vector<std::size_t> labeled = data.labeled_indices();
  const bool uses_sup = cfg.mode == TrainMode::Semi;
  if (uses_sup && labeled.empty()) throw std::invalid_argument("train: semi mode without labelled scans");

  TrainResult result{init ? init->clone() : DesnowModel(cfg.net, cfg.seed), {}};
  DesnowModel& model = result.model;
  model.set_resolution(data.scans.front().rows, data.scans.front().cols);
  nn::Adam opt(model.parameters(), {cfg.learning_rate});
  Rng rng = make_rng(cfg.seed, 202);
  const int margin = receptive_radius(model.config());
  const std::optional<LabelMap> no_labels;

  for (int step = 0; step < cfg.steps; ++step) {
    const double t = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 0.0;
    const ScheduleState ws = uses_sup ? schedule(cfg.schedule, t, cfg.schedule_params) : ScheduleState{t, 1.0, 0.0};
    opt.set_learning_rate(learning_rate_at(cfg, t));
    opt.zero_grad();

    LossRecord rec{step, 0.0, 0.0, ws.w_self, ws.w_sup};
    std::vector<nn::Tensor> terms;
    std::vector<double> weights;

    // Random draws happen unconditionally so the stream does not depend on the weights.
    std::vector<detail::Crop> crops;
    std::vector<BlankMask> masks;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = uniform_index(rng, data.scans.size());
      const bool flip = cfg.flip && (rng() & 1U);
      crops.push_back(detail::make_crop(data.scans[idx], no_labels, cfg.crop_cols, margin, flip, rng));
      masks.push_back(sample_blank_mask(crops.back().image.rows, crops.back().image.cols, crops.back().image.valid,
                                        cfg.blank_ratio, rng));
    }
    std::vector<detail::Crop> sup_crops;
    if (uses_sup) {
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t idx = labeled[uniform_index(rng, labeled.size())];
        const bool flip = cfg.flip && (rng() & 1U);
        sup_crops.push_back(detail::make_crop(data.scans[idx], data.labels[idx], cfg.crop_cols, margin, flip, rng));
      }
    }

    if (ws.w_self > 0.0) {
      std::vector<RangeImage> blanked;
      std::vector<const RangeImage*> full_ptrs, blank_ptrs;
      std::vector<std::uint8_t> loss_mask;
      for (std::size_t b = 0; b < crops.size(); ++b) {
        blanked.push_back(blank(crops[b].image, masks[b]));
        for (std::size_t i = 0; i < masks[b].mask.size(); ++i)
          loss_mask.push_back(masks[b].mask[i] && crops[b].interior[i] ? 1 : 0);
      }
      for (std::size_t b = 0; b < crops.size(); ++b) {
        full_ptrs.push_back(&crops[b].image);
        blank_ptrs.push_back(&blanked[b]);
      }
      std::size_t count = 0;
      for (auto m : loss_mask) count += m;
      const nn::Tensor theta = model.reconstruct(encode_input(blank_ptrs, cfg.rho));
      const nn::Tensor phi = model.difficulty(encode_input(full_ptrs, cfg.rho));
      const nn::Tensor target = encode_target(full_ptrs, cfg.rho);
      nn::Tensor l = loss_self_mhl(theta, target, phi, loss_mask);
      if (count > 0) l = nn::scale(l, 1.0 / static_cast<double>(count));
      if (!std::isfinite(l.item())) {
        std::size_t bad = 0;
        for (std::size_t i = 0; i < phi.size(); ++i)
          if (!std::isfinite(phi[i])) {
            bad = i;
            break;
          }
        throw std::runtime_error("train: non-finite self-supervised loss at step " + std::to_string(step) +
                                 ", pixel " + std::to_string(bad));
      }
      rec.l_self = l.item();
      terms.push_back(l);
      weights.push_back(uses_sup ? ws.w_self * cfg.self_scale : ws.w_self);
    }

    if (uses_sup && ws.w_sup > 0.0) {
      std::vector<const RangeImage*> ptrs;
      std::vector<std::uint8_t> targets;
      for (const auto& c : sup_crops) {
        ptrs.push_back(&c.image);
        for (std::size_t i = 0; i < c.image.size(); ++i) {
          const Label l = (*c.labels)[i];
          targets.push_back(!c.interior[i] || l == Label::Invalid ? std::uint8_t{255}
                                                                 : static_cast<std::uint8_t>(l == Label::Noise));
        }
      }
      std::size_t count = 0;
      for (auto v : targets) count += v <= 1 ? 1 : 0;
      nn::Tensor l = nn::cross_entropy_2class(model.classify(encode_input(ptrs, cfg.rho)), targets);
      if (count > 0) l = nn::scale(l, 1.0 / static_cast<double>(count));
      if (!std::isfinite(l.item()))
        throw std::runtime_error("train: non-finite supervised loss at step " + std::to_string(step));
      rec.l_sup = l.item();
      terms.push_back(l);
      weights.push_back(ws.w_sup);
    }

    if (!terms.empty()) {
      nn::Tensor total = nn::weighted_sum(terms, weights);
      total.backward();
      opt.step();
    }
    result.history.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

// ------------------------------------------------------------------ inference

/// Per-pixel scores; `present` is 0 where the pixel had no return.
struct ScoreMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> score;
  std::vector<std::uint8_t> present;

  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;
};

inline void check_resolution(const DesnowModel& model, const RangeImage& img) {
  if (const auto res = model.resolution(); res && (res->first != img.rows || res->second != img.cols)) {
    throw std::invalid_argument("model was trained on " + std::to_string(res->first) + "x" +
                                std::to_string(res->second) + " scans, got " + std::to_string(img.rows) + "x" +
                                std::to_string(img.cols));
  }
}

/// Log-difficulty of every return of an unblanked scan.
[[nodiscard]] inline ScoreMap infer_difficulty(const DesnowModel& model, const RangeImage& img, double rho) {
  check_resolution(model, img);
  ScoreMap out{img.rows, img.cols, std::vector<double>(img.size(), 0.0), img.valid};
  if (img.valid_count() == 0) return out;
  const nn::Tensor phi = model.difficulty(encode_input(img, rho));
  for (std::size_t i = 0; i < img.size(); ++i)
    if (img.valid[i]) out.score[i] = phi[i];
  return out;
}

/// Noise-minus-clean logit of the classifier head for every return.
[[nodiscard]] inline ScoreMap infer_noise_logit(const DesnowModel& model, const RangeImage& img, double rho) {
  check_resolution(model, img);
  ScoreMap out{img.rows, img.cols, std::vector<double>(img.size(), 0.0), img.valid};
  if (img.valid_count() == 0) return out;
  const nn::Tensor z = model.classify(encode_input(img, rho));
  const std::size_t plane = img.size();
  for (std::size_t i = 0; i < plane; ++i)
    if (img.valid[i]) out.score[i] = z[plane + i] - z[i];
  return out;
}

/// Mean over hidden pixels of the best hypothesis' absolute error, in meters.
[[nodiscard]] inline double reconstruction_error(const DesnowModel& model, const std::vector<RangeImage>& scans,
                                                 double blank_ratio, std::uint64_t seed, double rho) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    const BlankMask mask = sample_blank_mask(scans[s], blank_ratio, mix_seed(seed, s));
    const RangeImage hidden = blank(scans[s], mask);
    const nn::Tensor theta = model.reconstruct(encode_input(hidden, rho));
    const nn::ChannelMin c = min_hypothesis_error(theta, encode_target({&scans[s]}, rho));
    for (std::size_t i = 0; i < mask.mask.size(); ++i)
      if (mask.mask[i]) {
        acc += c.value[i] * rho;
        ++n;
      }
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace desnow::core
