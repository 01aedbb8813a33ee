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
 * \file metrics.hpp
 * \brief Noise-class confusion counts, IoU / precision / recall, ROC-AUC and
 *        validation threshold selection. Noise is the positive class.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "desnow/core/train.hpp"
#include "desnow/geom.hpp"

namespace desnow::pipeline {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Metric values are NaN when their denominator is zero.
struct Metrics {
  Confusion counts;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

[[nodiscard]] inline Metrics metrics_from(const Confusion& c) {
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : std::numeric_limits<double>::quiet_NaN();
  };
  return {c, ratio(c.tp, c.tp + c.fp + c.fn), ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn)};
}

/// Confusion counts over pixels where the ground truth is not Invalid.
[[nodiscard]] inline Confusion confusion(const LabelMap& pred, const LabelMap& gt) {
  require_same_shape(pred, gt, "evaluate");
  Confusion c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == Label::Invalid) continue;
    const bool p = pred[i] == Label::Noise;
    const bool g = gt[i] == Label::Noise;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

[[nodiscard]] inline Metrics evaluate(const LabelMap& pred, const LabelMap& gt) {
  const Confusion c = confusion(pred, gt);
  if (c.tp + c.fp + c.fn + c.tn == 0) throw std::invalid_argument("evaluate: no valid pixels");
  return metrics_from(c);
}

/// Scored pixels pooled over scans: (score, is_noise).
using ScoredLabels = std::vector<std::pair<double, bool>>;

inline void append_scored(ScoredLabels& out, const core::ScoreMap& scores, const LabelMap& gt) {
  require_same_shape(scores, gt, "append_scored");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == Label::Invalid || !scores.present[i]) continue;
    out.emplace_back(scores.score[i], gt[i] == Label::Noise);
  }
}

/// Probability that a random Noise pixel outscores a random Clean pixel; ties count one half.
[[nodiscard]] inline double roc_auc(ScoredLabels samples) {
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < samples.size();) {
    std::size_t j = i;
    while (j < samples.size() && samples[j].first == samples[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (samples[k].second) rank_sum += avg_rank;
    i = j;
  }
  for (const auto& s : samples) (s.second ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: needs both classes");
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

/// Confusion counts of "score > threshold" against the pooled labels.
[[nodiscard]] inline Confusion confusion_at(const ScoredLabels& samples, double threshold) {
  Confusion c;
  for (const auto& [s, noise] : samples) {
    const bool p = s > threshold;
    if (p && noise) ++c.tp;
    else if (p) ++c.fp;
    else if (noise) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// `n` evenly spaced thresholds spanning the sample scores.
[[nodiscard]] inline std::vector<double> threshold_grid(const ScoredLabels& samples, int n = 401) {
  if (samples.empty() || n < 1) throw std::invalid_argument("threshold_grid: empty sample");
  double lo = samples.front().first, hi = lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.first);
    hi = std::max(hi, s.first);
  }
  std::vector<double> grid;
  for (int k = 0; k < n; ++k) grid.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
  return grid;
}

struct ThresholdChoice {
  double threshold = 0.0;
  double iou = 0.0;
};

/// Grid threshold maximising pooled IoU; ties resolve to the lowest threshold.
[[nodiscard]] inline ThresholdChoice select_threshold(const ScoredLabels& samples, std::vector<double> grid) {
  if (grid.empty()) throw std::invalid_argument("select_threshold: empty grid");
  bool any_noise = false, any_clean = false;
  for (const auto& s : samples) (s.second ? any_noise : any_clean) = true;
  if (!any_noise || !any_clean) throw std::invalid_argument("select_threshold: validation set needs both classes");

  std::sort(grid.begin(), grid.end());
  // Sort scores once; for each threshold the positives are a suffix.
  std::vector<std::pair<double, bool>> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::size_t> noise_suffix(sorted.size() + 1, 0);
  for (std::size_t i = sorted.size(); i-- > 0;) noise_suffix[i] = noise_suffix[i + 1] + (sorted[i].second ? 1 : 0);
  const std::size_t total_noise = noise_suffix[0];

  ThresholdChoice best{grid.front(), -1.0};
  for (double t : grid) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), t,
                                     [](double v, const auto& e) { return v < e.first; });
    const auto first_pos = static_cast<std::size_t>(it - sorted.begin());
    const std::size_t tp = noise_suffix[first_pos];
    const std::size_t fp = (sorted.size() - first_pos) - tp;
    const std::size_t fn = total_noise - tp;
    const double iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    if (iou > best.iou) best = {t, iou};
  }
  return best;
}

}  // namespace desnow::pipeline
