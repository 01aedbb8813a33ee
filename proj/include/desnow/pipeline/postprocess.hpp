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
 * \file postprocess.hpp
 * \brief Depth-binned percentile shift of difficulty scores and thresholding.
 *
 * Reconstruction difficulty grows with distance because far returns are
 * sparser. Scores are grouped into depth bins of `bin_width` meters and each
 * bin is shifted down by a low nearest-rank percentile of its own scores, so
 * a single threshold applies at every depth.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "desnow/core/train.hpp"
#include "desnow/geom.hpp"

namespace desnow::pipeline {

using core::ScoreMap;

struct ShiftConfig {
  double bin_width = 1.0;       ///< [m]
  int percentile = 20;          ///< nearest-rank; 0 selects the bin minimum
  std::size_t min_bin_points = 5;  ///< sparser bins borrow the nearest populated bin's shift

  void validate() const {
    if (!(bin_width > 0.0)) throw std::invalid_argument("ShiftConfig: bin width must be > 0");
    if (percentile < 0 || percentile > 100) throw std::invalid_argument("ShiftConfig: percentile must be in [0,100]");
  }
};

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (the minimum for p = 0).
[[nodiscard]] inline double nearest_rank(std::vector<double> values, int percentile) {
  if (values.empty()) throw std::invalid_argument("nearest_rank: empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  // integer arithmetic avoids 0.2 * 5 rounding above 1
  std::size_t rank = (static_cast<std::size_t>(percentile) * n + 99) / 100;
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

/// Per-bin shift values keyed by bin index, after the sparse-bin fallback.
[[nodiscard]] inline std::map<long, double> bin_shifts(const ScoreMap& scores, const RangeImage& ranges,
                                                       const ShiftConfig& cfg) {
  cfg.validate();
  require_same_shape(scores, ranges, "percentile_shift");
  std::map<long, std::vector<double>> bins;
  for (std::size_t i = 0; i < scores.score.size(); ++i) {
    if (!scores.present[i] || !ranges.valid[i]) continue;
    bins[static_cast<long>(std::floor(ranges.range[i] / cfg.bin_width))].push_back(scores.score[i]);
  }
  std::map<long, double> populated;
  for (const auto& [bin, values] : bins)
    if (values.size() >= cfg.min_bin_points) populated[bin] = nearest_rank(values, cfg.percentile);

  std::map<long, double> shifts;
  for (const auto& [bin, values] : bins) {
    if (auto it = populated.find(bin); it != populated.end()) {
      shifts[bin] = it->second;
      continue;
    }
    if (populated.empty()) {
      shifts[bin] = nearest_rank(values, cfg.percentile);
      continue;
    }
    // nearest populated bin; ties go to the nearer-to-sensor bin
    auto hi = populated.lower_bound(bin);
    if (hi == populated.end()) {
      shifts[bin] = std::prev(hi)->second;
    } else if (hi == populated.begin()) {
      shifts[bin] = hi->second;
    } else {
      auto lo = std::prev(hi);
      shifts[bin] = (bin - lo->first) <= (hi->first - bin) ? lo->second : hi->second;
    }
  }
  return shifts;
}

/// Subtracts each depth bin's shift from the scores in that bin.
[[nodiscard]] inline ScoreMap percentile_shift(const ScoreMap& scores, const RangeImage& ranges, const ShiftConfig& cfg) {
  const auto shifts = bin_shifts(scores, ranges, cfg);
  ScoreMap out = scores;
  for (std::size_t i = 0; i < out.score.size(); ++i) {
    if (!out.present[i] || !ranges.valid[i]) continue;
    out.score[i] -= shifts.at(static_cast<long>(std::floor(ranges.range[i] / cfg.bin_width)));
  }
  return out;
}

/// Noise where the score exceeds the threshold; pixels without a score stay Invalid.
[[nodiscard]] inline LabelMap classify(const ScoreMap& scores, double threshold) {
  if (std::isnan(threshold)) throw std::invalid_argument("classify: threshold is NaN");
  LabelMap out(scores.rows, scores.cols, Label::Invalid);
  for (std::size_t i = 0; i < scores.score.size(); ++i)
    if (scores.present[i]) out[i] = scores.score[i] > threshold ? Label::Noise : Label::Clean;
  return out;
}

}  // namespace desnow::pipeline
