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

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace desnow::core {

/**
 * Weighting of the self-supervised and supervised objectives over training.
 *
 * - Ramp: supervised weight 1 throughout; self weight rises along a Gaussian
 *   ramp exp(-5 (1 - t/w)^2) over the first `window`, holds at 1, and falls
 *   along the mirrored ramp over the last `window`.
 * - Pretrain: self-supervised only before `switch_at`, supervised only after.
 * - Smooth: supervised weight s(t) = 3x^2 - 2x^3 with x = (t - a) / (b - a)
 *   clamped to [0, 1]; self weight 1 - s(t).
 * - SupervisedOnly: (0, 1) throughout; the label-only baseline.
 */
enum class Schedule { Ramp, Pretrain, Smooth, SupervisedOnly };

struct ScheduleParams {
  double ramp_window = 0.2;
  double switch_at = 0.5;
  double smooth_begin = 0.2;
  double smooth_end = 0.8;
};

struct ScheduleState {
  double t = 0.0;
  double w_self = 1.0;
  double w_sup = 0.0;
};

[[nodiscard]] inline ScheduleState schedule(Schedule mode, double t, const ScheduleParams& p = {}) {
  t = std::clamp(t, 0.0, 1.0);
  ScheduleState s{t, 1.0, 0.0};
  switch (mode) {
    case Schedule::Ramp: {
      s.w_sup = 1.0;
      const double w = p.ramp_window;
      if (t < w) {
        const double x = 1.0 - t / w;
        s.w_self = std::exp(-5.0 * x * x);
      } else if (t > 1.0 - w) {
        const double x = 1.0 - (1.0 - t) / w;
        s.w_self = std::exp(-5.0 * x * x);
      } else {
        s.w_self = 1.0;
      }
      break;
    }
    case Schedule::Pretrain:
      s.w_self = t < p.switch_at ? 1.0 : 0.0;
      s.w_sup = t < p.switch_at ? 0.0 : 1.0;
      break;
    case Schedule::Smooth: {
      const double x = std::clamp((t - p.smooth_begin) / (p.smooth_end - p.smooth_begin), 0.0, 1.0);
      s.w_sup = x * x * (3.0 - 2.0 * x);
      s.w_self = 1.0 - s.w_sup;
      break;
    }
    case Schedule::SupervisedOnly:
      s.w_self = 0.0;
      s.w_sup = 1.0;
      break;
  }
  return s;
}

[[nodiscard]] inline Schedule parse_schedule(std::string_view name) {
  if (name == "ramp") return Schedule::Ramp;
  if (name == "pretrain") return Schedule::Pretrain;
  if (name == "smooth") return Schedule::Smooth;
  if (name == "supervised") return Schedule::SupervisedOnly;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

[[nodiscard]] inline const char* to_string(Schedule s) {
  switch (s) {
    case Schedule::Ramp: return "ramp";
    case Schedule::Pretrain: return "pretrain";
    case Schedule::Smooth: return "smooth";
    case Schedule::SupervisedOnly: return "supervised";
  }
  return "?";
}

}  // namespace desnow::core
