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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "desnow/geom.hpp"
#include "desnow/random.hpp"

namespace desnow::core {

/// Reconstruction targets: true on the valid pixels hidden from the reconstructor.
struct BlankMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> mask;

  [[nodiscard]] std::size_t count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
  }
  friend bool operator==(const BlankMask&, const BlankMask&) = default;
};

/// Number of targets drawn from `valid` pixels at `ratio`, rounding half up.
[[nodiscard]] inline std::size_t blank_count(std::size_t valid, double ratio) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(valid) + 0.5));
}

/// Draws round(ratio * #valid) valid pixels uniformly without replacement.
[[nodiscard]] inline BlankMask sample_blank_mask(int rows, int cols, const std::vector<std::uint8_t>& validity,
                                                 double ratio, Rng& rng) {
  if (validity.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("sample_blank_mask: validity plane has the wrong size");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("sample_blank_mask: ratio must be in [0,1]");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < validity.size(); ++i)
    if (validity[i]) candidates.push_back(i);
  BlankMask out{rows, cols, std::vector<std::uint8_t>(validity.size(), 0)};
  const std::size_t k = blank_count(candidates.size(), ratio);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(uniform_index(rng, candidates.size() - j));
    std::swap(candidates[j], candidates[pick]);
    out.mask[candidates[j]] = 1;
  }
  return out;
}

[[nodiscard]] inline BlankMask sample_blank_mask(const RangeImage& img, double ratio, std::uint64_t seed) {
  Rng rng = make_rng(seed, 41);
  return sample_blank_mask(img.rows, img.cols, img.valid, ratio, rng);
}

/// Hides the masked pixels: range 0 and validity cleared. Other pixels are untouched.
[[nodiscard]] inline RangeImage blank(const RangeImage& img, const BlankMask& mask) {
  require_same_shape(img, mask, "blank");
  RangeImage out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.mask[i]) continue;
    if (!img.valid[i]) throw std::invalid_argument("blank: mask selects an invalid pixel");
    out.invalidate(i);
  }
  return out;
}

[[nodiscard]] inline BlankMask flip_horizontal(const BlankMask& m) {
  BlankMask out = m;
  for (int v = 0; v < m.rows; ++v)
    for (int u = 0; u < m.cols; ++u)
      out.mask[static_cast<std::size_t>(v) * m.cols + u] = m.mask[static_cast<std::size_t>(v) * m.cols + (m.cols - 1 - u)];
  return out;
}

}  // namespace desnow::core
