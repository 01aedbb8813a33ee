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
 * \file ops.hpp
 * \brief Differentiable element-wise ops, channel reductions and losses.
 *
 * Only the handful of ops the reconstruction losses and residual networks
 * need. No broadcasting beyond the explicit repeat_channels().
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "desnow/nn/tensor.hpp"

namespace desnow::nn {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
  }
}

// Adds `g` into the parent gradient when the parent tracks gradients.
template <typename F>
void accumulate(Node& parent, F&& per_index) {
  if (!parent.requires_grad) return;
  auto& pg = parent.grad_buffer();
  for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += per_index(i);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = Tensor::make_result(a.shape(), {a.node(), b.node()}, [](detail::Node& self) {
    const auto& g = self.grad;
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return g[i]; });
    detail::accumulate(*self.parents[1], [&](std::size_t i) { return g[i]; });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out = Tensor::make_result(a.shape(), {a.node(), b.node()}, [](detail::Node& self) {
    const auto& g = self.grad;
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return g[i]; });
    detail::accumulate(*self.parents[1], [&](std::size_t i) { return -g[i]; });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] - b[i];
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = Tensor::make_result(a.shape(), {a.node(), b.node()}, [](detail::Node& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return g[i] * bv[i]; });
    detail::accumulate(*self.parents[1], [&](std::size_t i) { return g[i] * av[i]; });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] * b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::make_result(a.shape(), {a.node()}, [s](detail::Node& self) {
    const auto& g = self.grad;
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return s * g[i]; });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = s * a[i];
  return out;
}

inline Tensor exp(const Tensor& a) {
  Tensor out = Tensor::make_result(a.shape(), {a.node()}, [](detail::Node& self) {
    const auto& g = self.grad;
    const auto& y = self.value;
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return g[i] * y[i]; });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::exp(a[i]);
  check_finite(out, "exp");
  return out;
}

/// |a| with subgradient 0 at 0.
inline Tensor abs(const Tensor& a) {
  Tensor out = Tensor::make_result(a.shape(), {a.node()}, [](detail::Node& self) {
    const auto& g = self.grad;
    const auto& x = self.parents[0]->value;
    detail::accumulate(*self.parents[0], [&](std::size_t i) {
      return x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
    });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::abs(a[i]);
  return out;
}

inline Tensor leaky_relu(const Tensor& a, double slope = 0.1) {
  Tensor out = Tensor::make_result(a.shape(), {a.node()}, [slope](detail::Node& self) {
    const auto& g = self.grad;
    const auto& x = self.parents[0]->value;
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return x[i] > 0.0 ? g[i] : slope * g[i]; });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] > 0.0 ? a[i] : slope * a[i];
  return out;
}

/// Clamp into [lo, hi]; gradient passes only strictly inside the interval or on it.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  Tensor out = Tensor::make_result(a.shape(), {a.node()}, [lo, hi](detail::Node& self) {
    const auto& g = self.grad;
    const auto& x = self.parents[0]->value;
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return (x[i] >= lo && x[i] <= hi) ? g[i] : 0.0; });
  });
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(a[i], lo, hi);
  return out;
}

/// Tiles a single-channel tensor `k` times along the channel axis.
inline Tensor repeat_channels(const Tensor& a, int k) {
  const Shape s = a.shape();
  if (s.c != 1) throw std::invalid_argument("repeat_channels: expects one channel, got " + s.str());
  const Shape os{s.n, k, s.h, s.w};
  const std::size_t plane = s.plane();
  Tensor out = Tensor::make_result(os, {a.node()}, [k, plane](detail::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    auto& pg = parent.grad_buffer();
    const auto& g = self.grad;
    const std::size_t batches = pg.size() / plane;
    for (std::size_t b = 0; b < batches; ++b)
      for (int c = 0; c < k; ++c)
        for (std::size_t i = 0; i < plane; ++i) pg[b * plane + i] += g[(b * k + c) * plane + i];
  });
  auto o = out.values();
  for (int b = 0; b < s.n; ++b)
    for (int c = 0; c < k; ++c)
      std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(b * plane), plane,
                  o.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b) * k + c) * plane));
  return out;
}

/// Result of a per-pixel minimum over channels.
struct ChannelMin {
  Tensor value;                  ///< (n, 1, h, w)
  std::vector<int> argmin;       ///< winning channel per pixel; ties resolve to the lowest index
};

/// Per-pixel minimum across channels. The gradient flows only into the argmin channel.
inline ChannelMin channel_min(const Tensor& a) {
  const Shape s = a.shape();
  const Shape os{s.n, 1, s.h, s.w};
  const std::size_t plane = s.plane();
  std::vector<int> arg(static_cast<std::size_t>(s.n) * plane, 0);
  std::vector<double> best(arg.size());
  const auto v = a.values();
  for (int b = 0; b < s.n; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t base = static_cast<std::size_t>(b) * s.c * plane + i;
      double m = v[base];
      int k_best = 0;
      for (int c = 1; c < s.c; ++c) {
        const double x = v[base + c * plane];
        if (x < m) {
          m = x;
          k_best = c;
        }
      }
      best[b * plane + i] = m;
      arg[b * plane + i] = k_best;
    }
  }
  const int channels = s.c;
  Tensor out = Tensor::make_result(os, {a.node()}, [arg, plane, channels](detail::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    auto& pg = parent.grad_buffer();
    const auto& g = self.grad;
    for (std::size_t j = 0; j < arg.size(); ++j) {
      const std::size_t b = j / plane;
      const std::size_t i = j % plane;
      pg[(b * channels + static_cast<std::size_t>(arg[j])) * plane + i] += g[j];
    }
  });
  std::copy(best.begin(), best.end(), out.values().begin());
  return {out, std::move(arg)};
}

/// Sum of the entries whose mask byte is nonzero. Mask length equals a.size().
inline Tensor masked_sum(const Tensor& a, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != a.size()) throw std::invalid_argument("masked_sum: mask size mismatch");
  Tensor out = Tensor::make_result(Shape{}, {a.node()}, [mask](detail::Node& self) {
    const double g = self.grad[0];
    detail::accumulate(*self.parents[0], [&](std::size_t i) { return mask[i] ? g : 0.0; });
  });
  double acc = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) acc += a[i];
  out[0] = acc;
  return out;
}

/// Masked mean; an all-false mask yields 0 with zero gradients.
inline Tensor masked_mean(const Tensor& a, const std::vector<std::uint8_t>& mask) {
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  Tensor s = masked_sum(a, mask);
  return count == 0 ? s : scale(s, 1.0 / static_cast<double>(count));
}

inline Tensor sum(const Tensor& a) { return masked_sum(a, std::vector<std::uint8_t>(a.size(), 1)); }

/// Weighted sum of scalar tensors: sum_i w_i * t_i.
inline Tensor weighted_sum(const std::vector<Tensor>& terms, const std::vector<double>& weights) {
  if (terms.size() != weights.size() || terms.empty()) throw std::invalid_argument("weighted_sum: bad arity");
  std::vector<std::shared_ptr<detail::Node>> parents;
  for (const auto& t : terms) {
    if (t.size() != 1) throw std::invalid_argument("weighted_sum: terms must be scalars");
    parents.push_back(t.node());
  }
  Tensor out = Tensor::make_result(Shape{}, parents, [weights](detail::Node& self) {
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.parents.size(); ++i)
      detail::accumulate(*self.parents[i], [&](std::size_t) { return weights[i] * g; });
  });
  double acc = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) acc += weights[i] * terms[i].item();
  out[0] = acc;
  return out;
}

/// Sum of per-pixel two-class cross entropy over pixels whose target is 0 or 1.
/// `logits` is (n, 2, h, w); `targets` holds one byte per pixel, any other value is ignored.
inline Tensor cross_entropy_2class(const Tensor& logits, const std::vector<std::uint8_t>& targets) {
  const Shape s = logits.shape();
  if (s.c != 2) throw std::invalid_argument("cross_entropy_2class: expects 2 channels, got " + s.str());
  const std::size_t plane = s.plane();
  if (targets.size() != static_cast<std::size_t>(s.n) * plane)
    throw std::invalid_argument("cross_entropy_2class: target size mismatch");
  const auto v = logits.values();
  // softmax probabilities cached for the backward pass
  std::vector<double> p1(targets.size(), 0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const std::size_t b = j / plane;
    const std::size_t i = j % plane;
    const double z0 = v[(b * 2) * plane + i];
    const double z1 = v[(b * 2 + 1) * plane + i];
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    p1[j] = std::exp(z1 - lse);
    if (targets[j] == 0) acc += lse - z0;
    if (targets[j] == 1) acc += lse - z1;
  }
  Tensor out = Tensor::make_result(Shape{}, {logits.node()}, [targets, p1, plane](detail::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    auto& pg = parent.grad_buffer();
    const double g = self.grad[0];
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (targets[j] > 1) continue;
      const std::size_t b = j / plane;
      const std::size_t i = j % plane;
      const double y1 = targets[j] == 1 ? 1.0 : 0.0;
      // d/dz1 = p1 - y1, d/dz0 = (1 - p1) - (1 - y1)
      pg[(b * 2 + 1) * plane + i] += g * (p1[j] - y1);
      pg[(b * 2) * plane + i] += g * (y1 - p1[j]);
    }
  });
  out[0] = acc;
  return out;
}

/// Reverses the column order of every row (azimuth reversal). Involution.
inline Tensor flip_columns(const Tensor& a) {
  const Shape s = a.shape();
  const int w = s.w;
  Tensor out = Tensor::make_result(s, {a.node()}, [w](detail::Node& self) {
    auto& parent = *self.parents[0];
    if (!parent.requires_grad) return;
    auto& pg = parent.grad_buffer();
    const auto& g = self.grad;
    for (std::size_t r = 0; r < pg.size() / w; ++r)
      for (int x = 0; x < w; ++x) pg[r * w + x] += g[r * w + (w - 1 - x)];
  });
  auto o = out.values();
  for (std::size_t r = 0; r < o.size() / w; ++r)
    for (int x = 0; x < w; ++x) o[r * w + x] = a[r * w + (w - 1 - x)];
  return out;
}

}  // namespace desnow::nn
