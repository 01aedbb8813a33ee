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
 * \file losses.hpp
 * \brief Reconstruction-difficulty objectives.
 *
 * For a reconstruction error C and a predicted log-difficulty phi, every
 * masked pixel contributes
 *
 *     sqrt(2) * C / exp(phi) + phi,
 *
 * the negative log-likelihood of a Laplace distribution with scale
 * exp(phi) / sqrt(2), up to a constant. With several hypotheses C is the
 * smallest absolute error among them and only that hypothesis receives
 * gradient.
 */
#pragma once

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "desnow/nn/ops.hpp"

namespace desnow::core {

/// Log-difficulty is clamped to this interval before exponentiation.
inline constexpr double kPhiMin = -10.0;
inline constexpr double kPhiMax = 10.0;

/// Per-pixel C = min_k |theta^k - target|, with the winning hypothesis index per pixel.
[[nodiscard]] inline nn::ChannelMin min_hypothesis_error(const nn::Tensor& hypotheses, const nn::Tensor& target) {
  const nn::Shape hs = hypotheses.shape();
  const nn::Shape ts = target.shape();
  if (ts.c != 1 || ts.n != hs.n || ts.h != hs.h || ts.w != hs.w)
    throw std::invalid_argument("min_hypothesis_error: target must be (n,1,h,w) matching " + hs.str());
  return nn::channel_min(nn::abs(nn::sub(hypotheses, nn::repeat_channels(target, hs.c))));
}

/// Per-pixel sqrt(2) * C * exp(-phi) + phi with phi clamped to [kPhiMin, kPhiMax].
[[nodiscard]] inline nn::Tensor laplace_nll_terms(const nn::Tensor& error, const nn::Tensor& phi) {
  const nn::Tensor phi_c = nn::clamp(phi, kPhiMin, kPhiMax);
  const nn::Tensor inv_scale = nn::exp(nn::scale(phi_c, -1.0));
  return nn::add(nn::scale(nn::mul(error, inv_scale), std::numbers::sqrt2), phi_c);
}

/// Single-hypothesis objective summed over masked pixels. An empty mask gives 0.
[[nodiscard]] inline nn::Tensor loss_self(const nn::Tensor& reconstruction, const nn::Tensor& target,
                                          const nn::Tensor& phi, const std::vector<std::uint8_t>& mask) {
  if (reconstruction.shape().c != 1) throw std::invalid_argument("loss_self: expects a single hypothesis");
  if (!(reconstruction.shape() == target.shape()) || !(phi.shape() == target.shape()))
    throw std::invalid_argument("loss_self: shape mismatch");
  const nn::Tensor err = nn::abs(nn::sub(reconstruction, target));
  return nn::masked_sum(laplace_nll_terms(err, phi), mask);
}

/// Multi-hypothesis objective: loss_self with |theta - R| replaced by the winning hypothesis error.
[[nodiscard]] inline nn::Tensor loss_self_mhl(const nn::Tensor& hypotheses, const nn::Tensor& target,
                                              const nn::Tensor& phi, const std::vector<std::uint8_t>& mask) {
  if (!(phi.shape() == target.shape())) throw std::invalid_argument("loss_self_mhl: phi/target shape mismatch");
  const nn::ChannelMin c = min_hypothesis_error(hypotheses, target);
  return nn::masked_sum(laplace_nll_terms(c.value, phi), mask);
}

/// w_self * self + w_sup * sup.
[[nodiscard]] inline nn::Tensor loss_semi(const nn::Tensor& self_loss, const nn::Tensor& sup_loss, double w_self,
                                          double w_sup) {
  if (w_self < 0.0 || w_sup < 0.0) throw std::invalid_argument("loss_semi: weights must be nonnegative");
  return nn::weighted_sum({self_loss, sup_loss}, {w_self, w_sup});
}

}  // namespace desnow::core
