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

#include "desnow/nn/conv.hpp"
#include "desnow/nn/ops.hpp"
#include "desnow/random.hpp"

namespace desnow::nn {

/// Slope of the negative half of every activation in the networks.
inline constexpr double kLeakySlope = 0.1;

/// 2D convolution with odd kernels, stride 1, circular horizontal padding.
class ConvLayer {
 public:
  ConvLayer() = default;

  /// Fan-in scaled uniform initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero bias.
  ConvLayer(int in_ch, int out_ch, int kernel, Rng& rng, double init_gain = 1.0)
      : weight_(Shape{out_ch, in_ch, kernel, kernel}, 0.0, true), bias_(Shape{1, out_ch, 1, 1}, 0.0, true) {
    if (kernel % 2 == 0 || kernel < 1) throw std::invalid_argument("ConvLayer: kernel size must be odd");
    if (in_ch < 1 || out_ch < 1) throw std::invalid_argument("ConvLayer: channel counts must be positive");
    const double bound = init_gain / std::sqrt(static_cast<double>(in_ch) * kernel * kernel);
    for (double& v : weight_.values()) v = uniform(rng, -bound, bound);
  }

  [[nodiscard]] Tensor forward(const Tensor& x) const { return conv2d(x, weight_, bias_); }

  [[nodiscard]] int in_channels() const { return weight_.shape().c; }
  [[nodiscard]] int out_channels() const { return weight_.shape().n; }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  [[nodiscard]] const Tensor& weight() const { return weight_; }
  [[nodiscard]] const Tensor& bias() const { return bias_; }

  void collect(std::vector<Tensor>& out) const {
    out.push_back(weight_);
    out.push_back(bias_);
  }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// y = lrelu(x + conv2(lrelu(conv1(x)))).
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(int channels, int kernel, Rng& rng)
      : conv1_(channels, channels, kernel, rng), conv2_(channels, channels, kernel, rng, 0.5) {}

  [[nodiscard]] Tensor forward(const Tensor& x) const {
    Tensor h = leaky_relu(conv1_.forward(x), kLeakySlope);
    return leaky_relu(add(x, conv2_.forward(h)), kLeakySlope);
  }

  void collect(std::vector<Tensor>& out) const {
    conv1_.collect(out);
    conv2_.collect(out);
  }

 private:
  ConvLayer conv1_;
  ConvLayer conv2_;
};

}  // namespace desnow::nn
