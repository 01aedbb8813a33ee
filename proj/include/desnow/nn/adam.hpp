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
#include <stdexcept>
#include <vector>

#include "desnow/nn/tensor.hpp"

namespace desnow::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Holds handles to the parameters it updates.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
    steps_.assign(params_.size(), 0);
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Applies one update from the gradients currently stored on the parameters.
  /// Tensors the last backward pass did not reach are skipped, moments and
  /// step count included, so a head that joins training late starts fresh.
  void step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!params_[i].has_grad()) continue;
      const long t = ++steps_[i];
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
      auto value = params_[i].values();
      const auto grad = params_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < value.size(); ++j) {
        const double g = grad[j];
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m[j] / bc1;
        const double v_hat = v[j] / bc2;
        value[j] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
      }
    }
  }

  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  [[nodiscard]] long step_count() const { return t_; }
  [[nodiscard]] const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<long> steps_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace desnow::nn
