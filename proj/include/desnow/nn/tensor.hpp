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
 * \file tensor.hpp
 * \brief Reference-counted 64-bit tensor with a reverse-mode gradient tape.
 *
 * A Tensor is a cheap handle onto a graph node. Operations in ops.hpp and
 * conv.hpp create new nodes that remember their parents and a closure that
 * pushes the node's gradient back into the parents. Calling backward() on a
 * scalar walks the graph in reverse topological order.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace desnow::nn {

/// Batch, channel, row, column extents. Lower-rank tensors use trailing ones.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  [[nodiscard]] std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
  }
  friend bool operator==(const Shape&, const Shape&) = default;

  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
  }
};

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    node_->shape = shape;
    node_->value.assign(shape.size(), fill);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (values.size() != shape.size()) {
      throw std::invalid_argument("Tensor: value count does not match shape " + shape.str());
    }
    node_->shape = shape;
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor scalar(double v, bool requires_grad = false) { return Tensor(Shape{}, v, requires_grad); }

  [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::size_t size() const { return node_->value.size(); }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }

  [[nodiscard]] std::span<double> values() { return node_->value; }
  [[nodiscard]] std::span<const double> values() const { return node_->value; }
  [[nodiscard]] double item() const {
    if (size() != 1) throw std::logic_error("Tensor::item on non-scalar tensor " + shape().str());
    return node_->value[0];
  }
  double& operator[](std::size_t i) { return node_->value[i]; }
  double operator[](std::size_t i) const { return node_->value[i]; }

  /// Gradient buffer; zeros when nothing has been accumulated yet.
  [[nodiscard]] std::span<const double> grad() const { return node_->grad_buffer(); }
  [[nodiscard]] std::span<double> grad_mut() { return node_->grad_buffer(); }
  /// False until a backward pass reaches this tensor after the last zero_grad().
  [[nodiscard]] bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  /// Drops the gradient, so has_grad() is false until the next backward pass.
  void zero_grad() { node_->grad.clear(); }

  /// Copy of the values without any graph history.
  [[nodiscard]] Tensor detach() const { return Tensor(shape(), node_->value, false); }

  /// Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1.
  void backward() {
    if (size() != 1) throw std::logic_error("backward() requires a scalar root, got " + shape().str());
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    // Iterative post-order DFS; graphs here are a few hundred nodes deep.
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        detail::Node* p = node->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backward) {
        (*it)->grad_buffer();
        (*it)->backward(**it);
      }
    }
  }

  // Graph construction helpers used by the op implementations.
  [[nodiscard]] const std::shared_ptr<detail::Node>& node() const { return node_; }

  static Tensor make_result(Shape shape, std::vector<std::shared_ptr<detail::Node>> parents,
                            std::function<void(detail::Node&)> backward_fn) {
    Tensor out(shape);
    bool any = false;
    for (const auto& p : parents) any = any || p->requires_grad;
    if (any) {
      out.node_->requires_grad = true;
      out.node_->parents = std::move(parents);
      out.node_->backward = std::move(backward_fn);
    }
    return out;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Throws if any value is NaN or infinite. `where` names the producing op.
inline void check_finite(const Tensor& t, const char* where) {
  const auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw std::domain_error(std::string("non-finite value produced by ") + where + " at flat index " +
                              std::to_string(i));
    }
  }
}

}  // namespace desnow::nn
