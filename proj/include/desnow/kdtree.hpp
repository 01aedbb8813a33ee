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
#include <array>
#include <cstddef>
#include <numeric>
#include <vector>

#include "desnow/geom.hpp"

namespace desnow {

/// Squared distance as every neighbor query in this library computes it.
[[nodiscard]] inline double squared_distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

/**
 * \brief Static 3D k-d tree over a point cloud for radius counting.
 *
 * Points within distance r satisfy squared_distance <= r*r. Pruning only
 * discards subtrees whose splitting plane is farther than r, so results are
 * identical to an exhaustive scan. Build is single-owner; queries are const.
 */
class KdTree {
 public:
  explicit KdTree(const PointCloud& cloud) : cloud_(cloud), index_(cloud.size()) {
    std::iota(index_.begin(), index_.end(), std::size_t{0});
    nodes_.reserve(cloud.size() / kLeafSize * 2 + 2);
    if (!cloud.empty()) build(0, cloud.size());
  }

  /// Number of points other than `self` within `radius` of `query`, stopping at `cap`.
  [[nodiscard]] std::size_t count_within(const Point& query, double radius, std::size_t self,
                                         std::size_t cap = static_cast<std::size_t>(-1)) const {
    if (nodes_.empty()) return 0;
    std::size_t found = 0;
    const double r2 = radius * radius;
    std::vector<int> stack{0};
    while (!stack.empty() && found < cap) {
      const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
      stack.pop_back();
      if (n.left < 0) {
        for (std::size_t k = n.begin; k < n.end && found < cap; ++k) {
          const std::size_t j = index_[k];
          if (j != self && squared_distance(query, cloud_[j]) <= r2) ++found;
        }
        continue;
      }
      const double diff = coord(query, n.axis) - n.split;
      // Near side first; far side only if the plane lies within the radius.
      const int near_child = diff <= 0.0 ? n.left : n.right;
      const int far_child = diff <= 0.0 ? n.right : n.left;
      if (diff * diff <= r2) stack.push_back(far_child);
      stack.push_back(near_child);
    }
    return found;
  }

 private:
  static constexpr std::size_t kLeafSize = 16;

  struct Node {
    std::size_t begin = 0, end = 0;
    int axis = 0;
    double split = 0.0;
    int left = -1, right = -1;
  };

  static double coord(const Point& p, int axis) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); }

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0.0, -1, -1});
    if (end - begin <= kLeafSize) return id;

    // split on the axis of largest extent
    std::array<double, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = hi[a] = coord(cloud_[index_[begin]], a);
    }
    for (std::size_t k = begin; k < end; ++k)
      for (int a = 0; a < 3; ++a) {
        const double v = coord(cloud_[index_[k]], a);
        lo[a] = std::min(lo[a], v);
        hi[a] = std::max(hi[a], v);
      }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(begin), index_.begin() + static_cast<std::ptrdiff_t>(mid),
                     index_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                       return coord(cloud_[a], axis) < coord(cloud_[b], axis);
                     });
    const double split = coord(cloud_[index_[mid]], axis);
    // left holds coord <= split, right holds coord >= split
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].axis = axis;
    nodes_[static_cast<std::size_t>(id)].split = split;
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  const PointCloud& cloud_;
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace desnow
