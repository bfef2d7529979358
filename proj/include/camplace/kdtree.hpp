#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "camplace/geometry.hpp"

namespace camplace {

/// Static 3-d tree over a borrowed point array. Queries are exact; among
/// equidistant candidates the lower index wins.
class KdTree {
 public:
  struct Neighbor {
    double squared_distance;
    std::size_t index;
    bool operator<(const Neighbor& o) const {
      return squared_distance < o.squared_distance ||
             (squared_distance == o.squared_distance && index < o.index);
    }
  };

  explicit KdTree(std::span<const Vec3> points) : points_(points), order_(points.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!order_.empty()) {
      nodes_.reserve(2 * order_.size() / kLeafSize + 2);
      build(0, order_.size());
    }
  }

  /// The k nearest points to `query` sorted by (distance, index), optionally
  /// skipping one index.
  std::vector<Neighbor> nearest(const Vec3& query, std::size_t k,
                                std::size_t exclude = kNone) const {
    std::vector<Neighbor> best;
    if (k == 0 || nodes_.empty()) return best;
    best.reserve(k + 1);
    search(0, query, k, exclude, best);
    return best;
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin, end;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::uint32_t left = 0, right = 0;
    Aabb box;
  };

  static double coord(const Vec3& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end, -1, 0.0, 0, 0, Aabb{}});
    Aabb box = Aabb::of_point(points_[order_[begin]]);
    for (std::size_t i = begin + 1; i < end; ++i) box.expand(points_[order_[i]]);
    nodes_[id].box = box;
    if (end - begin <= kLeafSize) return id;

    const Vec3 e = box.extent();
    const int axis = (e.x >= e.y && e.x >= e.z) ? 0 : (e.y >= e.z ? 1 : 2);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       return coord(points_[a], axis) < coord(points_[b], axis);
                     });
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = coord(points_[order_[mid]], axis);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_squared_distance(const Aabb& b, const Vec3& q) {
    const double dx = std::max({b.min.x - q.x, 0.0, q.x - b.max.x});
    const double dy = std::max({b.min.y - q.y, 0.0, q.y - b.max.y});
    const double dz = std::max({b.min.z - q.z, 0.0, q.z - b.max.z});
    return dx * dx + dy * dy + dz * dz;
  }

  void search(std::uint32_t id, const Vec3& q, std::size_t k, std::size_t exclude,
              std::vector<Neighbor>& best) const {
    const Node& node = nodes_[id];
    // Strict comparison keeps equidistant subtrees alive for the index tie-break.
    if (best.size() == k && box_squared_distance(node.box, q) > best.back().squared_distance) {
      return;
    }
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == exclude) continue;
        const Neighbor cand{squared_distance(points_[idx], q), idx};
        if (best.size() < k) {
          best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        } else if (cand < best.back()) {
          best.pop_back();
          best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        }
      }
      return;
    }
    const bool go_left_first = coord(q, node.axis) < node.split;
    search(go_left_first ? node.left : node.right, q, k, exclude, best);
    search(go_left_first ? node.right : node.left, q, k, exclude, best);
  }

  std::span<const Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace camplace
