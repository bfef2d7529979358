#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "camplace/error.hpp"
#include "camplace/geometry.hpp"
#include "camplace/kdtree.hpp"
#include "camplace/random.hpp"

namespace camplace {

using Rgb = std::array<std::uint8_t, 3>;

std::vector<double> nearest_neighbor_distances(std::span<const Vec3> points);

/// Scene geometry. Points are immutable after construction; the per-point
/// nearest-neighbour distance is computed on first use and shared between
/// copies, so a cloud may be read from several threads.
class PointCloud {
 public:
  PointCloud() : nn_(std::make_shared<NnCache>()) {}

  explicit PointCloud(std::vector<Vec3> points, std::vector<Rgb> colors = {})
      : points_(std::move(points)), colors_(std::move(colors)), nn_(std::make_shared<NnCache>()) {
    if (!colors_.empty() && colors_.size() != points_.size()) {
      throw Error(Errc::shape_mismatch, "color count differs from point count");
    }
    compute_bbox();
  }

  /// Builds a cloud with precomputed nearest-neighbour distances, e.g. a
  /// subset that must keep the splat sizes of its parent scene.
  PointCloud(std::vector<Vec3> points, std::vector<Rgb> colors, std::vector<double> nn_dist)
      : PointCloud(std::move(points), std::move(colors)) {
    if (nn_dist.size() != points_.size()) {
      throw Error(Errc::shape_mismatch, "nn_dist count differs from point count");
    }
    std::call_once(nn_->once, [&] { nn_->values = std::move(nn_dist); });
  }

  const std::vector<Vec3>& points() const { return points_; }
  const std::vector<Rgb>& colors() const { return colors_; }
  bool has_colors() const { return !colors_.empty(); }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }

  /// Zero box at the origin for an empty cloud.
  const Aabb& bbox() const { return bbox_; }

  /// Distance from each point to its nearest other point (meters).
  const std::vector<double>& nn_dist() const {
    std::call_once(nn_->once, [&] { nn_->values = nearest_neighbor_distances(points_); });
    return nn_->values;
  }

  /// Number of exact duplicates collapsed when this cloud was loaded.
  std::size_t duplicates_removed() const { return duplicates_removed_; }
  void set_duplicates_removed(std::size_t n) { duplicates_removed_ = n; }

  /// Points at `indices`, in that order, with colors and nn_dist carried over
  /// from this cloud (nn_dist is not recomputed for the subset).
  PointCloud subset(std::span<const std::size_t> indices) const {
    std::vector<Vec3> pts;
    std::vector<Rgb> cols;
    std::vector<double> nn;
    pts.reserve(indices.size());
    const bool carry_nn = points_.size() >= 2;
    const std::vector<double>* parent_nn = carry_nn ? &nn_dist() : nullptr;
    for (std::size_t i : indices) {
      if (i >= points_.size()) throw Error(Errc::invalid_center_index, "subset index out of range");
      pts.push_back(points_[i]);
      if (has_colors()) cols.push_back(colors_[i]);
      if (carry_nn) nn.push_back((*parent_nn)[i]);
    }
    if (carry_nn) return PointCloud(std::move(pts), std::move(cols), std::move(nn));
    return PointCloud(std::move(pts), std::move(cols));
  }

 private:
  struct NnCache {
    std::once_flag once;
    std::vector<double> values;
  };

  void compute_bbox() {
    if (points_.empty()) return;
    bbox_ = Aabb::of_point(points_.front());
    for (const Vec3& p : points_) bbox_.expand(p);
  }

  std::vector<Vec3> points_;
  std::vector<Rgb> colors_;
  Aabb bbox_{};
  std::shared_ptr<NnCache> nn_;
  std::size_t duplicates_removed_ = 0;
};

/// Exact nearest-other-point distances via a k-d tree.
inline std::vector<double> nearest_neighbor_distances(std::span<const Vec3> points) {
  if (points.size() < 2) {
    throw Error(Errc::single_point_cloud, "nearest neighbour needs at least two points");
  }
  const KdTree tree(points);
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nb = tree.nearest(points[i], 1, i);
    out[i] = std::sqrt(nb.front().squared_distance);
  }
  return out;
}

inline std::vector<double> nearest_neighbor_distances(const PointCloud& cloud) {
  return nearest_neighbor_distances(std::span<const Vec3>(cloud.points()));
}

/// Collapses exact duplicate positions, keeping the first occurrence and the
/// original order. Returns the number of points removed.
inline std::size_t deduplicate(std::vector<Vec3>& points, std::vector<Rgb>& colors) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  std::vector<bool> drop(points.size(), false);
  std::size_t removed = 0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (points[order[i]] == points[order[i - 1]]) {
      drop[order[i]] = true;
      ++removed;
    }
  }
  if (removed == 0) return 0;
  std::size_t w = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (drop[i]) continue;
    points[w] = points[i];
    if (!colors.empty()) colors[w] = colors[i];
    ++w;
  }
  points.resize(w);
  if (!colors.empty()) colors.resize(w);
  return removed;
}

/// Rotates about the vertical axis through the bbox center. Nearest-neighbour
/// distances are carried over unchanged.
inline PointCloud rotate_scene(const PointCloud& cloud, double angle_deg) {
  if (cloud.size() >= 2) cloud.nn_dist();
  if (std::fmod(angle_deg, 360.0) == 0.0) return cloud;
  const double a = deg_to_rad(angle_deg);
  const double c = std::cos(a);
  const double s = std::sin(a);
  const Vec3 center = cloud.bbox().center();
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const Vec3& p : cloud.points()) {
    const double dx = p.x - center.x;
    const double dy = p.y - center.y;
    out.push_back({center.x + c * dx - s * dy, center.y + s * dx + c * dy, p.z});
  }
  if (cloud.size() >= 2) return PointCloud(std::move(out), cloud.colors(), cloud.nn_dist());
  return PointCloud(std::move(out), cloud.colors());
}

/// Greedy farthest-point order starting at `start`; ties go to the lower index.
inline std::vector<std::size_t> farthest_point_sample_from(std::span<const Vec3> points,
                                                           std::size_t k, std::size_t start) {
  if (k < 1 || k > points.size()) {
    throw Error(Errc::k_out_of_range, "k must lie in [1, point count]");
  }
  if (start >= points.size()) throw Error(Errc::k_out_of_range, "start index out of range");
  std::vector<std::size_t> picked;
  picked.reserve(k);
  std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(points.size(), false);
  std::size_t current = start;
  for (;;) {
    picked.push_back(current);
    taken[current] = true;
    if (picked.size() == k) break;
    std::size_t next = points.size();
    double best = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (taken[i]) continue;
      const double d2 = squared_distance(points[i], points[current]);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best) {
        best = min_d2[i];
        next = i;
      }
    }
    current = next;
  }
  return picked;
}

inline std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k,
                                                      std::uint64_t seed) {
  if (k < 1 || k > points.size()) {
    throw Error(Errc::k_out_of_range, "k must lie in [1, point count]");
  }
  Rng rng(seed);
  return farthest_point_sample_from(points, k, static_cast<std::size_t>(rng.below(points.size())));
}

inline std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k,
                                                      std::uint64_t seed) {
  return farthest_point_sample(std::span<const Vec3>(cloud.points()), k, seed);
}

/// Row r holds the g nearest indices to centers[r], nearest first. Rows are
/// padded with the nearest index when the cloud has fewer than g points.
inline std::vector<std::vector<std::size_t>> group_neighbors(const PointCloud& cloud,
                                                             std::span<const std::size_t> centers,
                                                             std::size_t g) {
  if (g < 1) throw Error(Errc::k_out_of_range, "group size must be at least 1");
  for (std::size_t c : centers) {
    if (c >= cloud.size()) throw Error(Errc::invalid_center_index, "center index out of range");
  }
  std::vector<std::vector<std::size_t>> rows;
  rows.reserve(centers.size());
  if (centers.empty()) return rows;
  const KdTree tree(cloud.points());
  for (std::size_t c : centers) {
    const auto nb = tree.nearest(cloud[c], std::min(g, cloud.size()));
    std::vector<std::size_t> row;
    row.reserve(g);
    for (const auto& n : nb) row.push_back(n.index);
    while (row.size() < g) row.push_back(row.front());
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Keeps the lowest-index point of every occupied voxel of edge `voxel`.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw Error(Errc::invalid_dimension, "voxel size must be positive");
  struct KeyHash {
    std::size_t operator()(const std::tuple<std::int64_t, std::int64_t, std::int64_t>& k) const {
      const auto [a, b, c] = k;
      return static_cast<std::size_t>(mix_seed(static_cast<std::uint64_t>(a),
                                               mix_seed(static_cast<std::uint64_t>(b),
                                                        static_cast<std::uint64_t>(c))));
    }
  };
  std::unordered_map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::size_t, KeyHash>
      seen;
  std::vector<std::size_t> keep;
  const Vec3 origin = cloud.bbox().min;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 d = cloud[i] - origin;
    const auto key = std::make_tuple(static_cast<std::int64_t>(std::floor(d.x / voxel)),
                                     static_cast<std::int64_t>(std::floor(d.y / voxel)),
                                     static_cast<std::int64_t>(std::floor(d.z / voxel)));
    if (seen.emplace(key, i).second) keep.push_back(i);
  }
  std::vector<Vec3> pts;
  std::vector<Rgb> cols;
  for (std::size_t i : keep) {
    pts.push_back(cloud[i]);
    if (cloud.has_colors()) cols.push_back(cloud.colors()[i]);
  }
  return PointCloud(std::move(pts), std::move(cols));
}

}  // namespace camplace
