#pragma once

// Brute-force reference implementations used by the test suites. They trade
// speed for directness: no trees, no precomputed footprints, cell-first loops
// where the library is point-first.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "camplace/geometry.hpp"
#include "camplace/shadowmap.hpp"

namespace oracle {

using camplace::Vec3;

inline std::vector<double> all_pairs_nn(const std::vector<Vec3>& pts) {
  std::vector<double> out(pts.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const Vec3 d = pts[i] - pts[j];
      out[i] = std::min(out[i], std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z));
    }
  }
  return out;
}

/// The point maximizing the minimum squared distance to `chosen`; lowest
/// index among ties.
inline std::size_t farthest_from(const std::vector<Vec3>& pts, const std::vector<std::size_t>& chosen) {
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t c : chosen) m = std::min(m, camplace::squared_distance(pts[i], pts[c]));
    if (m > best_d) {
      best_d = m;
      best = i;
    }
  }
  return best;
}

inline std::vector<std::size_t> k_nearest(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({camplace::squared_distance(pts[i], q), i});
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

struct Polar {
  double r, azimuth, polar;
};

inline Polar polar_of(const Vec3& cam, const Vec3& p) {
  const double dx = p.x - cam.x, dy = p.y - cam.y, dz = p.z - cam.z;
  const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
  double az = std::atan2(dy, dx);
  if (az < 0) az += 2 * M_PI;
  if (az >= 2 * M_PI) az -= 2 * M_PI;
  return {r, az, std::acos(std::clamp(dz / r, -1.0, 1.0))};
}

/// Whether the splat of a point seen at `d` with neighbor distance `nn`
/// covers cell (ia, ip): the point's own cell, or any cell whose center
/// direction lies within the angular radius atan(nn / r).
inline bool splat_covers(const Polar& d, double nn, int ia, int ip, int na, int np) {
  const double da = 2 * M_PI / na, dp = M_PI / np;
  const int own_a = std::min(static_cast<int>(std::floor(d.azimuth / da)), na - 1);
  const int own_p = std::min(static_cast<int>(std::floor(d.polar / dp)), np - 1);
  if (ia == own_a && ip == own_p) return true;
  const double ac = (ia + 0.5) * da, pc = (ip + 0.5) * dp;
  const Vec3 cell{std::sin(pc) * std::cos(ac), std::sin(pc) * std::sin(ac), std::cos(pc)};
  const Vec3 dir{std::sin(d.polar) * std::cos(d.azimuth), std::sin(d.polar) * std::sin(d.azimuth),
                 std::cos(d.polar)};
  return std::acos(std::clamp(cell.dot(dir), -1.0, 1.0)) <= std::atan(nn / d.r);
}

/// Cell-first shadow map: each cell takes the minimum range over all points
/// whose splat covers it.
inline std::vector<double> shadow_map(const std::vector<Vec3>& pts, const std::vector<double>& nn,
                                      const Vec3& cam, const camplace::ShadowMapConfig& cfg) {
  const int na = cfg.n_azimuth, np = cfg.n_polar;
  std::vector<double> grid(static_cast<std::size_t>(na * np), cfg.empty());
  std::vector<Polar> dirs;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Polar d = polar_of(cam, pts[i]);
    if (d.r > 0 && d.r <= cfg.range) {
      dirs.push_back(d);
      keep.push_back(i);
    }
  }
  for (int ip = 0; ip < np; ++ip) {
    for (int ia = 0; ia < na; ++ia) {
      double& cell = grid[static_cast<std::size_t>(ip * na + ia)];
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        if (dirs[k].r < cell && splat_covers(dirs[k], nn[keep[k]], ia, ip, na, np)) cell = dirs[k].r;
      }
    }
  }
  return grid;
}

/// Cone membership by explicit angles: horizontal angle measured in the
/// plane spanned by forward and the horizontal right vector, vertical angle
/// as elevation above that plane.
inline bool in_cone(const camplace::ViewCone& cone, const Vec3& p) {
  const Vec3 f = cone.forward * (1.0 / cone.forward.norm());
  Vec3 right = f.cross(Vec3{0, 0, 1});
  if (right.norm() < 1e-12) right = f.cross(Vec3{1, 0, 0});
  right = right * (1.0 / right.norm());
  const Vec3 up = right.cross(f);
  const Vec3 d = p - cone.camera;
  const double x = d.dot(f), y = d.dot(right), z = d.dot(up);
  if (x <= 0) return false;
  return std::atan2(std::abs(y), x) <= cone.half_angle_h && std::atan2(std::abs(z), x) <= cone.half_angle_v;
}

/// Angular occlusion test: q is blocked iff some other point p in range
/// lies within p's own splat radius of q's direction and strictly nearer
/// than r_q - eps. `widen` grows (or shrinks) every splat radius by that
/// many radians.
class OcclusionOracle {
 public:
  OcclusionOracle(const std::vector<Vec3>& pts, const std::vector<double>& nn, const Vec3& cam,
                  double range, double eps)
      : cam_(cam), range_(range), eps_(eps) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 d = pts[i] - cam;
      const double r = d.norm();
      r_.push_back(r);
      u_.push_back(r > 0 ? d * (1.0 / r) : Vec3{0, 0, 1});
      theta_.push_back(r > 0 ? std::atan(nn[i] / r) : M_PI);
    }
  }

  bool visible(std::size_t q, double widen = 0.0) const {
    if (r_[q] > range_) return false;
    for (std::size_t p = 0; p < r_.size(); ++p) {
      if (p == q || r_[p] > range_ || !(r_[p] < r_[q] - eps_)) continue;
      if (angle(p, q) <= std::max(theta_[p] + widen, 0.0)) return false;
    }
    return true;
  }

  /// Oracle verdict flips when splat radii change by one cell width.
  bool near_occlusion_boundary(std::size_t q, double cell_width) const {
    const bool v = visible(q);
    return visible(q, cell_width) != v || visible(q, -cell_width) != v;
  }

  /// Some point overlapping q's direction (within one cell width of its
  /// splat) has depth within eps of the occlusion threshold r_q - eps.
  bool near_depth_tie(std::size_t q, double cell_width) const {
    for (std::size_t p = 0; p < r_.size(); ++p) {
      if (p == q || r_[p] > range_) continue;
      if (angle(p, q) > theta_[p] + cell_width) continue;
      if (std::abs(r_[p] - (r_[q] - eps_)) <= eps_) return true;
    }
    return false;
  }

  std::size_t size() const { return r_.size(); }

 private:
  double angle(std::size_t a, std::size_t b) const {
    return std::acos(std::clamp(u_[a].dot(u_[b]), -1.0, 1.0));
  }

  Vec3 cam_;
  double range_, eps_;
  std::vector<double> r_, theta_;
  std::vector<Vec3> u_;
};

/// Volume of cell centers inside an axis-aligned empty room that lie within
/// `range` of the camera, on an n^3-cell grid.
inline double fine_grid_coverage(const camplace::Aabb& room, const Vec3& cam, double range, int n) {
  const Vec3 e = room.extent();
  const double hx = e.x / n, hy = e.y / n, hz = e.z / n;
  std::size_t count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Vec3 c{room.min.x + (i + 0.5) * hx, room.min.y + (j + 0.5) * hy, room.min.z + (k + 0.5) * hz};
        if (camplace::distance(c, cam) <= range) ++count;
      }
    }
  }
  return static_cast<double>(count) * hx * hy * hz;
}

}  // namespace oracle
