#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "camplace/error.hpp"
#include "camplace/pointcloud.hpp"
#include "camplace/random.hpp"

namespace camplace {

enum class SceneKind { box_room, two_room_doorway, l_shape };

inline std::optional<SceneKind> parse_scene_kind(std::string_view s) {
  if (s == "box_room") return SceneKind::box_room;
  if (s == "two_room_doorway") return SceneKind::two_room_doorway;
  if (s == "l_shape") return SceneKind::l_shape;
  return std::nullopt;
}

/// Closed indoor scene sampled on its walls, floor and ceiling. The room
/// occupies [0, size.x] x [0, size.y] x [0, size.z].
struct SceneSpec {
  SceneKind kind = SceneKind::box_room;
  Vec3 size{4.0, 4.0, 3.0};
  double spacing = 0.1;
  bool jitter = false;
  std::uint64_t seed = 0;
  // two_room_doorway: partition at x = size.x / 2 with a doorway centred in y.
  double door_width = 1.0;
  double door_height = 2.0;
  // l_shape: the quadrant x > f*size.x, y > f*size.y is cut away.
  double notch_fraction = 0.5;
};

namespace detail {

struct FaceSampler {
  double spacing;
  bool jitter;
  Rng rng;
  std::vector<Vec3> points;

  /// Cell-centred grid on the rectangle origin + [0,lu]*u + [0,lv]*v.
  void face(const Vec3& origin, const Vec3& u, double lu, const Vec3& v, double lv,
            const std::function<bool(const Vec3&)>& keep = {}) {
    const int nu = std::max(1, static_cast<int>(std::lround(lu / spacing)));
    const int nv = std::max(1, static_cast<int>(std::lround(lv / spacing)));
    const double su = lu / nu;
    const double sv = lv / nv;
    const double amp = std::min(su, sv) / 4.0;
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        double a = (i + 0.5) * su;
        double b = (j + 0.5) * sv;
        if (jitter) {
          a += rng.uniform(-amp, amp);
          b += rng.uniform(-amp, amp);
        }
        const Vec3 p = origin + u * a + v * b;
        if (!keep || keep(p)) points.push_back(p);
      }
    }
  }
};

}  // namespace detail

inline PointCloud generate_synthetic_scene(const SceneSpec& spec) {
  const Vec3 s = spec.size;
  if (!(s.x > 0 && s.y > 0 && s.z > 0)) {
    throw Error(Errc::invalid_dimension, "room dimensions must be positive");
  }
  if (!(spec.spacing > 0)) throw Error(Errc::invalid_dimension, "spacing must be positive");

  const Vec3 ex{1, 0, 0}, ey{0, 1, 0}, ez{0, 0, 1};
  detail::FaceSampler f{spec.spacing, spec.jitter, Rng(spec.seed), {}};

  switch (spec.kind) {
    case SceneKind::box_room:
    case SceneKind::two_room_doorway: {
      f.face({0, 0, 0}, ex, s.x, ey, s.y);
      f.face({0, 0, s.z}, ex, s.x, ey, s.y);
      f.face({0, 0, 0}, ey, s.y, ez, s.z);
      f.face({s.x, 0, 0}, ey, s.y, ez, s.z);
      f.face({0, 0, 0}, ex, s.x, ez, s.z);
      f.face({0, s.y, 0}, ex, s.x, ez, s.z);
      if (spec.kind == SceneKind::two_room_doorway) {
        if (!(spec.door_width > 0 && spec.door_width < s.y && spec.door_height > 0 &&
              spec.door_height <= s.z)) {
          throw Error(Errc::invalid_dimension, "doorway must fit inside the partition wall");
        }
        const double half = spec.door_width / 2.0;
        const double cy = s.y / 2.0;
        const double dh = spec.door_height;
        f.face({s.x / 2.0, 0, 0}, ey, s.y, ez, s.z, [&](const Vec3& p) {
          return !(std::abs(p.y - cy) < half && p.z < dh);
        });
      }
      break;
    }
    case SceneKind::l_shape: {
      const double fr = spec.notch_fraction;
      if (!(fr > 0 && fr < 1)) throw Error(Errc::invalid_dimension, "notch fraction in (0,1)");
      const double nx = fr * s.x;
      const double ny = fr * s.y;
      auto outside_notch = [&](const Vec3& p) { return !(p.x > nx && p.y > ny); };
      f.face({0, 0, 0}, ex, s.x, ey, s.y, outside_notch);
      f.face({0, 0, s.z}, ex, s.x, ey, s.y, outside_notch);
      f.face({0, 0, 0}, ey, s.y, ez, s.z);
      f.face({0, 0, 0}, ex, s.x, ez, s.z);
      f.face({s.x, 0, 0}, ey, ny, ez, s.z);
      f.face({0, s.y, 0}, ex, nx, ez, s.z);
      f.face({nx, ny, 0}, ex, s.x - nx, ez, s.z);
      f.face({nx, ny, 0}, ey, s.y - ny, ez, s.z);
      break;
    }
  }
  std::vector<Rgb> colors;
  deduplicate(f.points, colors);
  return PointCloud(std::move(f.points));
}

}  // namespace camplace
