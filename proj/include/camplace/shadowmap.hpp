#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "camplace/error.hpp"
#include "camplace/geometry.hpp"
#include "camplace/pointcloud.hpp"

namespace camplace {

/// Equirectangular binning of the view sphere: azimuth alpha in [0, 2pi)
/// measured from +x towards +y, polar beta in [0, pi] measured from +z.
struct ShadowMapConfig {
  int n_azimuth = 128;
  int n_polar = 64;
  double range = 4.0;
  double compensation = kAuto;  // kAuto: default_compensation()
  double empty_value = kAuto;   // kAuto: range

  static constexpr double kAuto = -1.0;
  static constexpr double kDefaultCompensationFraction = 0.15;

  /// Covers the depth a floor or wall spans inside one cell at grazing
  /// incidence near full range.
  double default_compensation() const { return kDefaultCompensationFraction * range; }
  double eps() const { return compensation < 0.0 ? default_compensation() : compensation; }
  double empty() const { return empty_value < 0.0 ? range : empty_value; }
  double azimuth_bin() const { return kTwoPi / n_azimuth; }
  double polar_bin() const { return kPi / n_polar; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(n_azimuth) * static_cast<std::size_t>(n_polar);
  }

  void validate() const {
    if (n_azimuth < 4 || n_polar < 2) throw Error(Errc::invalid_config, "grid too coarse");
    if (!(range > 0.0) || !std::isfinite(range)) throw Error(Errc::invalid_config, "range must be > 0");
    if (std::isnan(compensation) || std::isnan(empty_value)) {
      throw Error(Errc::invalid_config, "compensation and empty value must be numbers");
    }
    if (!(empty() > 0.0 && empty() <= range)) {
      throw Error(Errc::invalid_config, "empty value must lie in (0, range]");
    }
  }

  /// Same binning with a different range. The empty value is re-derived from
  /// the new range; an explicit compensation is kept.
  ShadowMapConfig with_range(double r) const {
    ShadowMapConfig c = *this;
    c.range = r;
    c.empty_value = kAuto;
    return c;
  }
};

struct CellIndex {
  int azimuth = 0;
  int polar = 0;
  bool operator==(const CellIndex&) const = default;
};

/// Viewing cone of a regular (non-omnidirectional) depth camera.
struct ViewCone {
  Vec3 camera;
  Vec3 forward{1, 0, 0};
  double half_angle_h = 0.5;
  double half_angle_v = 0.4;

  void validate() const {
    if (std::abs(forward.norm() - 1.0) > 1e-9) throw Error(Errc::invalid_config, "forward not unit");
    if (!(half_angle_h > 0 && half_angle_h < kPi / 2 && half_angle_v > 0 &&
          half_angle_v < kPi / 2)) {
      throw Error(Errc::invalid_config, "cone half-angles must lie in (0, pi/2)");
    }
  }

  /// Horizontal/vertical decomposition in the camera frame (right, up, forward).
  bool contains(const Vec3& point) const {
    const Vec3 d = point - camera;
    Vec3 right = forward.cross({0, 0, 1});
    if (right.squared_norm() < 1e-18) right = forward.cross({1, 0, 0});
    right = right * (1.0 / right.norm());
    const Vec3 up = right.cross(forward);
    const double zf = d.dot(forward);
    if (zf <= 0.0) return false;
    return std::atan2(std::abs(d.dot(right)), zf) <= half_angle_h &&
           std::atan2(std::abs(d.dot(up)), zf) <= half_angle_v;
  }
};

/// Spherical coordinates of `point` seen from `camera`.
struct Direction {
  double r;
  double azimuth;
  double polar;
};

inline Direction direction_of(const Vec3& camera, const Vec3& point) {
  const Vec3 d = point - camera;
  const double r = d.norm();
  double az = std::atan2(d.y, d.x);
  if (az < 0.0) az += kTwoPi;
  if (az >= kTwoPi) az = 0.0;
  const double pol = r > 0.0 ? std::acos(std::clamp(d.z / r, -1.0, 1.0)) : 0.0;
  return {r, az, pol};
}

inline CellIndex cell_of(const Direction& dir, const ShadowMapConfig& cfg) {
  const int a = std::clamp(static_cast<int>(std::floor(dir.azimuth / cfg.azimuth_bin())), 0,
                           cfg.n_azimuth - 1);
  const int p = std::clamp(static_cast<int>(std::floor(dir.polar / cfg.polar_bin())), 0,
                           cfg.n_polar - 1);
  return {a, p};
}

inline CellIndex direction_to_cell(const Vec3& camera, const Vec3& point,
                                   const ShadowMapConfig& cfg) {
  if (point == camera) throw Error(Errc::zero_direction, "point coincides with camera");
  return cell_of(direction_of(camera, point), cfg);
}

/// Angular footprint of one point: a square of half-side nn_dist facing the
/// camera subtends the angular radius theta = atan(nn_dist / r). A cell is
/// covered when its center lies within theta of the point's direction; the
/// cell the point falls in is always covered.
struct SplatWindow {
  Direction dir;
  CellIndex own;
  double theta;
  double cos_theta;
  double cos_polar;
  double sin_polar;
  /// Azimuth half-extent of the cap; infinity when the cap holds a pole.
  double half_azimuth;

  static SplatWindow make(const Direction& dir, double nn_dist, const ShadowMapConfig& cfg) {
    SplatWindow w{dir, cell_of(dir, cfg), std::atan(nn_dist / dir.r), 0.0,
                  std::cos(dir.polar), std::sin(dir.polar), 0.0};
    w.cos_theta = std::cos(w.theta);
    const bool holds_pole = dir.polar - w.theta <= 0.0 || dir.polar + w.theta >= kPi;
    w.half_azimuth = holds_pole ? std::numeric_limits<double>::infinity()
                                : std::asin(std::min(1.0, std::sin(w.theta) / w.sin_polar));
    return w;
  }

  bool covers(int az, int pol, const ShadowMapConfig& cfg) const {
    if (az == own.azimuth && pol == own.polar) return true;
    const double pc = (pol + 0.5) * cfg.polar_bin();
    if (std::abs(pc - dir.polar) > theta) return false;
    const double ac = (az + 0.5) * cfg.azimuth_bin();
    const double c = std::cos(pc) * cos_polar + std::sin(pc) * sin_polar * std::cos(ac - dir.azimuth);
    return c >= cos_theta;
  }
};

class ShadowMap {
 public:
  ShadowMap(const Vec3& camera, const ShadowMapConfig& config)
      : camera_(camera), config_(config), grid_(config.cell_count(), config.empty()) {}

  const Vec3& camera() const { return camera_; }
  const ShadowMapConfig& config() const { return config_; }
  int n_azimuth() const { return config_.n_azimuth; }
  int n_polar() const { return config_.n_polar; }

  /// Row-major, one row per polar bin.
  std::span<const double> values() const { return grid_; }
  double at(int azimuth, int polar) const { return grid_[index(azimuth, polar)]; }
  double at(const CellIndex& c) const { return at(c.azimuth, c.polar); }

  /// Calls f(flat cell index, r) for every cell covered by the point's splat
  /// window. Points at the camera or beyond range cover nothing.
  template <typename F>
  void for_each_covered_cell(const Vec3& point, double nn_dist, F&& f) const {
    const Direction dir = direction_of(camera_, point);
    if (!(dir.r > 0.0) || dir.r > config_.range) return;
    const SplatWindow w = SplatWindow::make(dir, nn_dist, config_);
    const double pb = config_.polar_bin();
    const int n_az = config_.n_azimuth;
    const int p_lo = std::max(0, static_cast<int>(std::floor((dir.polar - w.theta) / pb)) - 1);
    const int p_hi =
        std::min(config_.n_polar - 1, static_cast<int>(std::floor((dir.polar + w.theta) / pb)) + 1);
    int a_lo = 0;
    int a_count = n_az;
    if (!std::isinf(w.half_azimuth)) {
      const double ab = config_.azimuth_bin();
      a_lo = static_cast<int>(std::floor((dir.azimuth - w.half_azimuth) / ab)) - 1;
      const int a_hi = static_cast<int>(std::floor((dir.azimuth + w.half_azimuth) / ab)) + 1;
      a_count = std::min(n_az, a_hi - a_lo + 1);
    }
    for (int p = p_lo; p <= p_hi; ++p) {
      for (int k = 0; k < a_count; ++k) {
        const int a = ((a_lo + k) % n_az + n_az) % n_az;
        if (w.covers(a, p, config_)) f(index(a, p), dir.r);
      }
    }
  }

  /// Min-updates every cell covered by the point's splat window.
  void splat(const Vec3& point, double nn_dist) {
    for_each_covered_cell(point, nn_dist, [this](std::size_t cell, double r) { min_update(cell, r); });
  }

  void min_update(std::size_t cell, double r) {
    if (r < grid_[cell]) grid_[cell] = r;
  }

  void set(int azimuth, int polar, double value) { grid_[index(azimuth, polar)] = value; }

 private:
  std::size_t index(int azimuth, int polar) const {
    return static_cast<std::size_t>(polar) * static_cast<std::size_t>(config_.n_azimuth) +
           static_cast<std::size_t>(azimuth);
  }

  Vec3 camera_;
  ShadowMapConfig config_;
  std::vector<double> grid_;
};

inline ShadowMap compute_shadow_map(const PointCloud& cloud, const Vec3& camera,
                                    const ShadowMapConfig& config) {
  config.validate();
  ShadowMap sm(camera, config);
  if (cloud.empty()) return sm;
  const auto& nn = cloud.nn_dist();
  for (std::size_t i = 0; i < cloud.size(); ++i) sm.splat(cloud[i], nn[i]);
  return sm;
}

/// Shadow map restricted to a viewing cone: points outside the cone do not
/// contribute.
inline ShadowMap compute_shadow_map_cone(const PointCloud& cloud, const ViewCone& cone,
                                         const ShadowMapConfig& config) {
  config.validate();
  cone.validate();
  ShadowMap sm(cone.camera, config);
  if (cloud.empty()) return sm;
  const auto& nn = cloud.nn_dist();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cone.contains(cloud[i])) sm.splat(cloud[i], nn[i]);
  }
  return sm;
}

inline bool is_visible(const ShadowMap& sm, const Vec3& point) {
  if (point == sm.camera()) throw Error(Errc::zero_direction, "point coincides with camera");
  const Direction dir = direction_of(sm.camera(), point);
  if (dir.r > sm.config().range) return false;
  return dir.r <= sm.at(cell_of(dir, sm.config())) + sm.config().eps();
}

/// Mean absolute per-cell difference (meters).
inline double shadow_map_abs_diff(const ShadowMap& a, const ShadowMap& b) {
  if (a.n_azimuth() != b.n_azimuth() || a.n_polar() != b.n_polar()) {
    throw Error(Errc::shape_mismatch, "shadow maps differ in resolution");
  }
  if (distance(a.camera(), b.camera()) > 1e-9) {
    throw Error(Errc::camera_mismatch, "shadow maps belong to different cameras");
  }
  const auto va = a.values();
  const auto vb = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) sum += std::abs(va[i] - vb[i]);
  return sum / static_cast<double>(va.size());
}

/// 16-bit binary PGM, value = round(depth / range * 65535), big-endian samples.
inline void write_shadow_map_pgm(std::ostream& out, const ShadowMap& sm) {
  out << "P5\n" << sm.n_azimuth() << ' ' << sm.n_polar() << "\n65535\n";
  const double range = sm.config().range;
  for (double v : sm.values()) {
    const long q = std::clamp(std::lround(v / range * 65535.0), 0L, 65535L);
    const char bytes[2] = {static_cast<char>((q >> 8) & 0xff), static_cast<char>(q & 0xff)};
    out.write(bytes, 2);
  }
}

/// Row-major CSV in meters with 6 decimals; one line per polar bin.
inline void write_shadow_map_csv(std::ostream& out, const ShadowMap& sm) {
  char buf[64];
  for (int p = 0; p < sm.n_polar(); ++p) {
    for (int a = 0; a < sm.n_azimuth(); ++a) {
      std::snprintf(buf, sizeof(buf), "%.6f", sm.at(a, p));
      if (a > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

inline void write_shadow_map(const std::filesystem::path& path, const ShadowMap& sm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  if (path.extension() == ".pgm") {
    write_shadow_map_pgm(out, sm);
  } else if (path.extension() == ".csv") {
    write_shadow_map_csv(out, sm);
  } else {
    throw Error(Errc::io_error, "unsupported shadow map extension: " + path.string());
  }
  if (!out) throw Error(Errc::io_error, "failed writing " + path.string());
}

/// Raw 16-bit samples of a PGM written by write_shadow_map_pgm, row-major.
inline std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, int& width,
                                             int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::string magic;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  in.get();
  if (magic != "P5" || maxval != 65535 || width <= 0 || height <= 0) {
    throw Error(Errc::parse_error, path.string() + ": not a 16-bit P5 image");
  }
  std::vector<std::uint16_t> out(static_cast<std::size_t>(width) * height);
  for (auto& v : out) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) {
      throw Error(Errc::parse_error, path.string() + ": truncated pixel data");
    }
    v = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  return out;
}

inline std::vector<std::vector<double>> read_csv_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace camplace
