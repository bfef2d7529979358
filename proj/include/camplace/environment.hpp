#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "camplace/error.hpp"
#include "camplace/geometry.hpp"
#include "camplace/pointcloud.hpp"
#include "camplace/random.hpp"
#include "camplace/shadowmap.hpp"

namespace camplace {

enum class RewardMapping { none, cubic_level, cubic_delta };

inline RewardMapping parse_reward_mapping(std::string_view s) {
  if (s == "none") return RewardMapping::none;
  if (s == "cubic_level") return RewardMapping::cubic_level;
  if (s == "cubic_delta") return RewardMapping::cubic_delta;
  throw Error(Errc::unknown_mode, "reward mapping '" + std::string(s) + "'");
}

inline std::string_view reward_mapping_name(RewardMapping m) {
  switch (m) {
    case RewardMapping::none: return "none";
    case RewardMapping::cubic_level: return "cubic_level";
    case RewardMapping::cubic_delta: return "cubic_delta";
  }
  return "none";
}

struct RewardWeights {
  double k_sc = 1.0;
  double k_doe = 1.0;
  double k_p = -1.0;
};

struct EnvConfig {
  int num_cameras = 1;
  double camera_range = 4.0;
  double plane_height_fraction = 0.5;
  int max_steps = 50;
  double max_step_move = 0.5;
  int coverage_cells_longest_axis = 48;
  RewardWeights reward_weights;
  RewardMapping reward_mapping = RewardMapping::cubic_level;
  /// Angular binning (and optional compensation) shared by every shadow map;
  /// its range is replaced by camera_range or the evaluation range.
  ShadowMapConfig sm_config;
  /// Range of the depth-error viewpoint maps; defaults to the bbox diagonal.
  std::optional<double> eval_sm_range_override;
  std::size_t observation_cap = 1024;

  void validate() const {
    if (num_cameras < 1) throw Error(Errc::invalid_config, "num_cameras must be >= 1");
    if (max_steps < 1) throw Error(Errc::invalid_config, "max_steps must be >= 1");
    if (!(camera_range > 0)) throw Error(Errc::invalid_config, "camera_range must be > 0");
    if (!(max_step_move >= 0)) throw Error(Errc::invalid_config, "max_step_move must be >= 0");
    if (!(plane_height_fraction >= 0 && plane_height_fraction <= 1)) {
      throw Error(Errc::invalid_config, "plane_height_fraction must lie in [0, 1]");
    }
    if (coverage_cells_longest_axis < 1) throw Error(Errc::invalid_config, "coverage cells >= 1");
    const auto& w = reward_weights;
    if (!std::isfinite(w.k_sc) || !std::isfinite(w.k_doe) || !std::isfinite(w.k_p)) {
      throw Error(Errc::invalid_config, "reward weights must be finite");
    }
    if (w.k_p > 0) throw Error(Errc::invalid_config, "K_P must be <= 0");
    if (observation_cap < 1) throw Error(Errc::invalid_config, "observation_cap must be >= 1");
    if (eval_sm_range_override && !(*eval_sm_range_override > 0)) {
      throw Error(Errc::invalid_config, "evaluation range must be > 0");
    }
    camera_sm_config().validate();
  }

  ShadowMapConfig camera_sm_config() const { return sm_config.with_range(camera_range); }

  ShadowMapConfig eval_sm_config(const Aabb& bbox) const {
    return sm_config.with_range(eval_sm_range_override.value_or(bbox.diagonal()));
  }

  double plane_height(const Aabb& bbox) const {
    return bbox.min.z + plane_height_fraction * (bbox.max.z - bbox.min.z);
  }

  EnvConfig validated() const {
    validate();
    return *this;
  }
};

/// Camera positions on the camera plane.
struct Placement {
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }
  bool operator==(const Placement&) const = default;
};

namespace detail {
inline double parse_coord(std::string_view tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw Error(Errc::parse_error, "bad coordinate '" + std::string(tok) + "'");
  }
  return v;
}
}  // namespace detail

/// Parses "x,y,z;x,y,z;..." (whitespace tolerated).
inline Placement parse_placement(std::string_view text) {
  Placement out;
  std::string s(text);
  std::stringstream groups(s);
  std::string group;
  while (std::getline(groups, group, ';')) {
    if (group.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::stringstream coords(group);
    std::string c;
    std::vector<double> v;
    while (std::getline(coords, c, ',')) {
      const auto first = c.find_first_not_of(" \t\r\n");
      const auto last = c.find_last_not_of(" \t\r\n");
      if (first == std::string::npos) throw Error(Errc::parse_error, "empty coordinate");
      const std::string_view tok(c.data() + first, last - first + 1);
      v.push_back(detail::parse_coord(tok));
    }
    if (v.size() != 3) throw Error(Errc::parse_error, "camera '" + group + "' needs 3 coordinates");
    out.positions.push_back({v[0], v[1], v[2]});
  }
  if (out.positions.empty()) throw Error(Errc::parse_error, "no camera positions given");
  return out;
}

inline std::string format_placement(const Placement& p) {
  std::string out;
  char buf[96];
  for (std::size_t i = 0; i < p.positions.size(); ++i) {
    const Vec3& v = p.positions[i];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f", v.x, v.y, v.z);
    if (i > 0) out += ';';
    out += buf;
  }
  return out;
}

struct RewardBreakdown {
  double sc = 0.0;         // m^3
  double doe = 0.0;        // meters
  bool penalty = false;
  double delta_sc = 0.0;   // m^3, current minus previous
  double delta_doe = 0.0;  // meters, previous minus current (improvement positive)
  double combined = 0.0;
  double mapped = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

struct Observation {
  std::vector<Vec3> observed_points;
  std::optional<Aabb> observed_bbox;
  Placement cameras;
  int step = 0;

  bool operator==(const Observation&) const = default;
};

/// The five depth-error viewpoints: the bbox center and the points two thirds
/// of the way towards each footprint corner, all at half the bbox height.
inline std::array<Vec3, 5> sampling_viewpoints(const Aabb& bbox) {
  const Vec3 e = bbox.extent();
  if (!(e.x > 0 && e.y > 0 && e.z > 0)) throw Error(Errc::degenerate_bbox, "bbox has zero extent");
  const Vec3 c = bbox.center();
  std::array<Vec3, 5> out;
  out[0] = c;
  const double xs[2] = {bbox.min.x, bbox.max.x};
  const double ys[2] = {bbox.min.y, bbox.max.y};
  int k = 1;
  for (double y : ys) {
    for (double x : xs) {
      out[k++] = {c.x + (2.0 / 3.0) * (x - c.x), c.y + (2.0 / 3.0) * (y - c.y), c.z};
    }
  }
  return out;
}

inline std::array<Vec3, 5> sampling_viewpoints(const Aabb& bbox, const EnvConfig&) {
  return sampling_viewpoints(bbox);
}

/// Weighted sum of normalized, improvement-positive deltas; a penalized step
/// yields K_P alone.
inline double combine_reward(double delta_sc_norm, double delta_doe_norm, bool penalty,
                             const RewardWeights& w) {
  if (penalty) return w.k_p;
  return w.k_sc * delta_sc_norm + w.k_doe * delta_doe_norm;
}

/// Applies the reward mapping. `quality_prev`/`quality_now` are only used by
/// cubic_level. A penalized step always maps to K_P.
inline double map_reward(RewardMapping mode, double combined, bool penalty, const RewardWeights& w,
                         double quality_prev = 0.0, double quality_now = 0.0) {
  if (penalty) return w.k_p;
  switch (mode) {
    case RewardMapping::none: return combined;
    case RewardMapping::cubic_delta: return combined * combined * combined;
    case RewardMapping::cubic_level:
      return quality_now * quality_now * quality_now - quality_prev * quality_prev * quality_prev;
  }
  throw Error(Errc::unknown_mode, "reward mapping");
}

/// Visibility of `point` from any of the maps; a point at a camera counts as seen.
inline bool visible_from_any(std::span<const ShadowMap> maps, const Vec3& point) {
  for (const ShadowMap& sm : maps) {
    if (point == sm.camera() || is_visible(sm, point)) return true;
  }
  return false;
}

inline std::vector<ShadowMap> camera_shadow_maps(const PointCloud& scene, const Placement& cams,
                                                 const ShadowMapConfig& config) {
  std::vector<ShadowMap> maps;
  maps.reserve(cams.size());
  for (const Vec3& c : cams.positions) maps.push_back(compute_shadow_map(scene, c, config));
  return maps;
}

/// OR-s current visibility into `flags`; returns the number of new flags.
inline std::size_t observe_points(const PointCloud& scene, std::span<const ShadowMap> maps,
                                  std::vector<bool>& flags) {
  std::size_t fresh = 0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (flags[i]) continue;
    if (visible_from_any(maps, scene[i])) {
      flags[i] = true;
      ++fresh;
    }
  }
  return fresh;
}

/// Uniform voxelization of the bbox used for space coverage. The longest
/// axis gets `cells_longest_axis` cells; other axes round their count up and
/// shrink the cell so that the grid tiles the box exactly.
class CoverageGrid {
 public:
  CoverageGrid(const Aabb& bbox, int cells_longest_axis) {
    const Vec3 e = bbox.extent();
    const double longest = std::max({e.x, e.y, e.z});
    const double edge = longest / cells_longest_axis;
    auto count = [&](double len) {
      return edge > 0 ? std::max(1, static_cast<int>(std::ceil(len / edge - 1e-9))) : 1;
    };
    n_ = {count(e.x), count(e.y), count(e.z)};
    const Vec3 step{e.x / n_[0], e.y / n_[1], e.z / n_[2]};
    cell_volume_ = step.x * step.y * step.z;
    centers_.reserve(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2]);
    for (int k = 0; k < n_[2]; ++k) {
      for (int j = 0; j < n_[1]; ++j) {
        for (int i = 0; i < n_[0]; ++i) {
          centers_.push_back({bbox.min.x + (i + 0.5) * step.x, bbox.min.y + (j + 0.5) * step.y,
                              bbox.min.z + (k + 0.5) * step.z});
        }
      }
    }
  }

  const std::vector<Vec3>& centers() const { return centers_; }
  double cell_volume() const { return cell_volume_; }
  std::array<int, 3> counts() const { return n_; }

  /// Volume of cells whose center is visible to at least one map.
  double coverage(std::span<const ShadowMap> maps) const {
    if (maps.empty()) return 0.0;
    std::size_t n = 0;
    for (const Vec3& c : centers_) n += visible_from_any(maps, c) ? 1 : 0;
    return static_cast<double>(n) * cell_volume_;
  }

 private:
  std::array<int, 3> n_{};
  double cell_volume_ = 0.0;
  std::vector<Vec3> centers_;
};

/// Ground-truth maps at the five viewpoints plus the machinery to score an
/// observed subset against them. The viewpoints never move, so every point's
/// splat footprint is computed once and partial maps are rebuilt from it.
class DepthErrorEvaluator {
 public:
  DepthErrorEvaluator(const PointCloud& scene, const EnvConfig& config)
      : viewpoints_(sampling_viewpoints(scene.bbox())),
        eval_config_(config.eval_sm_config(scene.bbox())) {
    eval_config_.validate();
    const auto& nn = scene.nn_dist();
    gt_maps_.reserve(viewpoints_.size());
    for (std::size_t v = 0; v < viewpoints_.size(); ++v) {
      ShadowMap gt(viewpoints_[v], eval_config_);
      Footprints& fp = footprints_[v];
      fp.offsets.reserve(scene.size() + 1);
      fp.offsets.push_back(0);
      fp.depth.reserve(scene.size());
      for (std::size_t i = 0; i < scene.size(); ++i) {
        double depth = 0.0;
        gt.for_each_covered_cell(scene[i], nn[i], [&](std::size_t cell, double r) {
          fp.cells.push_back(static_cast<std::uint32_t>(cell));
          depth = r;
        });
        fp.depth.push_back(depth);
        fp.offsets.push_back(fp.cells.size());
        gt.splat(scene[i], nn[i]);
      }
      gt_maps_.push_back(std::move(gt));
    }
  }

  const std::array<Vec3, 5>& viewpoints() const { return viewpoints_; }
  const std::vector<ShadowMap>& ground_truth() const { return gt_maps_; }
  const ShadowMapConfig& eval_config() const { return eval_config_; }

  /// Map of the flagged points seen from viewpoint `v`.
  ShadowMap partial_map(std::size_t v, const std::vector<bool>& flags) const {
    ShadowMap sm(viewpoints_[v], eval_config_);
    const Footprints& fp = footprints_[v];
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (!flags[i]) continue;
      for (std::size_t k = fp.offsets[i]; k < fp.offsets[i + 1]; ++k) {
        sm.min_update(fp.cells[k], fp.depth[i]);
      }
    }
    return sm;
  }

  /// Sum over viewpoints of the mean per-cell difference between the map of
  /// the flagged points and the ground truth (meters).
  double error(const std::vector<bool>& flags) const {
    double total = 0.0;
    for (std::size_t v = 0; v < viewpoints_.size(); ++v) {
      total += shadow_map_abs_diff(partial_map(v, flags), gt_maps_[v]);
    }
    return total;
  }

 private:
  struct Footprints {
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> cells;
    std::vector<double> depth;
  };

  std::array<Vec3, 5> viewpoints_;
  ShadowMapConfig eval_config_;
  std::vector<ShadowMap> gt_maps_;
  std::array<Footprints, 5> footprints_;
};

/// Mutable per-episode state.
struct EpisodeState {
  std::vector<bool> observed;
  Placement cameras;
  int step = 0;
  double prev_sc = 0.0;
  double prev_doe = 0.0;
  double doe_at_reset = 0.0;
  double prev_quality = 0.0;
  std::uint64_t seed = 0;
  bool started = false;
  bool done = false;
};

struct StepResult {
  Observation observation;
  RewardBreakdown reward;
  bool done = false;
};

using Action = std::array<double, 2>;

/// Episodic camera-placement environment over one scene. Not thread-safe;
/// run one instance per thread.
class Environment {
 public:
  Environment(PointCloud scene, EnvConfig config)
      : scene_(std::move(scene)),
        config_(config.validated()),
        evaluator_(checked_scene(scene_), config_),
        coverage_grid_(scene_.bbox(), config_.coverage_cells_longest_axis) {
    cam_config_ = config_.camera_sm_config();
  }

  const PointCloud& scene() const { return scene_; }
  const EnvConfig& config() const { return config_; }
  const EpisodeState& state() const { return state_; }
  const DepthErrorEvaluator& evaluator() const { return evaluator_; }
  const CoverageGrid& coverage_grid() const { return coverage_grid_; }
  const std::vector<ShadowMap>& camera_maps() const { return maps_; }

  double plane_height() const { return config_.plane_height(scene_.bbox()); }

  /// Starts an episode. Without an explicit placement, cameras start
  /// uniformly in the central half of the footprint.
  Observation reset(std::uint64_t seed, std::optional<Placement> initial = std::nullopt) {
    state_ = EpisodeState{};
    state_.seed = seed;
    if (initial) {
      if (static_cast<int>(initial->size()) != config_.num_cameras) {
        throw Error(Errc::invalid_config, "initial placement has wrong camera count");
      }
      state_.cameras = std::move(*initial);
      for (Vec3& p : state_.cameras.positions) p.z = plane_height();
    } else {
      Rng rng(mix_seed(seed, 0));
      const Aabb& b = scene_.bbox();
      const Vec3 c = b.center();
      const Vec3 e = b.extent();
      for (int i = 0; i < config_.num_cameras; ++i) {
        const double x = rng.uniform(c.x - 0.25 * e.x, c.x + 0.25 * e.x);
        const double y = rng.uniform(c.y - 0.25 * e.y, c.y + 0.25 * e.y);
        state_.cameras.positions.push_back({x, y, plane_height()});
      }
    }
    state_.observed.assign(scene_.size(), false);
    refresh_maps();
    observe_points();
    state_.prev_sc = space_coverage();
    state_.prev_doe = depth_observation_error();
    state_.doe_at_reset = state_.prev_doe;
    state_.prev_quality = quality(state_.prev_sc, state_.prev_doe);
    state_.started = true;
    return observation();
  }

  StepResult step(std::span<const Action> actions) {
    if (!state_.started) throw Error(Errc::episode_not_started, "call reset first");
    if (state_.done) throw Error(Errc::episode_finished, "episode reached max_steps");
    if (static_cast<int>(actions.size()) != config_.num_cameras) {
      throw Error(Errc::action_length_mismatch, "expected " + std::to_string(config_.num_cameras) +
                                                    " actions, got " +
                                                    std::to_string(actions.size()));
    }
    bool penalty = false;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      double dx = actions[i][0];
      double dy = actions[i][1];
      if (!std::isfinite(dx) || !std::isfinite(dy)) {
        throw Error(Errc::invalid_config, "non-finite action");
      }
      const double n = std::hypot(dx, dy);
      if (n > config_.max_step_move) {
        const double s = config_.max_step_move / n;
        dx *= s;
        dy *= s;
      }
      Vec3& p = state_.cameras.positions[i];
      p.x += dx;
      p.y += dy;
      if (!scene_.bbox().contains_xy(p)) penalty = true;
    }
    refresh_maps();
    observe_points();

    RewardBreakdown r;
    r.sc = space_coverage();
    r.doe = depth_observation_error();
    r.penalty = penalty;
    r.delta_sc = r.sc - state_.prev_sc;
    r.delta_doe = state_.prev_doe - r.doe;
    const double dsc_norm = r.delta_sc / scene_.bbox().volume();
    const double ddoe_norm = state_.doe_at_reset > 0 ? r.delta_doe / state_.doe_at_reset : 0.0;
    const auto& w = config_.reward_weights;
    r.combined = combine_reward(dsc_norm, ddoe_norm, penalty, w);
    const double q = quality(r.sc, r.doe);
    r.mapped = map_reward(config_.reward_mapping, r.combined, penalty, w, state_.prev_quality, q);

    state_.prev_sc = r.sc;
    state_.prev_doe = r.doe;
    state_.prev_quality = q;
    ++state_.step;
    state_.done = state_.step >= config_.max_steps;
    return {observation(), r, state_.done};
  }

  /// Marks points visible from the current placement; returns how many are new.
  std::size_t observe_points() { return camplace::observe_points(scene_, maps_, state_.observed); }

  /// Coverage of the current placement (m^3).
  double space_coverage() const { return coverage_grid_.coverage(maps_); }

  /// Depth error of the points observed so far (meters).
  double depth_observation_error() const { return evaluator_.error(state_.observed); }

  std::size_t observed_count() const {
    return static_cast<std::size_t>(std::count(state_.observed.begin(), state_.observed.end(), true));
  }

  Observation observation() const {
    Observation obs;
    obs.cameras = state_.cameras;
    obs.step = state_.step;
    std::vector<Vec3> seen;
    for (std::size_t i = 0; i < scene_.size(); ++i) {
      if (!state_.observed[i]) continue;
      seen.push_back(scene_[i]);
      if (!obs.observed_bbox) {
        obs.observed_bbox = Aabb::of_point(scene_[i]);
      } else {
        obs.observed_bbox->expand(scene_[i]);
      }
    }
    if (seen.size() > config_.observation_cap) {
      const auto idx = farthest_point_sample(
          std::span<const Vec3>(seen), config_.observation_cap,
          mix_seed(state_.seed, 1000 + static_cast<std::uint64_t>(state_.step)));
      obs.observed_points.reserve(idx.size());
      for (std::size_t i : idx) obs.observed_points.push_back(seen[i]);
    } else {
      obs.observed_points = std::move(seen);
    }
    return obs;
  }

 private:
  static const PointCloud& checked_scene(const PointCloud& scene) {
    if (scene.size() < 2) throw Error(Errc::invalid_config, "scene needs at least two points");
    const Vec3 e = scene.bbox().extent();
    if (!(e.x > 0 && e.y > 0 && e.z > 0)) throw Error(Errc::degenerate_bbox, "scene bbox is flat");
    return scene;
  }

  double quality(double sc, double doe) const {
    const auto& w = config_.reward_weights;
    const double doe_norm = state_.doe_at_reset > 0 ? doe / state_.doe_at_reset : 0.0;
    return w.k_sc * sc / scene_.bbox().volume() - w.k_doe * doe_norm;
  }

  void refresh_maps() { maps_ = camera_shadow_maps(scene_, state_.cameras, cam_config_); }

  PointCloud scene_;
  EnvConfig config_;
  ShadowMapConfig cam_config_;
  DepthErrorEvaluator evaluator_;
  CoverageGrid coverage_grid_;
  EpisodeState state_;
  std::vector<ShadowMap> maps_;
};

}  // namespace camplace
