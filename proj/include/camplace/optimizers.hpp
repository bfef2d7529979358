#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "camplace/environment.hpp"
#include "camplace/error.hpp"
#include "camplace/pointcloud.hpp"
#include "camplace/random.hpp"

namespace camplace {

struct HistoryEntry {
  int iteration = 0;
  double best_error = 0.0;
};

struct OptimizationResult {
  Placement placement;
  double final_error = 0.0;
  /// Best objective so far after each iteration. The objective is the depth
  /// error, plus the per-camera cost when annealing with dimension moves.
  std::vector<HistoryEntry> history;
  /// Objective of the current annealing state after each iteration (TDSA only).
  std::vector<double> current_trace;
  std::size_t evaluations = 0;
};

/// Offline depth-error scorer for a fixed scene: one observation pass from
/// the placement, then the five-viewpoint depth error.
class PlacementEvaluator {
 public:
  PlacementEvaluator(const PointCloud& scene, const EnvConfig& config)
      : scene_(scene), config_(config.validated()), evaluator_(scene, config_) {
    cam_config_ = config_.camera_sm_config();
  }

  const PointCloud& scene() const { return scene_; }
  const EnvConfig& config() const { return config_; }
  double plane_height() const { return config_.plane_height(scene_.bbox()); }

  /// Points visible from a single camera.
  std::vector<bool> visibility(const Vec3& camera) const {
    const ShadowMap sm = compute_shadow_map(scene_, camera, cam_config_);
    std::vector<bool> flags(scene_.size(), false);
    observe_points(scene_, std::span<const ShadowMap>(&sm, 1), flags);
    return flags;
  }

  double error_of_flags(const std::vector<bool>& flags) const { return evaluator_.error(flags); }

  /// Depth error for any number of cameras.
  double error(const Placement& placement) const {
    std::vector<bool> flags(scene_.size(), false);
    const auto maps = camera_shadow_maps(scene_, placement, cam_config_);
    observe_points(scene_, maps, flags);
    return evaluator_.error(flags);
  }

  /// The value when no point is observed.
  double empty_error() const { return evaluator_.error(std::vector<bool>(scene_.size(), false)); }

 private:
  const PointCloud& scene_;
  EnvConfig config_;
  DepthErrorEvaluator evaluator_;
  ShadowMapConfig cam_config_;
};

inline double evaluate_placement(const PointCloud& scene, const Placement& placement,
                                 const EnvConfig& config) {
  if (placement.size() == 0 || static_cast<int>(placement.size()) != config.num_cameras) {
    throw Error(Errc::invalid_placement, "placement must hold num_cameras positions");
  }
  return PlacementEvaluator(scene, config).error(placement);
}

/// Uniform positions over the bbox footprint on the camera plane.
inline Placement random_placement(const PointCloud& scene, const EnvConfig& config,
                                  std::uint64_t seed, int count = -1) {
  const Aabb& b = scene.bbox();
  const double z = config.plane_height(b);
  Rng rng(seed);
  Placement p;
  const int n = count < 0 ? config.num_cameras : count;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(b.min.x, b.max.x);
    const double y = rng.uniform(b.min.y, b.max.y);
    p.positions.push_back({x, y, z});
  }
  return p;
}

struct BpsoConfig {
  int grid_nx = 16;
  int grid_ny = 16;
  int swarm_size = 30;
  int iterations = 100;
  double inertia_start = 0.9;
  double inertia_end = 0.4;
  double c1 = 2.0;
  double c2 = 2.0;
  double v_max = 4.0;
  std::uint64_t seed = 0;
};

/// Candidate positions at the cell centers of an nx x ny lattice over the
/// footprint, row-major in y.
inline std::vector<Vec3> candidate_lattice(const Aabb& bbox, int nx, int ny, double z) {
  std::vector<Vec3> out;
  const Vec3 e = bbox.extent();
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      out.push_back({bbox.min.x + (i + 0.5) * e.x / nx, bbox.min.y + (j + 0.5) * e.y / ny, z});
    }
  }
  return out;
}

/// Keeps exactly k ones: surplus ones with the lowest probability are
/// dropped, missing ones are taken from the most probable zeros. Ties go to
/// the lower index.
inline void repair_bits(std::vector<std::uint8_t>& bits, const std::vector<double>& prob,
                        std::size_t k) {
  const auto ones = static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  if (ones == k) return;
  std::vector<std::size_t> pool;
  const std::uint8_t want = ones > k ? 1 : 0;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] == want) pool.push_back(j);
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [&](std::size_t a, std::size_t b) { return prob[a] > prob[b]; });
  if (ones > k) {
    for (std::size_t r = k; r < pool.size(); ++r) bits[pool[r]] = 0;
  } else {
    for (std::size_t r = 0; r < k - ones; ++r) bits[pool[r]] = 1;
  }
}

/// Binary particle swarm over a candidate lattice; each particle is a bit
/// vector with exactly num_cameras ones.
inline OptimizationResult optimize_bpso(const PointCloud& scene, const EnvConfig& env,
                                        const BpsoConfig& cfg) {
  if (cfg.grid_nx < 1 || cfg.grid_ny < 1 || cfg.swarm_size < 1 || cfg.iterations < 0) {
    throw Error(Errc::invalid_config, "BPSO counts must be positive");
  }
  const PlacementEvaluator eval(scene, env);
  const auto candidates = candidate_lattice(scene.bbox(), cfg.grid_nx, cfg.grid_ny, eval.plane_height());
  const std::size_t m = candidates.size();
  const auto k = static_cast<std::size_t>(env.num_cameras);
  if (m < k) throw Error(Errc::infeasible_lattice, "fewer candidates than cameras");

  std::vector<std::optional<std::vector<bool>>> seen(m);
  std::map<std::vector<std::uint8_t>, double> memo;
  OptimizationResult result;
  auto fitness = [&](const std::vector<std::uint8_t>& bits) {
    if (auto it = memo.find(bits); it != memo.end()) return it->second;
    std::vector<bool> flags(scene.size(), false);
    for (std::size_t j = 0; j < m; ++j) {
      if (!bits[j]) continue;
      if (!seen[j]) seen[j] = eval.visibility(candidates[j]);
      for (std::size_t i = 0; i < flags.size(); ++i) {
        if ((*seen[j])[i]) flags[i] = true;
      }
    }
    const double e = eval.error_of_flags(flags);
    ++result.evaluations;
    memo.emplace(bits, e);
    return e;
  };

  Rng rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.swarm_size);
  std::vector<std::vector<std::uint8_t>> x(n, std::vector<std::uint8_t>(m, 0));
  std::vector<std::vector<double>> v(n, std::vector<double>(m, 0.0));
  std::vector<std::vector<std::uint8_t>> pbest(n);
  std::vector<double> pbest_err(n);
  std::vector<std::uint8_t> gbest;
  double gbest_err = std::numeric_limits<double>::infinity();

  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t r = 0; r < k; ++r) {
      std::swap(idx[r], idx[r + rng.below(m - r)]);
      x[p][idx[r]] = 1;
    }
    pbest[p] = x[p];
    pbest_err[p] = fitness(x[p]);
    if (pbest_err[p] < gbest_err) {
      gbest_err = pbest_err[p];
      gbest = x[p];
    }
  }
  result.history.push_back({0, gbest_err});

  std::vector<double> prob(m);
  for (int it = 1; it <= cfg.iterations; ++it) {
    const double frac = cfg.iterations > 1 ? static_cast<double>(it - 1) / (cfg.iterations - 1) : 0.0;
    const double w = cfg.inertia_start + (cfg.inertia_end - cfg.inertia_start) * frac;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t j = 0; j < m; ++j) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        double vel = w * v[p][j] + cfg.c1 * r1 * (pbest[p][j] - x[p][j]) +
                     cfg.c2 * r2 * (gbest[j] - x[p][j]);
        vel = std::clamp(vel, -cfg.v_max, cfg.v_max);
        v[p][j] = vel;
        prob[j] = 1.0 / (1.0 + std::exp(-vel));
        x[p][j] = rng.uniform() < prob[j] ? 1 : 0;
      }
      repair_bits(x[p], prob, k);
      const double e = fitness(x[p]);
      if (e < pbest_err[p]) {
        pbest_err[p] = e;
        pbest[p] = x[p];
      }
      if (e < gbest_err) {
        gbest_err = e;
        gbest = x[p];
      }
    }
    result.history.push_back({it, gbest_err});
  }

  for (std::size_t j = 0; j < m; ++j) {
    if (gbest[j]) result.placement.positions.push_back(candidates[j]);
  }
  result.final_error = gbest_err;
  return result;
}

struct TdsaConfig {
  int iterations = 2000;
  double t0 = 1.0;
  double cooling = 0.995;
  double sigma0 = 0.5;
  bool allow_dimension_moves = false;
  double birth_death_probability = 0.1;
  /// Energy added per camera when dimension moves are enabled (meters).
  double camera_cost = 0.05;
  int max_cameras = 8;
  std::uint64_t seed = 0;
};

/// Simulated annealing on the continuous camera plane, optionally with
/// birth/death moves that change the number of cameras.
inline OptimizationResult optimize_tdsa(const PointCloud& scene, const EnvConfig& env,
                                        const TdsaConfig& cfg) {
  if (!(cfg.cooling > 0 && cfg.cooling < 1)) throw Error(Errc::invalid_config, "cooling in (0,1)");
  if (!(cfg.sigma0 > 0)) throw Error(Errc::invalid_config, "sigma0 must be > 0");
  if (!(cfg.t0 > 0)) throw Error(Errc::invalid_config, "t0 must be > 0");
  if (cfg.iterations < 0) throw Error(Errc::invalid_config, "iterations must be >= 0");

  const PlacementEvaluator eval(scene, env);
  const Aabb& b = scene.bbox();
  Rng rng(cfg.seed);
  OptimizationResult result;
  auto energy_of = [&](const Placement& p, double err) {
    return cfg.allow_dimension_moves ? err + cfg.camera_cost * static_cast<double>(p.size()) : err;
  };
  auto score = [&](const Placement& p) {
    ++result.evaluations;
    return eval.error(p);
  };

  Placement current = random_placement(scene, env, rng.next_u64());
  double current_err = score(current);
  double current_energy = energy_of(current, current_err);
  Placement best = current;
  double best_err = current_err;
  double best_energy = current_energy;
  result.history.push_back({0, best_energy});
  result.current_trace.push_back(current_energy);

  double t = cfg.t0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    Placement cand = current;
    const double u = rng.uniform();
    if (cfg.allow_dimension_moves && u < cfg.birth_death_probability) {
      const bool birth = rng.uniform() < 0.5;
      if (birth && static_cast<int>(cand.size()) < cfg.max_cameras) {
        const Placement extra = random_placement(scene, env, rng.next_u64(), 1);
        cand.positions.push_back(extra.positions.front());
      } else if (!birth && cand.size() > 1) {
        cand.positions.erase(cand.positions.begin() +
                             static_cast<std::ptrdiff_t>(rng.below(cand.size())));
      }
    } else {
      const double sigma = cfg.sigma0 * t / cfg.t0;
      Vec3& p = cand.positions[rng.below(cand.size())];
      p.x = std::clamp(p.x + sigma * rng.normal(), b.min.x, b.max.x);
      p.y = std::clamp(p.y + sigma * rng.normal(), b.min.y, b.max.y);
    }
    const double cand_err = score(cand);
    const double cand_energy = energy_of(cand, cand_err);
    const double delta = cand_energy - current_energy;
    const bool accept = delta <= 0.0 || rng.uniform() < std::exp(-delta / t);
    if (accept) {
      current = std::move(cand);
      current_err = cand_err;
      current_energy = cand_energy;
      if (current_energy < best_energy) {
        best = current;
        best_err = current_err;
        best_energy = current_energy;
      }
    }
    result.history.push_back({it, best_energy});
    result.current_trace.push_back(current_energy);
    t *= cfg.cooling;
  }
  result.placement = std::move(best);
  result.final_error = best_err;
  return result;
}

}  // namespace camplace
