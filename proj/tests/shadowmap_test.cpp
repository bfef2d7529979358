#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "camplace/shadowmap.hpp"
#include "camplace/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace camplace;

namespace {

ShadowMapConfig grid(int na, int np, double range, double eps = ShadowMapConfig::kAuto) {
  ShadowMapConfig c;
  c.n_azimuth = na;
  c.n_polar = np;
  c.range = range;
  c.compensation = eps;
  return c;
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
  }
  return PointCloud(std::move(pts));
}

std::vector<double> to_vector(const ShadowMap& sm) { return {sm.values().begin(), sm.values().end()}; }

}  // namespace

TEST(ShadowMapConfig, DefaultsAndValidation) {
  ShadowMapConfig c;
  EXPECT_DOUBLE_EQ(c.empty(), c.range);
  EXPECT_DOUBLE_EQ(c.eps(), ShadowMapConfig::kDefaultCompensationFraction * c.range);
  c.compensation = 0.2;
  const auto r = c.with_range(8.0);
  EXPECT_DOUBLE_EQ(r.eps(), 0.2);
  EXPECT_DOUBLE_EQ(r.empty(), 8.0);
  c.empty_value = 5.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(grid(2, 32, 4).validate(), Error);
  EXPECT_THROW(grid(64, 32, 0).validate(), Error);
  EXPECT_NO_THROW(grid(4, 2, 1).validate());
}

TEST(DirectionToCell, PoleAndEquator) {
  const auto cfg = grid(64, 32, 4);
  EXPECT_EQ(direction_to_cell({0, 0, 0}, {0, 0, 1}, cfg), (CellIndex{0, 0}));
  EXPECT_EQ(direction_to_cell({0, 0, 0}, {1, 0, 0}, cfg), (CellIndex{0, 16}));
  EXPECT_EQ(direction_to_cell({0, 0, 0}, {0, 0, -1}, cfg), (CellIndex{0, 31}));
  EXPECT_EQ(direction_to_cell({0, 0, 0}, {0, 1, 0}, cfg), (CellIndex{16, 16}));
  EXPECT_EQ(direction_to_cell({0, 0, 0}, {1, -1e-300, 0}, cfg).azimuth, 0);
  EXPECT_THROW(direction_to_cell({1, 1, 1}, {1, 1, 1}, cfg), Error);
}

TEST(DirectionToCell, RandomDirectionsStayInGrid) {
  const auto cfg = grid(64, 32, 4);
  Rng rng(3);
  for (int i = 0; i < 100000; ++i) {
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    if (i % 1000 == 0) d = {rng.normal(), 0.0, 0.0};
    if (d.squared_norm() == 0.0) continue;
    const CellIndex c = direction_to_cell({0, 0, 0}, d * rng.uniform(1e-6, 10.0), cfg);
    ASSERT_GE(c.azimuth, 0);
    ASSERT_LT(c.azimuth, 64);
    ASSERT_GE(c.polar, 0);
    ASSERT_LT(c.polar, 32);
  }
}

TEST(ComputeShadowMap, EmptyCloudIsAllEmptyValue) {
  const ShadowMap sm = compute_shadow_map(PointCloud{}, {0, 0, 0}, grid(64, 32, 4));
  for (double v : sm.values()) EXPECT_EQ(v, 4.0);
}

TEST(ComputeShadowMap, SingleSplatCoversExactlyItsWindow) {
  const auto cfg = grid(64, 32, 4);
  // The second point sits beyond range so only the first is splatted, with
  // nn_dist 0.05 supplied explicitly.
  const PointCloud c({{1, 0, 0.2}, {9, 9, 9}}, {}, {0.05, 1.0});
  const Vec3 cam{0, 0, 0.2};
  const ShadowMap sm = compute_shadow_map(c, cam, cfg);
  const auto d = oracle::polar_of(cam, c[0]);
  int covered = 0;
  for (int p = 0; p < 32; ++p) {
    for (int a = 0; a < 64; ++a) {
      const bool in = oracle::splat_covers(d, 0.05, a, p, 64, 32);
      EXPECT_EQ(sm.at(a, p), in ? 1.0 : 4.0) << a << "," << p;
      covered += in;
    }
  }
  EXPECT_GE(covered, 1);
}

TEST(ComputeShadowMap, MinRuleOnSharedDirection) {
  const auto cfg = grid(64, 32, 4);
  const PointCloud c({{1, 0, 0}, {2, 0, 0}}, {}, {0.05, 0.05});
  const ShadowMap sm = compute_shadow_map(c, {0, 0, 0}, cfg);
  EXPECT_EQ(sm.at(direction_to_cell({0, 0, 0}, {1, 0, 0}, cfg)), 1.0);
  for (double v : sm.values()) EXPECT_TRUE(v == 1.0 || v == 4.0);
}

TEST(ComputeShadowMap, MatchesPerCellOracleOnBoxRoom) {
  const PointCloud room = generate_synthetic_scene({SceneKind::box_room, {4, 4, 3}, 0.13});
  ASSERT_LE(room.size(), 5000u);
  const ShadowMapConfig cfg;
  for (const Vec3 cam : {Vec3{2, 2, 1.5}, Vec3{0.7, 3.1, 0.4}}) {
    const ShadowMap sm = compute_shadow_map(room, cam, cfg);
    const auto ref = oracle::shadow_map(room.points(), room.nn_dist(), cam, cfg);
    ASSERT_EQ(sm.values().size(), ref.size());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) mismatches += sm.values()[i] != ref[i];
    EXPECT_EQ(mismatches, 0u) << "camera " << cam;
  }
}

TEST(ComputeShadowMap, MatchesPerCellOracleOnRandomCloudNearPoles) {
  const PointCloud c = random_cloud(600, 17, -1.5, 1.5);
  const auto cfg = grid(32, 16, 3.0);
  // Cameras directly under and over dense regions exercise the pole rows.
  for (const Vec3 cam : {Vec3{0, 0, -1.6}, Vec3{0.1, -0.2, 1.7}, Vec3{0, 0, 0}}) {
    const ShadowMap sm = compute_shadow_map(c, cam, cfg);
    EXPECT_EQ(to_vector(sm), oracle::shadow_map(c.points(), c.nn_dist(), cam, cfg)) << cam;
  }
}

TEST(ComputeShadowMap, IndependentOfPointOrder) {
  const PointCloud c = random_cloud(500, 4, 0, 3);
  std::vector<std::size_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(8);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  const PointCloud shuffled = c.subset(perm);
  const ShadowMapConfig cfg;
  EXPECT_EQ(to_vector(compute_shadow_map(c, {1.5, 1.5, 1.5}, cfg)),
            to_vector(compute_shadow_map(shuffled, {1.5, 1.5, 1.5}, cfg)));
}

TEST(ConeShadowMap, MatchesFilterThenOracle) {
  const PointCloud c = random_cloud(1500, 5, -2, 2);
  const auto cfg = grid(64, 32, 4);
  ViewCone cone;
  cone.camera = {0.1, -0.3, 0.2};
  cone.forward = Vec3{1, 0.5, 0.2} * (1.0 / Vec3{1, 0.5, 0.2}.norm());
  cone.half_angle_h = deg_to_rad(30);
  cone.half_angle_v = deg_to_rad(22.5);
  std::vector<Vec3> kept;
  std::vector<double> nn;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (oracle::in_cone(cone, c[i])) {
      kept.push_back(c[i]);
      nn.push_back(c.nn_dist()[i]);
    }
  }
  ASSERT_GT(kept.size(), 20u);
  EXPECT_EQ(to_vector(compute_shadow_map_cone(c, cone, cfg)),
            oracle::shadow_map(kept, nn, cone.camera, cfg));
}

TEST(ConeShadowMap, WideConeEqualsOmnidirectionalInsideCone) {
  const PointCloud room = generate_synthetic_scene({SceneKind::box_room, {4, 4, 3}, 0.15});
  const ShadowMapConfig cfg;
  ViewCone cone;
  cone.camera = {2, 2, 1.5};
  cone.forward = {1, 0, 0};
  cone.half_angle_h = kPi / 2 - 1e-6;
  cone.half_angle_v = kPi / 2 - 1e-6;
  const ShadowMap omni = compute_shadow_map(room, cone.camera, cfg);
  const ShadowMap coned = compute_shadow_map_cone(room, cone, cfg);
  // Splats of excluded points reach at most their angular radius plus a cell
  // into the cone, so compare cells whose centers clear that margin.
  double max_theta = 0;
  for (std::size_t i = 0; i < room.size(); ++i) {
    max_theta = std::max(max_theta, std::atan(room.nn_dist()[i] / distance(room[i], cone.camera)));
  }
  const double margin = max_theta + cfg.azimuth_bin();
  int compared = 0;
  for (int p = 0; p < cfg.n_polar; ++p) {
    for (int a = 0; a < cfg.n_azimuth; ++a) {
      const double ac = (a + 0.5) * cfg.azimuth_bin(), pc = (p + 0.5) * cfg.polar_bin();
      const double x = std::sin(pc) * std::cos(ac);
      if (x < std::sin(margin)) continue;
      ++compared;
      EXPECT_EQ(coned.at(a, p), omni.at(a, p));
    }
  }
  EXPECT_GT(compared, cfg.n_azimuth * cfg.n_polar / 3);
}

TEST(ConeShadowMap, PointsBehindCameraLeaveGridEmpty) {
  const PointCloud c({{-1, 0, 0}, {-1, 0.1, 0}});
  ViewCone cone;
  cone.camera = {0, 0, 0};
  const ShadowMap sm = compute_shadow_map_cone(c, cone, grid(64, 32, 4));
  for (double v : sm.values()) EXPECT_EQ(v, 4.0);
}

TEST(ConeShadowMap, RejectsBadCone) {
  ViewCone cone;
  cone.forward = {2, 0, 0};
  EXPECT_THROW(compute_shadow_map_cone(PointCloud{}, cone, ShadowMapConfig{}), Error);
  cone.forward = {1, 0, 0};
  cone.half_angle_h = kPi / 2;
  EXPECT_THROW(compute_shadow_map_cone(PointCloud{}, cone, ShadowMapConfig{}), Error);
}

TEST(IsVisible, RangeGateAndOcclusion) {
  const auto cfg = grid(64, 32, 4, 0.12);
  const PointCloud wall({{1, 0, 0}, {1, 0.05, 0}, {1, -0.05, 0}});
  const ShadowMap sm = compute_shadow_map(wall, {0, 0, 0}, cfg);
  EXPECT_FALSE(is_visible(sm, {3, 0, 0}));
  EXPECT_TRUE(is_visible(sm, {1.1, 0, 0}));
  EXPECT_TRUE(is_visible(sm, {0, 3, 0}));
  EXPECT_FALSE(is_visible(sm, {0, 4.01, 0}));
  EXPECT_THROW(is_visible(sm, {0, 0, 0}), Error);
}

TEST(IsVisible, PointsDefiningTheirCellAreVisible) {
  const PointCloud room = generate_synthetic_scene({SceneKind::l_shape, {5, 5, 2.5}, 0.12});
  const ShadowMapConfig cfg;
  const Vec3 cam{1.2, 1.3, 1.25};
  const ShadowMap sm = compute_shadow_map(room, cam, cfg);
  std::size_t defining = 0;
  for (const Vec3& p : room.points()) {
    const Direction d = direction_of(cam, p);
    if (d.r > cfg.range) continue;
    if (sm.at(cell_of(d, cfg)) == d.r) {
      ++defining;
      EXPECT_TRUE(is_visible(sm, p)) << p;
    }
  }
  EXPECT_GT(defining, 100u);
}

TEST(IsVisible, AgreesWithOcclusionOracleOnLShape) {
  const PointCloud room = generate_synthetic_scene({SceneKind::l_shape, {5, 5, 2.5}, 0.15});
  const ShadowMapConfig cfg;
  const Vec3 cam{1.5, 3.5, 1.25};
  const ShadowMap sm = compute_shadow_map(room, cam, cfg);
  const oracle::OcclusionOracle ref(room.points(), room.nn_dist(), cam, cfg.range, cfg.eps());
  std::size_t agree = 0;
  for (std::size_t i = 0; i < room.size(); ++i) {
    const bool v = is_visible(sm, room[i]);
    if (v == ref.visible(i)) {
      ++agree;
      continue;
    }
    EXPECT_TRUE(ref.near_occlusion_boundary(i, cfg.azimuth_bin()) ||
                ref.near_depth_tie(i, cfg.azimuth_bin()))
        << "unexplained disagreement at " << room[i];
  }
  EXPECT_GE(static_cast<double>(agree) / room.size(), 0.97);
}

TEST(SubsetMonotonicity, CellsOfSubsetMapNeverBelowSuperset) {
  const PointCloud c = random_cloud(800, 12, 0, 4);
  const ShadowMapConfig cfg;
  const Vec3 cam{2, 2, 2};
  const ShadowMap full = compute_shadow_map(c, cam, cfg);
  Rng rng(2);
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  double prev_diff = std::numeric_limits<double>::infinity();
  std::vector<double> prev_cells;
  for (std::size_t k : {0u, 1u, 10u, 50u, 200u, 400u, 799u, 800u}) {
    const std::vector<std::size_t> idx(order.begin(), order.begin() + k);
    const ShadowMap part = compute_shadow_map(c.subset(idx), cam, cfg);
    for (std::size_t i = 0; i < full.values().size(); ++i) {
      ASSERT_GE(part.values()[i], full.values()[i]);
      if (!prev_cells.empty()) {
        ASSERT_LE(part.values()[i], prev_cells[i]);
      }
    }
    const double diff = shadow_map_abs_diff(part, full);
    EXPECT_GE(diff, 0.0);
    EXPECT_LE(diff, prev_diff);
    prev_diff = diff;
    prev_cells = to_vector(part);
  }
  EXPECT_EQ(prev_diff, 0.0);
}

TEST(AbsDiff, Examples) {
  const auto cfg = grid(8, 4, 4.0);
  ShadowMap a({0, 0, 0}, cfg), b({0, 0, 0}, cfg);
  EXPECT_EQ(shadow_map_abs_diff(a, a), 0.0);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 8; ++q) b.set(q, p, 3.0);
  EXPECT_DOUBLE_EQ(shadow_map_abs_diff(a, b), 1.0);
  ShadowMap moved({1, 0, 0}, cfg);
  EXPECT_THROW(shadow_map_abs_diff(a, moved), Error);
  ShadowMap finer({0, 0, 0}, grid(16, 4, 4.0));
  EXPECT_THROW(shadow_map_abs_diff(a, finer), Error);
}

TEST(Export, PgmAndCsvAgreeWithinQuantization) {
  const PointCloud room = generate_synthetic_scene({SceneKind::box_room, {4, 4, 3}, 0.2});
  const ShadowMapConfig cfg;
  const ShadowMap sm = compute_shadow_map(room, {2, 2, 1.5}, cfg);
  testutil::TempDir dir("export");
  write_shadow_map(dir / "m.pgm", sm);
  write_shadow_map(dir / "m.csv", sm);
  int w = 0, h = 0;
  const auto pix = read_pgm16(dir / "m.pgm", w, h);
  const auto rows = read_csv_grid(dir / "m.csv");
  ASSERT_EQ(w, cfg.n_azimuth);
  ASSERT_EQ(h, cfg.n_polar);
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(h));
  for (int p = 0; p < h; ++p) {
    ASSERT_EQ(rows[p].size(), static_cast<std::size_t>(w));
    for (int a = 0; a < w; ++a) {
      EXPECT_NEAR(rows[p][a], sm.at(a, p), 5e-7);
      EXPECT_NEAR(pix[static_cast<std::size_t>(p) * w + a] * cfg.range / 65535.0, rows[p][a],
                  cfg.range / 65535.0);
    }
  }
  EXPECT_THROW(write_shadow_map(dir / "m.png", sm), Error);
}

TEST(Export, PgmHeaderAndByteOrder) {
  const auto cfg = grid(4, 2, 2.0);
  ShadowMap sm({0, 0, 0}, cfg);
  sm.set(0, 0, 1.0);
  std::ostringstream out;
  write_shadow_map_pgm(out, sm);
  const std::string s = out.str();
  const std::string header = "P5\n4 2\n65535\n";
  ASSERT_EQ(s.size(), header.size() + 16);
  EXPECT_EQ(s.substr(0, header.size()), header);
  // round(1.0 / 2.0 * 65535) = 32768 = 0x8000, most significant byte first.
  EXPECT_EQ(static_cast<unsigned char>(s[header.size()]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 1]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 2]), 0xff);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 3]), 0xff);
}
