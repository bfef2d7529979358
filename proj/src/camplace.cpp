// camplace: command-line driver for scene generation, placement evaluation,
// optimization, the environment server, shadow-map export and reporting.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "camplace/camplace.hpp"
#include "camplace/tcp_server.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace camplace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct SceneFlags {
  std::string path;
  std::optional<double> downsample;
  double rotate_deg = 0.0;

  void add(CLI::App& app, bool required = true) {
    auto* opt = app.add_option("--scene", path, "Point cloud (.ply or x y z [r g b] text)");
    if (required) opt->required();
    app.add_option("--downsample", downsample, "Voxel edge for downsampling after load (m)")
        ->check(CLI::PositiveNumber);
    app.add_option("--rotate", rotate_deg, "Rotate the scene about the vertical axis (degrees)");
  }

  PointCloud load(bool allow_empty = false) const {
    LoadOptions opts;
    opts.allow_empty = allow_empty;
    opts.downsample_voxel = downsample;
    PointCloud cloud = load_point_cloud(path, opts);
    if (!cloud.empty()) cloud = rotate_scene(cloud, rotate_deg);
    return cloud;
  }

  std::string scene_id() const { return fs::path(path).stem().string(); }
};

struct ShadowMapFlags {
  ShadowMapConfig cfg;
  std::optional<double> compensation;

  void add(CLI::App& app) {
    app.add_option("--sm-azimuth", cfg.n_azimuth, "Shadow-map azimuth bins")->capture_default_str();
    app.add_option("--sm-polar", cfg.n_polar, "Shadow-map polar bins")->capture_default_str();
    app.add_option("--sm-compensation", compensation,
                   "Visibility slack (m); default 0.15 x camera range");
  }

  ShadowMapConfig config() const {
    ShadowMapConfig c = cfg;
    if (compensation) c.compensation = *compensation;
    return c;
  }
};

struct EnvFlags {
  EnvConfig cfg;
  std::string mapping = "cubic_level";
  ShadowMapFlags sm;
  std::optional<double> eval_range;

  void add(CLI::App& app) {
    app.add_option("--num-cameras", cfg.num_cameras, "Number of cameras")->capture_default_str();
    app.add_option("--camera-range", cfg.camera_range, "Camera depth range (m)")
        ->capture_default_str();
    app.add_option("--plane-height", cfg.plane_height_fraction,
                   "Camera plane height as a fraction of the bbox height")
        ->capture_default_str();
    app.add_option("--max-steps", cfg.max_steps, "Steps per episode")->capture_default_str();
    app.add_option("--max-step-move", cfg.max_step_move, "Largest camera move per step (m)")
        ->capture_default_str();
    app.add_option("--coverage-cells", cfg.coverage_cells_longest_axis,
                   "Coverage grid cells along the longest bbox axis")
        ->capture_default_str();
    app.add_option("--k-sc", cfg.reward_weights.k_sc, "Coverage reward weight")
        ->capture_default_str();
    app.add_option("--k-doe", cfg.reward_weights.k_doe, "Depth-error reward weight")
        ->capture_default_str();
    app.add_option("--k-p", cfg.reward_weights.k_p, "Reward when a camera leaves the footprint")
        ->capture_default_str();
    app.add_option("--reward-mapping", mapping, "none, cubic_delta or cubic_level")
        ->capture_default_str();
    app.add_option("--eval-range", eval_range,
                   "Range of the depth-error viewpoint maps (default: bbox diagonal)");
    app.add_option("--observation-cap", cfg.observation_cap, "Points per observation")
        ->capture_default_str();
    sm.add(app);
  }

  EnvConfig config() const {
    EnvConfig c = cfg;
    c.reward_mapping = parse_reward_mapping(mapping);
    c.sm_config = sm.config();
    c.eval_sm_range_override = eval_range;
    c.validate();
    return c;
  }
};

nlohmann::json env_json(const EnvConfig& c) {
  return {{"num_cameras", c.num_cameras},
          {"camera_range", c.camera_range},
          {"plane_height_fraction", c.plane_height_fraction},
          {"max_steps", c.max_steps},
          {"max_step_move", c.max_step_move},
          {"coverage_cells", c.coverage_cells_longest_axis},
          {"k_sc", c.reward_weights.k_sc},
          {"k_doe", c.reward_weights.k_doe},
          {"k_p", c.reward_weights.k_p},
          {"reward_mapping", std::string(reward_mapping_name(c.reward_mapping))},
          {"sm_azimuth", c.sm_config.n_azimuth},
          {"sm_polar", c.sm_config.n_polar},
          {"sm_compensation", c.sm_config.compensation},
          {"eval_range", c.eval_sm_range_override ? nlohmann::json(*c.eval_sm_range_override)
                                                  : nlohmann::json(nullptr)}};
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

Vec3 parse_vec3(const std::string& text) {
  const Placement p = parse_placement(text);
  if (p.size() != 1) throw Error(Errc::parse_error, "expected a single x,y,z triple");
  return p.positions.front();
}

// ---- scene ----------------------------------------------------------------

struct SceneCmd {
  std::string kind = "box_room";
  std::vector<double> size{4.0, 4.0, 3.0};
  SceneSpec spec;
  std::string out;
  bool binary = false;

  int run() {
    const auto k = parse_scene_kind(kind);
    if (!k) throw Error(Errc::invalid_config, "unknown scene kind '" + kind + "'");
    spec.kind = *k;
    spec.size = {size[0], size[1], size[2]};
    const PointCloud cloud = generate_synthetic_scene(spec);
    write_ply(out, cloud, binary);
    std::cout << "points\n" << cloud.size() << "\n";
    return kExitOk;
  }
};

// ---- evaluate -------------------------------------------------------------

struct EvaluateCmd {
  SceneFlags scene;
  EnvFlags env;
  std::string cameras;

  int run() {
    Placement placement = parse_placement(cameras);
    EnvConfig cfg = env.cfg;
    cfg.num_cameras = static_cast<int>(placement.size());
    env.cfg = cfg;
    const EnvConfig config = env.config();
    const PointCloud cloud = scene.load();
    const PlacementEvaluator eval(cloud, config);
    const auto maps = camera_shadow_maps(cloud, placement, config.camera_sm_config());
    std::vector<bool> flags(cloud.size(), false);
    const std::size_t observed = observe_points(cloud, maps, flags);
    const CoverageGrid grid(cloud.bbox(), config.coverage_cells_longest_axis);
    std::cout << "depth_error,space_coverage,coverage_fraction,observed,points\n"
              << fmt6(eval.error_of_flags(flags)) << ',' << fmt6(grid.coverage(maps)) << ','
              << fmt6(grid.coverage(maps) / cloud.bbox().volume()) << ',' << observed << ','
              << cloud.size() << '\n';
    return kExitOk;
  }
};

// ---- optimize -------------------------------------------------------------

struct OptimizeCmd {
  SceneFlags scene;
  EnvFlags env;
  std::string algo = "bpso";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string scene_id;
  bool record_time = false;
  BpsoConfig bpso;
  TdsaConfig tdsa;

  void add_algo_flags(CLI::App& app) {
    app.add_option("--bpso-grid-x", bpso.grid_nx, "BPSO lattice columns")->capture_default_str();
    app.add_option("--bpso-grid-y", bpso.grid_ny, "BPSO lattice rows")->capture_default_str();
    app.add_option("--bpso-swarm", bpso.swarm_size, "BPSO particles")->capture_default_str();
    app.add_option("--bpso-iterations", bpso.iterations, "BPSO iterations")->capture_default_str();
    app.add_option("--bpso-inertia-start", bpso.inertia_start)->capture_default_str();
    app.add_option("--bpso-inertia-end", bpso.inertia_end)->capture_default_str();
    app.add_option("--bpso-c1", bpso.c1, "Cognitive weight")->capture_default_str();
    app.add_option("--bpso-c2", bpso.c2, "Social weight")->capture_default_str();
    app.add_option("--bpso-vmax", bpso.v_max, "Velocity clamp")->capture_default_str();
    app.add_option("--tdsa-iterations", tdsa.iterations, "Annealing iterations")
        ->capture_default_str();
    app.add_option("--tdsa-t0", tdsa.t0, "Initial temperature")->capture_default_str();
    app.add_option("--tdsa-cooling", tdsa.cooling, "Geometric cooling factor")
        ->capture_default_str();
    app.add_option("--tdsa-sigma", tdsa.sigma0, "Move scale at T0 (m)")->capture_default_str();
    app.add_flag("--tdsa-dimension-moves", tdsa.allow_dimension_moves,
                 "Allow camera birth/death moves");
    app.add_option("--tdsa-birth-death", tdsa.birth_death_probability)->capture_default_str();
    app.add_option("--tdsa-camera-cost", tdsa.camera_cost, "Energy per camera (m)")
        ->capture_default_str();
    app.add_option("--tdsa-max-cameras", tdsa.max_cameras)->capture_default_str();
  }

  nlohmann::json config_json(const EnvConfig& cfg) const {
    nlohmann::json j = env_json(cfg);
    j["algo"] = algo;
    j["downsample"] = scene.downsample ? nlohmann::json(*scene.downsample) : nlohmann::json(nullptr);
    if (algo == "bpso") {
      j["bpso"] = {{"grid_x", bpso.grid_nx},         {"grid_y", bpso.grid_ny},
                   {"swarm", bpso.swarm_size},       {"iterations", bpso.iterations},
                   {"inertia_start", bpso.inertia_start}, {"inertia_end", bpso.inertia_end},
                   {"c1", bpso.c1},                  {"c2", bpso.c2},
                   {"v_max", bpso.v_max}};
    } else if (algo == "tdsa") {
      j["tdsa"] = {{"iterations", tdsa.iterations},
                   {"t0", tdsa.t0},
                   {"cooling", tdsa.cooling},
                   {"sigma0", tdsa.sigma0},
                   {"dimension_moves", tdsa.allow_dimension_moves},
                   {"birth_death", tdsa.birth_death_probability},
                   {"camera_cost", tdsa.camera_cost},
                   {"max_cameras", tdsa.max_cameras}};
    }
    return j;
  }

  int run() {
    if (algo != "bpso" && algo != "tdsa" && algo != "random") {
      throw Error(Errc::unknown_mode, "unknown algo '" + algo + "'");
    }
    const EnvConfig cfg = env.config();
    const PointCloud cloud = scene.load();
    const auto t0 = std::chrono::steady_clock::now();
    OptimizationResult result;
    if (algo == "bpso") {
      bpso.seed = seed;
      result = optimize_bpso(cloud, cfg, bpso);
    } else if (algo == "tdsa") {
      tdsa.seed = seed;
      result = optimize_tdsa(cloud, cfg, tdsa);
    } else {
      result.placement = random_placement(cloud, cfg, seed);
      result.final_error = PlacementEvaluator(cloud, cfg).error(result.placement);
      result.evaluations = 1;
      result.history.push_back({0, result.final_error});
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(out_dir);
    std::string hist = "iteration,best_error\n";
    for (const auto& h : result.history) {
      hist += std::to_string(h.iteration) + ',' + fmt6(h.best_error) + '\n';
    }
    write_text(fs::path(out_dir) / "history.csv", hist);
    write_text(fs::path(out_dir) / "placement.txt", format_placement(result.placement) + "\n");

    RunReport report;
    report.scene = scene_id.empty() ? scene.scene_id() : scene_id;
    report.rotation_deg = scene.rotate_deg;
    report.approach = algo;
    report.final_error = result.final_error;
    report.wall_time_s = record_time ? elapsed : 0.0;
    report.seed = seed;
    report.config_digest = config_digest(config_json(cfg));
    write_text(fs::path(out_dir) / "report.csv",
               std::string(kReportHeader) + "\n" + format_report_row(report) + "\n");

    std::cout << "approach,seed,final_error,cameras,evaluations\n"
              << algo << ',' << seed << ',' << fmt6(result.final_error) << ','
              << result.placement.size() << ',' << result.evaluations << '\n';
    return kExitOk;
  }
};

// ---- episode --------------------------------------------------------------

struct EpisodeCmd {
  SceneFlags scene;
  EnvFlags env;
  std::uint64_t seed = 0;
  std::string policy = "random";
  std::string actions_path;
  std::string trajectory_path;
  std::optional<std::string> initial;

  std::vector<std::vector<Action>> read_actions(int cams) const {
    std::ifstream in(actions_path);
    if (!in) throw Error(Errc::io_error, "cannot open " + actions_path);
    std::vector<std::vector<Action>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::vector<double> v;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) v.push_back(detail::parse_coord(tok));
      if (static_cast<int>(v.size()) != 2 * cams) {
        throw Error(Errc::action_length_mismatch,
                    actions_path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(2 * cams) + " values");
      }
      std::vector<Action> step;
      for (int i = 0; i < cams; ++i) step.push_back({v[2 * i], v[2 * i + 1]});
      out.push_back(std::move(step));
    }
    return out;
  }

  int run() {
    if (policy != "random" && policy != "zero" && policy != "file") {
      throw Error(Errc::unknown_mode, "unknown policy '" + policy + "'");
    }
    if (policy == "file" && actions_path.empty()) {
      throw Error(Errc::invalid_config, "--policy file needs --actions");
    }
    const EnvConfig cfg = env.config();
    std::vector<std::vector<Action>> scripted;
    if (policy == "file") scripted = read_actions(cfg.num_cameras);
    std::optional<Placement> start;
    if (initial) start = parse_placement(*initial);

    Environment e(scene.load(), cfg);
    Observation obs = e.reset(seed, start);
    Rng rng(mix_seed(seed, 7));
    std::string traj = "step,camera,x,y,z\n";
    auto record = [&](const Observation& o) {
      for (std::size_t c = 0; c < o.cameras.size(); ++c) {
        const Vec3& p = o.cameras.positions[c];
        traj += std::to_string(o.step) + ',' + std::to_string(c) + ',' + fmt6(p.x) + ',' +
                fmt6(p.y) + ',' + fmt6(p.z) + '\n';
      }
    };
    record(obs);
    std::cout << "step,sc,doe,penalty,combined,mapped\n";
    const int steps = policy == "file" ? std::min<int>(cfg.max_steps, static_cast<int>(scripted.size()))
                                       : cfg.max_steps;
    const double m = cfg.max_step_move;
    for (int s = 0; s < steps; ++s) {
      std::vector<Action> act(static_cast<std::size_t>(cfg.num_cameras), Action{0.0, 0.0});
      if (policy == "file") {
        act = scripted[static_cast<std::size_t>(s)];
      } else if (policy == "random") {
        for (auto& a : act) a = {rng.uniform(-m, m), rng.uniform(-m, m)};
      }
      const StepResult r = e.step(act);
      record(r.observation);
      std::cout << r.observation.step << ',' << fmt6(r.reward.sc) << ',' << fmt6(r.reward.doe)
                << ',' << (r.reward.penalty ? 1 : 0) << ',' << fmt6(r.reward.combined) << ','
                << fmt6(r.reward.mapped) << '\n';
    }
    if (!trajectory_path.empty()) write_text(trajectory_path, traj);
    return kExitOk;
  }
};

// ---- serve ----------------------------------------------------------------

struct ServeCmd {
  SceneFlags scene;
  EnvFlags env;
  std::string transport = "stdio";
  int port = 5555;
  int max_connections = 0;

  int run() {
    if (transport != "stdio" && transport != "tcp") {
      throw Error(Errc::unknown_mode, "unknown transport '" + transport + "'");
    }
    const EnvConfig cfg = env.config();
    auto cloud = std::make_shared<const PointCloud>(scene.load());
    if (transport == "stdio") {
      std::ios::sync_with_stdio(false);
      Session session(cloud, cfg);
      serve_stream(std::cin, std::cout, session);
      return kExitOk;
    }
    Socket listener = listen_tcp(port);
    std::cerr << "listening on 127.0.0.1:" << bound_port(listener) << std::endl;
    serve_tcp(std::move(listener), cloud, cfg, max_connections);
    return kExitOk;
  }
};

// ---- shadowmap ------------------------------------------------------------

struct ShadowMapCmd {
  SceneFlags scene;
  ShadowMapFlags sm;
  double range = 4.0;
  std::string camera;
  std::string out;

  int run() {
    ShadowMapConfig cfg = sm.config().with_range(range);
    cfg.validate();
    const Vec3 cam = parse_vec3(camera);
    const PointCloud cloud = scene.load(/*allow_empty=*/true);
    write_shadow_map(out, compute_shadow_map(cloud, cam, cfg));
    return kExitOk;
  }
};

// ---- report ---------------------------------------------------------------

struct ReportCmd {
  std::vector<std::string> inputs;
  std::string out;

  int run() {
    std::vector<RunReport> rows;
    for (const auto& in : inputs) {
      fs::path p = in;
      if (fs::is_directory(p)) p /= "report.csv";
      std::ifstream f(p);
      if (!f) throw Error(Errc::io_error, "cannot open " + p.string());
      auto r = read_report_rows(f, p.string());
      rows.insert(rows.end(), r.begin(), r.end());
    }
    std::ostringstream ss;
    write_summary_csv(ss, aggregate_reports(rows));
    if (out.empty()) {
      std::cout << ss.str();
    } else {
      write_text(out, ss.str());
    }
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera placement toolkit for indoor point clouds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "camplace 0.1.0");

  SceneCmd scene_cmd;
  auto* scene = app.add_subcommand("scene", "Generate a synthetic indoor scene as PLY");
  scene->add_option("--kind", scene_cmd.kind, "box_room, two_room_doorway or l_shape")
      ->capture_default_str();
  scene->add_option("--size", scene_cmd.size, "Room extent x,y,z (m)")
      ->delimiter(',')
      ->expected(3);
  scene->add_option("--spacing", scene_cmd.spec.spacing, "Sample spacing (m)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  scene->add_flag("--jitter", scene_cmd.spec.jitter, "Jitter samples within their surface");
  scene->add_option("--seed", scene_cmd.spec.seed, "Jitter seed");
  scene->add_option("--door-width", scene_cmd.spec.door_width)->capture_default_str();
  scene->add_option("--door-height", scene_cmd.spec.door_height)->capture_default_str();
  scene->add_option("--notch", scene_cmd.spec.notch_fraction, "L-shape notch fraction")
      ->capture_default_str();
  scene->add_option("--out", scene_cmd.out, "Output PLY path")->required();
  scene->add_flag("--binary", scene_cmd.binary, "Write binary little-endian PLY");

  EvaluateCmd eval_cmd;
  auto* evaluate = app.add_subcommand("evaluate", "Depth error and coverage of a placement");
  eval_cmd.scene.add(*evaluate);
  eval_cmd.env.add(*evaluate);
  evaluate->add_option("--cameras", eval_cmd.cameras, "Placement \"x,y,z;x,y,z;...\"")->required();

  OptimizeCmd opt_cmd;
  auto* optimize = app.add_subcommand("optimize", "Run a placement optimizer");
  opt_cmd.scene.add(*optimize);
  opt_cmd.env.add(*optimize);
  optimize->add_option("--algo", opt_cmd.algo, "bpso, tdsa or random")->capture_default_str();
  optimize->add_option("--seed", opt_cmd.seed, "Random seed")->capture_default_str();
  optimize->add_option("--out-dir", opt_cmd.out_dir, "Directory for history, placement, report")
      ->capture_default_str();
  optimize->add_option("--scene-id", opt_cmd.scene_id, "Scene name in the report (default: file stem)");
  optimize->add_flag("--record-time", opt_cmd.record_time, "Store wall time in the report");
  opt_cmd.add_algo_flags(*optimize);

  EpisodeCmd ep_cmd;
  auto* episode = app.add_subcommand("episode", "Run one environment episode and print metrics");
  ep_cmd.scene.add(*episode);
  ep_cmd.env.add(*episode);
  episode->add_option("--seed", ep_cmd.seed, "Episode seed")->capture_default_str();
  episode->add_option("--policy", ep_cmd.policy, "random, zero or file")->capture_default_str();
  episode->add_option("--actions", ep_cmd.actions_path, "CSV of dx,dy per camera, one step per line");
  episode->add_option("--initial", ep_cmd.initial, "Start placement \"x,y,z;...\"");
  episode->add_option("--trajectory", ep_cmd.trajectory_path, "Write camera trajectories as CSV");

  ServeCmd serve_cmd;
  auto* serve = app.add_subcommand("serve", "Serve the environment over stdio or TCP");
  serve_cmd.scene.add(*serve);
  serve_cmd.env.add(*serve);
  serve->add_option("--transport", serve_cmd.transport, "stdio or tcp")->capture_default_str();
  serve->add_option("--port", serve_cmd.port, "TCP port on 127.0.0.1 (0 picks one)")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--max-connections", serve_cmd.max_connections,
                    "Exit after this many TCP connections (0: never)");

  ShadowMapCmd sm_cmd;
  auto* shadow = app.add_subcommand("shadowmap", "Write the spherical shadow map of one camera");
  sm_cmd.scene.add(*shadow);
  sm_cmd.sm.add(*shadow);
  shadow->add_option("--range", sm_cmd.range, "Depth range (m)")->capture_default_str();
  shadow->add_option("--camera", sm_cmd.camera, "Camera position x,y,z")->required();
  shadow->add_option("--out", sm_cmd.out, "Output .pgm or .csv")->required();

  ReportCmd report_cmd;
  auto* report = app.add_subcommand("report", "Aggregate run reports per scene and approach");
  report->add_option("inputs", report_cmd.inputs, "Run directories or report CSV files")
      ->required();
  report->add_option("--out", report_cmd.out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*scene) return scene_cmd.run();
    if (*evaluate) return eval_cmd.run();
    if (*optimize) return opt_cmd.run();
    if (*episode) return ep_cmd.run();
    if (*serve) return serve_cmd.run();
    if (*shadow) return sm_cmd.run();
    if (*report) return report_cmd.run();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
