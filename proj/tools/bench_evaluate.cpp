// Times placement evaluation and environment steps on a synthetic scene.

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "CLI11.hpp"
#include "camplace/camplace.hpp"

using namespace camplace;

namespace {

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time placement evaluation"};
  double spacing = 0.1;
  int cameras = 2, evals = 50, steps = 20;
  app.add_option("--spacing", spacing, "Scene point spacing (m)")->capture_default_str();
  app.add_option("--num-cameras", cameras)->capture_default_str();
  app.add_option("--evals", evals, "Random placements to evaluate")->capture_default_str();
  app.add_option("--steps", steps, "Environment steps to time")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const PointCloud scene = generate_synthetic_scene({SceneKind::two_room_doorway, {6, 3, 2.5}, spacing});
    EnvConfig cfg;
    cfg.num_cameras = cameras;
    cfg.max_steps = std::max(steps, 1);

    auto t0 = std::chrono::steady_clock::now();
    const PlacementEvaluator ev(scene, cfg);
    const double setup = since(t0);
    t0 = std::chrono::steady_clock::now();
    double sum = 0;
    for (int i = 0; i < evals; ++i) sum += ev.error(random_placement(scene, cfg, static_cast<std::uint64_t>(i)));
    const double per_eval = since(t0) / evals;

    Environment env(scene, cfg);
    t0 = std::chrono::steady_clock::now();
    env.reset(1);
    const double reset = since(t0);
    const std::vector<Action> act(static_cast<std::size_t>(cameras), Action{0.05, 0.05});
    t0 = std::chrono::steady_clock::now();
    for (int s = 0; s < steps; ++s) {
      if (env.step(act).done) break;
    }
    const double per_step = since(t0) / steps;

    std::printf("points %zu\nsetup_s %.4f\neval_ms %.3f\nmean_error %.5f\nreset_s %.4f\nstep_ms %.3f\n",
                scene.size(), setup, per_eval * 1e3, sum / evals, reset, per_step * 1e3);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
