// Compares BPSO, annealing and random placement on the two-room scene.

#include <algorithm>
#include <cstdio>
#include <vector>

#include "camplace/camplace.hpp"

int main() {
  using namespace camplace;
  SceneSpec spec;
  spec.kind = SceneKind::two_room_doorway;
  spec.size = {6.0, 3.0, 2.5};
  const PointCloud scene = generate_synthetic_scene(spec);
  EnvConfig cfg;
  cfg.num_cameras = 2;

  const PlacementEvaluator eval(scene, cfg);
  std::vector<double> random_errors;
  for (std::uint64_t s = 0; s < 20; ++s) random_errors.push_back(eval.error(random_placement(scene, cfg, s)));
  std::nth_element(random_errors.begin(), random_errors.begin() + 10, random_errors.end());
  std::printf("nothing observed: %.4f m\n", eval.empty_error());
  std::printf("random median:    %.4f m\n", random_errors[10]);

  BpsoConfig bpso;
  bpso.seed = 1;
  const auto b = optimize_bpso(scene, cfg, bpso);
  std::printf("bpso:             %.4f m  %s\n", b.final_error, format_placement(b.placement).c_str());

  TdsaConfig tdsa;
  tdsa.seed = 1;
  const auto t = optimize_tdsa(scene, cfg, tdsa);
  std::printf("tdsa:             %.4f m  %s\n", t.final_error, format_placement(t.placement).c_str());
  return 0;
}
