// Quickstart: train small models on LineWorld, then drive one episode with
// TDP and with per-step replanning and compare their denoiser cost.
//
//   ./build/demo/quickstart [train_steps]

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

#include "tdp/harness/pipeline.hpp"

using namespace tdp;

int main(int argc, char** argv) {
  const int steps = argc > 1 ? std::atoi(argv[1]) : 20000;
  const PointMassEnv env = line_world_env();

  // Plan geometry: H = 8 elements, K = 32 diffusion steps, kappa = K / H.
  PlannerConfig cfg;
  cfg.horizon = 8;
  cfg.diffusion_steps = 32;
  cfg.kappa = 4;
  cfg.candidates = 16;
  cfg.top_m = 4;

  TrainPlan plan;
  plan.denoiser.steps = steps;
  plan.value.steps = steps;
  plan.denoiser.channels = 16;
  plan.value.value_channels = 16;
  std::cout << "training on " << 100 << " expert LineWorld episodes (" << steps << " steps each network)\n";
  const TrainedModels trained = train_models(gen_dataset(env, Tier::expert, 100, 1), cfg, plan);
  std::cout << "denoiser loss " << trained.denoiser.trace.window_mean(0, 100) << " -> "
            << trained.denoiser.trace.tail_mean(200) << '\n';
  const auto models = trained.planning(cfg.array_mode());

  TdpPlanner tdp(models, cfg);
  PerStepReplanPlanner baseline(models, cfg);
  const EpisodeResult a = run_episode(env, tdp, 0, 0, true);
  const EpisodeResult b = run_episode(env, baseline, 0, 0, true);

  std::cout << "\n  t   position   action  replanned  criterion\n";
  for (const auto& s : a.steps) {
    if (s.t % 4 != 0 && !s.replanned) continue;
    std::cout << std::setw(3) << s.t << std::setw(11) << std::fixed << std::setprecision(3)
              << -s.reward << std::setw(9) << s.action[0] << std::setw(11) << (s.replanned ? "yes" : "no")
              << std::setw(11) << s.criterion << '\n';
  }
  const auto ref = reference_returns(env);
  const double decisions = static_cast<double>(a.steps.size());
  std::cout << "\nTDP:      score " << ref.score(a.total_return) << ", " << a.planner_passes / decisions
            << " element-passes per decision\n";
  std::cout << "per-step: score " << ref.score(b.total_return) << ", " << b.planner_passes / decisions
            << " element-passes per decision\n";
  std::cout << "pass-count reduction " << static_cast<double>(b.planner_passes) / static_cast<double>(a.planner_passes)
            << "x\n";
  return 0;
}
