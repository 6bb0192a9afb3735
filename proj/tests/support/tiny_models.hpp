#pragma once

// Small untrained model bundles for planner and harness tests.

#include <memory>
#include <optional>

#include "tdp/envs/dataset.hpp"
#include "tdp/envs/point_mass.hpp"
#include "tdp/models/training.hpp"
#include "tdp/planner/config.hpp"
#include "tdp/planner/models.hpp"

namespace tdp::testing {

struct TinySpec {
  int horizon = 4;
  int K = 16;
  ArrayMode mode = ArrayMode::state_action;
  double head_scale = 0.0;  // 0 keeps the zero-initialised denoiser head
  bool clip_x0 = false;
  bool with_invdyn = false;
  std::uint64_t seed = 1;
};

inline const Dataset& line_dataset() {
  static const Dataset ds = gen_dataset(line_world_env(), Tier::medium, 8, 77);
  return ds;
}

inline std::shared_ptr<const PlanningModels> tiny_models(const TinySpec& spec = {}) {
  const Dataset& ds = line_dataset();
  const ElementLayout layout{ds.state_dim, ds.action_dim, spec.mode};
  NoiseStream rng(spec.seed);
  DenoiserNet<double> den(DenoiserConfig{layout.element_dim(), 8, 2, 4, spec.K});
  den.initialize(rng);
  if (spec.head_scale > 0.0) {
    for (const auto& b : den.params().manifest()) {
      if (b.name.rfind("out.", 0) != 0) continue;
      for (std::size_t i = 0; i < b.size(); ++i) den.params().values()[b.offset + i] = spec.head_scale * rng.normal();
    }
  }
  ValueModel vm{ValueNet<double>(ValueConfig{layout.element_dim(), 8, 2, 4, spec.K}), -3.0, 2.0};
  vm.net.initialize(rng);
  std::optional<InvDynNet<double>> inv;
  if (spec.with_invdyn) {
    TrainConfig tc;
    InvDynNet<double> net(invdyn_config_for(ds, tc));
    net.initialize(rng);
    inv = std::move(net);
  }
  std::optional<std::pair<Vec, Vec>> box;
  if (spec.clip_x0) box = ds.element_bounds(spec.mode);
  return PlanningModels::make(Schedule::make(spec.K, ScheduleKind::cosine), ds.stats, layout, den, vm, std::move(inv),
                              box);
}

inline PlannerConfig tiny_config(const TinySpec& spec = {}, int candidates = 6, int top_m = 2) {
  PlannerConfig c;
  c.horizon = spec.horizon;
  c.diffusion_steps = spec.K;
  c.mode = spec.mode == ArrayMode::state_action ? ActionMode::direct : ActionMode::inverse_dynamics;
  c.kappa = spec.K / (spec.mode == ArrayMode::state_action ? spec.horizon : spec.horizon / 2);
  c.candidates = candidates;
  c.top_m = top_m;
  return c;
}

}  // namespace tdp::testing
