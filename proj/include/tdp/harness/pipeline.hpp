#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/envs/dataset.hpp"
#include "tdp/envs/dataset_io.hpp"
#include "tdp/envs/point_mass.hpp"
#include "tdp/harness/baselines.hpp"
#include "tdp/harness/evaluate.hpp"
#include "tdp/harness/report.hpp"
#include "tdp/models/checkpoint.hpp"
#include "tdp/models/training.hpp"
#include "tdp/planner/agent.hpp"

namespace tdp {

enum class PlannerKind { tdp, tdp_inv, replan_every_step, warm_start, fixed_interval };

inline PlannerKind parse_planner_kind(std::string_view s) {
  if (s == "tdp") return PlannerKind::tdp;
  if (s == "tdp-inv") return PlannerKind::tdp_inv;
  if (s == "replan-every-step") return PlannerKind::replan_every_step;
  if (s == "warm-start") return PlannerKind::warm_start;
  if (s == "fixed-interval") return PlannerKind::fixed_interval;
  throw ConfigError("unknown planner: " + std::string(s));
}

inline std::string_view to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::tdp: return "tdp";
    case PlannerKind::tdp_inv: return "tdp-inv";
    case PlannerKind::replan_every_step: return "replan-every-step";
    case PlannerKind::warm_start: return "warm-start";
    case PlannerKind::fixed_interval: return "fixed-interval";
  }
  return "?";
}

struct CheckpointPaths {
  std::string denoiser;
  std::string value;
  std::string invdyn;  // empty unless an inverse-dynamics planner is used
};

/// Dataset size and optimiser settings for `train`.
struct TrainPlan {
  int dataset_episodes = 200;
  std::uint64_t dataset_seed = 7;
  TrainConfig denoiser;
  TrainConfig value;
  TrainConfig invdyn;
};

struct RunConfig {
  std::string env_id = "point_reach";
  Tier tier = Tier::expert;
  std::string dataset;
  CheckpointPaths checkpoints;
  PlannerKind planner_kind = PlannerKind::tdp;
  PlannerConfig planner;
  int warm_start_steps = 8;
  int episodes = 20;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string out_dir = "runs/default";
  int workers = 1;
  bool timing = true;
  TrainPlan train;

  /// Files that evaluation reads must exist; seeds must be non-empty.
  void validate_for_eval() const {
    if (seeds.empty()) throw ConfigError("seeds list is empty");
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    auto need = [](const std::string& what, const std::string& p) {
      if (p.empty()) throw ConfigError(what + " path is not set");
      if (!std::filesystem::exists(p)) throw ConfigError(what + " not found: " + p);
    };
    need("dataset", dataset);
    need("denoiser checkpoint", checkpoints.denoiser);
    need("value checkpoint", checkpoints.value);
    if (planner_kind == PlannerKind::tdp_inv) need("inverse dynamics checkpoint", checkpoints.invdyn);
    planner.validate();
  }
};

inline nlohmann::json to_json(const PlannerConfig& c) {
  return {{"horizon", c.horizon},
          {"diffusion_steps", c.diffusion_steps},
          {"kappa", c.kappa},
          {"candidates", c.candidates},
          {"top_m", c.top_m},
          {"guidance_scale", c.guidance_scale},
          {"criterion", std::string(to_string(c.criterion))},
          {"threshold", c.threshold},
          {"interval", c.interval},
          {"gamma", c.gamma},
          {"mode", std::string(to_string(c.mode))},
          {"schedule", std::string(to_string(c.schedule))}};
}

inline PlannerConfig planner_config_from_json(const nlohmann::json& j, PlannerConfig c = {}) {
  c.horizon = j.value("horizon", c.horizon);
  c.diffusion_steps = j.value("diffusion_steps", c.diffusion_steps);
  c.kappa = j.value("kappa", c.kappa);
  c.candidates = j.value("candidates", c.candidates);
  c.top_m = j.value("top_m", c.top_m);
  c.guidance_scale = j.value("guidance_scale", c.guidance_scale);
  if (j.contains("criterion")) c.criterion = parse_criterion(j.at("criterion").get<std::string>());
  c.threshold = j.value("threshold", c.threshold);
  c.interval = j.value("interval", c.interval);
  c.gamma = j.value("gamma", c.gamma);
  if (j.contains("mode")) c.mode = parse_action_mode(j.at("mode").get<std::string>());
  if (j.contains("schedule")) c.schedule = parse_schedule_kind(j.at("schedule").get<std::string>());
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"steps", c.steps},                 {"seed", c.seed},
          {"ema_decay", c.ema_decay},         {"uniform_fraction", c.uniform_fraction},
          {"channels", c.channels},           {"value_channels", c.value_channels},
          {"invdyn_hidden", c.invdyn_hidden}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.seed = j.value("seed", c.seed);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.uniform_fraction = j.value("uniform_fraction", c.uniform_fraction);
  c.channels = j.value("channels", c.channels);
  c.value_channels = j.value("value_channels", c.value_channels);
  c.invdyn_hidden = j.value("invdyn_hidden", c.invdyn_hidden);
  return c;
}

/// Copies the plan geometry shared by planning and training.
inline TrainConfig with_geometry(TrainConfig t, const PlannerConfig& p) {
  t.horizon = p.horizon;
  t.kappa = p.kappa;
  t.diffusion_steps = p.diffusion_steps;
  t.gamma = p.gamma;
  t.mode = p.array_mode();
  t.schedule = p.schedule;
  return t;
}

inline nlohmann::json to_json(const RunConfig& r) {
  return {{"env", r.env_id},
          {"tier", std::string(to_string(r.tier))},
          {"dataset", r.dataset},
          {"checkpoints", {{"denoiser", r.checkpoints.denoiser}, {"value", r.checkpoints.value}, {"invdyn", r.checkpoints.invdyn}}},
          {"planner_kind", std::string(to_string(r.planner_kind))},
          {"planner", to_json(r.planner)},
          {"warm_start_steps", r.warm_start_steps},
          {"episodes", r.episodes},
          {"seeds", r.seeds},
          {"out", r.out_dir},
          {"workers", r.workers},
          {"timing", r.timing},
          {"train",
           {{"dataset_episodes", r.train.dataset_episodes},
            {"dataset_seed", r.train.dataset_seed},
            {"denoiser", to_json(r.train.denoiser)},
            {"value", to_json(r.train.value)},
            {"invdyn", to_json(r.train.invdyn)}}}};
}

/// Missing keys keep their defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig r;
  r.env_id = j.value("env", r.env_id);
  if (j.contains("tier")) r.tier = parse_tier(j.at("tier").get<std::string>());
  r.dataset = j.value("dataset", r.dataset);
  if (j.contains("checkpoints")) {
    const auto& c = j.at("checkpoints");
    r.checkpoints.denoiser = c.value("denoiser", r.checkpoints.denoiser);
    r.checkpoints.value = c.value("value", r.checkpoints.value);
    r.checkpoints.invdyn = c.value("invdyn", r.checkpoints.invdyn);
  }
  if (j.contains("planner_kind")) r.planner_kind = parse_planner_kind(j.at("planner_kind").get<std::string>());
  if (j.contains("planner")) r.planner = planner_config_from_json(j.at("planner"));
  r.warm_start_steps = j.value("warm_start_steps", r.warm_start_steps);
  r.episodes = j.value("episodes", r.episodes);
  if (j.contains("seeds")) r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.out_dir = j.value("out", r.out_dir);
  r.workers = j.value("workers", r.workers);
  r.timing = j.value("timing", r.timing);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    r.train.dataset_episodes = t.value("dataset_episodes", r.train.dataset_episodes);
    r.train.dataset_seed = t.value("dataset_seed", r.train.dataset_seed);
    if (t.contains("denoiser")) r.train.denoiser = train_config_from_json(t.at("denoiser"), r.train.denoiser);
    if (t.contains("value")) r.train.value = train_config_from_json(t.at("value"), r.train.value);
    if (t.contains("invdyn")) r.train.invdyn = train_config_from_json(t.at("invdyn"), r.train.invdyn);
  }
  return r;
}

/// A dataset and every network trained on it.
struct TrainedModels {
  Dataset dataset;
  Schedule schedule;
  Trained<DenoiserNet<double>> denoiser;
  Trained<ValueModel> value;
  std::optional<Trained<InvDynNet<double>>> invdyn;

  std::shared_ptr<const PlanningModels> planning(ArrayMode mode) const {
    const ElementLayout layout{dataset.state_dim, dataset.action_dim, mode};
    std::optional<InvDynNet<double>> inv;
    if (invdyn) inv = invdyn->model;
    return PlanningModels::make(schedule, dataset.stats, layout, denoiser.model, value.model, std::move(inv),
                                dataset.element_bounds(mode));
  }
};

/// Trains the denoiser and value model (and inverse dynamics in state-only mode)
/// on `ds`. Each network draws from its own stream derived from its config seed.
inline TrainedModels train_models(Dataset ds, const PlannerConfig& geometry, const TrainPlan& plan) {
  const TrainConfig dc = with_geometry(plan.denoiser, geometry);
  const TrainConfig vc = with_geometry(plan.value, geometry);
  dc.validate();
  vc.validate();
  NoiseStream den_rng = NoiseStream::derive(dc.seed, 1);
  NoiseStream val_rng = NoiseStream::derive(vc.seed, 2);
  auto den = train_denoiser(ds, dc, den_rng);
  auto val = train_value(ds, vc, val_rng);
  std::optional<Trained<InvDynNet<double>>> inv;
  if (geometry.mode == ActionMode::inverse_dynamics) {
    const TrainConfig ic = with_geometry(plan.invdyn, geometry);
    NoiseStream inv_rng = NoiseStream::derive(ic.seed, 3);
    inv = train_invdyn(ds, ic, inv_rng);
  }
  Schedule sched = Schedule::make(geometry.diffusion_steps, geometry.schedule);
  return TrainedModels{std::move(ds), std::move(sched), std::move(den), std::move(val), std::move(inv)};
}

inline PlannerConfig planner_config_for(PlannerKind kind, PlannerConfig cfg) {
  if (kind == PlannerKind::tdp_inv) cfg.mode = ActionMode::inverse_dynamics;
  if (kind == PlannerKind::fixed_interval) cfg.criterion = ReplanCriterion::every_n;
  return cfg;
}

inline PlannerFactory make_planner_factory(PlannerKind kind, std::shared_ptr<const PlanningModels> models,
                                           PlannerConfig cfg, int warm_start_steps = 8) {
  cfg = planner_config_for(kind, cfg);
  cfg.validate();
  switch (kind) {
    case PlannerKind::tdp:
      return [=] { return std::make_unique<TdpPlanner>(models, cfg, "TDP"); };
    case PlannerKind::tdp_inv:
      return [=] { return std::make_unique<TdpPlanner>(models, cfg, "TDP_Inv"); };
    case PlannerKind::fixed_interval:
      return [=] { return std::make_unique<TdpPlanner>(models, cfg, "TDP_Interval" + std::to_string(cfg.interval)); };
    case PlannerKind::replan_every_step:
      return [=] { return std::make_unique<PerStepReplanPlanner>(models, cfg); };
    case PlannerKind::warm_start:
      return [=] { return std::make_unique<WarmStartPlanner>(models, cfg, warm_start_steps); };
  }
  throw ConfigError("unknown planner kind");
}

/// Reads the dataset (for normalisation) and checkpoints named by `run`.
inline std::shared_ptr<const PlanningModels> load_planning_models(const RunConfig& run) {
  run.validate_for_eval();
  const PlannerConfig cfg = planner_config_for(run.planner_kind, run.planner);
  const Dataset ds = load_dataset(run.dataset);
  std::optional<InvDynNet<double>> inv;
  if (cfg.mode == ActionMode::inverse_dynamics) inv = load_invdyn(run.checkpoints.invdyn);
  const ElementLayout layout{ds.state_dim, ds.action_dim, cfg.array_mode()};
  return PlanningModels::make(Schedule::make(cfg.diffusion_steps, cfg.schedule), ds.stats, layout,
                              load_denoiser(run.checkpoints.denoiser), load_value(run.checkpoints.value),
                              std::move(inv), ds.element_bounds(cfg.array_mode()));
}

struct EvalOutput {
  std::vector<EpisodeResult> episodes;
  EfficiencyReport report;
};

/// Closed-loop evaluation with CSV and JSON outputs under run.out_dir.
inline EvalOutput evaluate(const RunConfig& run) {
  const auto models = load_planning_models(run);
  const PointMassEnv env = make_env(run.env_id);
  const auto factory = make_planner_factory(run.planner_kind, models, run.planner, run.warm_start_steps);
  EvalOutput out;
  out.episodes = evaluate_planner(env, factory, {run.seeds, run.episodes, run.workers, run.timing});
  out.report = summarize(out.episodes, reference_returns(env), factory()->name());
  const std::filesystem::path dir(run.out_dir);
  save_steps_csv(dir / "steps.csv", out.episodes, env.spec().action_dim);
  save_json(dir / "summary.json", to_json(out.report));
  save_json(dir / "config.json", to_json(run));
  return out;
}

}  // namespace tdp
