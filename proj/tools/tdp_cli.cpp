// tdp_cli: dataset generation, training, evaluation, benchmarks and ablations.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tdp/harness/ablation.hpp"
#include "tdp/harness/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tdp;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> episodes;
  std::optional<std::string> planner;
  std::optional<int> interval;
  std::optional<std::string> criterion;
  std::optional<double> threshold;
  std::optional<std::string> dataset;
  std::optional<std::string> tier;
  std::optional<std::string> env;
  std::optional<int> workers;
  bool no_timing = false;
};

void notice(const std::string& msg) { std::cerr << "[tdp] " << msg << '\n'; }

/// Applies a flag over a config value; reports when the file said otherwise.
template <class T, class U>
void apply(const char* name, const std::optional<T>& flag, U& field, bool in_file) {
  if (!flag) return;
  const U v = static_cast<U>(*flag);
  if (in_file && !(v == field)) notice(std::string("--") + name + " overrides the config file value");
  field = v;
}

bool has(const nlohmann::json& j, std::initializer_list<const char*> path) {
  const nlohmann::json* cur = &j;
  for (const char* k : path) {
    if (!cur->is_object() || !cur->contains(k)) return false;
    cur = &cur->at(k);
  }
  return true;
}

RunConfig resolve(const Overrides& o) {
  nlohmann::json file = nlohmann::json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot read config " + o.config_path);
    file = nlohmann::json::parse(in);
  }
  RunConfig r = run_config_from_json(file);

  if (o.seed) {
    if (has(file, {"seeds"}) && !(r.seeds.size() == 1 && r.seeds[0] == *o.seed)) {
      notice("--seed overrides the config file seeds");
    }
    r.seeds = {*o.seed};
  }
  apply("out", o.out, r.out_dir, has(file, {"out"}));
  apply("episodes", o.episodes, r.episodes, has(file, {"episodes"}));
  apply("dataset", o.dataset, r.dataset, has(file, {"dataset"}));
  apply("env", o.env, r.env_id, has(file, {"env"}));
  apply("workers", o.workers, r.workers, has(file, {"workers"}));
  if (o.tier) {
    const Tier t = parse_tier(*o.tier);
    if (has(file, {"tier"}) && t != r.tier) notice("--tier overrides the config file value");
    r.tier = t;
  }
  if (o.planner) {
    const PlannerKind k = parse_planner_kind(*o.planner);
    if (has(file, {"planner_kind"}) && k != r.planner_kind) notice("--planner overrides the config file value");
    r.planner_kind = k;
  }
  apply("interval", o.interval, r.planner.interval, has(file, {"planner", "interval"}));
  if (o.criterion) {
    const ReplanCriterion c = parse_criterion(*o.criterion);
    if (has(file, {"planner", "criterion"}) && c != r.planner.criterion) {
      notice("--criterion overrides the config file value");
    }
    r.planner.criterion = c;
    if (!o.threshold && !has(file, {"planner", "threshold"})) r.planner.threshold = default_threshold(c);
  }
  apply("threshold", o.threshold, r.planner.threshold, has(file, {"planner", "threshold"}));
  if (o.no_timing) r.timing = false;

  // Unset paths fall back to files already in the run directory.
  const fs::path dir(r.out_dir);
  auto adopt = [&](std::string& field, const char* file) {
    if (field.empty() && fs::exists(dir / file)) field = (dir / file).string();
  };
  adopt(r.dataset, "dataset.ndjson");
  adopt(r.checkpoints.denoiser, "denoiser.json");
  adopt(r.checkpoints.value, "value.json");
  adopt(r.checkpoints.invdyn, "invdyn.json");
  return r;
}

void echo(const RunConfig& r) {
  const auto j = to_json(r);
  std::cout << j.dump(2) << '\n';
  save_json(fs::path(r.out_dir) / "config.json", j);
}

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_path, "JSON run configuration");
  sub->add_option("--seed", o.seed, "Seed (evaluation seed list, or dataset/training seed)");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--episodes", o.episodes, "Episodes per seed (dataset size for gen-data)");
  sub->add_option("--planner", o.planner, "tdp | tdp-inv | replan-every-step | warm-start | fixed-interval");
  sub->add_option("--interval", o.interval, "Replan interval for fixed-interval planning");
  sub->add_option("--criterion", o.criterion, "Replan criterion: state | value");
  sub->add_option("--threshold", o.threshold, "Replan threshold");
  sub->add_option("--dataset", o.dataset, "Dataset file");
  sub->add_option("--tier", o.tier, "Dataset tier: expert | medium | mixed");
  sub->add_option("--env", o.env, "Environment: point_reach | line_world");
  sub->add_option("--workers", o.workers, "Parallel evaluation workers");
  sub->add_flag("--no-timing", o.no_timing, "Record zero wall-clock times (byte-stable output)");
}

int gen_data(RunConfig r, const Overrides& o) {
  if (o.episodes) r.train.dataset_episodes = *o.episodes;
  if (o.seed) r.train.dataset_seed = *o.seed;
  const fs::path path = fs::path(r.out_dir) / "dataset.ndjson";
  const Dataset ds = gen_dataset(make_env(r.env_id), r.tier, r.train.dataset_episodes, r.train.dataset_seed);
  fs::create_directories(r.out_dir);
  save_dataset(path.string(), ds);
  r.dataset = path.string();
  echo(r);
  std::cout << "wrote " << ds.trajectories.size() << " trajectories to " << path.string() << " (mean return "
            << ds.mean_return() << ")\n";
  return 0;
}

int train(RunConfig r, const Overrides& o, const std::string& what) {
  if (r.dataset.empty() || !fs::exists(r.dataset)) throw ConfigError("dataset not found: " + r.dataset);
  const Dataset ds = load_dataset(r.dataset);
  const PlannerConfig geometry = planner_config_for(r.planner_kind, r.planner);
  const fs::path dir(r.out_dir);
  fs::create_directories(dir);
  TrainTrace trace;
  if (what == "denoiser") {
    TrainConfig c = with_geometry(r.train.denoiser, geometry);
    if (o.seed) c.seed = *o.seed;
    NoiseStream rng = NoiseStream::derive(c.seed, 1);
    auto t = train_denoiser(ds, c, rng);
    r.checkpoints.denoiser = (dir / "denoiser.json").string();
    save_checkpoint(r.checkpoints.denoiser, t.model);
    trace = std::move(t.trace);
  } else if (what == "value") {
    TrainConfig c = with_geometry(r.train.value, geometry);
    if (o.seed) c.seed = *o.seed;
    NoiseStream rng = NoiseStream::derive(c.seed, 2);
    auto t = train_value(ds, c, rng);
    r.checkpoints.value = (dir / "value.json").string();
    save_checkpoint(r.checkpoints.value, t.model);
    trace = std::move(t.trace);
  } else {
    TrainConfig c = with_geometry(r.train.invdyn, geometry);
    if (o.seed) c.seed = *o.seed;
    NoiseStream rng = NoiseStream::derive(c.seed, 3);
    auto t = train_invdyn(ds, c, rng);
    r.checkpoints.invdyn = (dir / "invdyn.json").string();
    save_checkpoint(r.checkpoints.invdyn, t.model);
    trace = std::move(t.trace);
  }
  std::vector<PlotRow> rows;
  for (std::size_t i = 0; i < trace.loss.size(); ++i) rows.push_back({static_cast<double>(i), trace.loss[i], what});
  save_plot_csv(dir / (what + "_loss.csv"), rows);
  echo(r);
  std::cout << what << " loss " << trace.window_mean(0, 100) << " -> " << trace.tail_mean(500) << '\n';
  return 0;
}

int eval(const RunConfig& r) {
  echo(r);
  const auto out = evaluate(r);
  std::cout << to_json(out.report).dump(2) << '\n';
  return 0;
}

/// TDP against the per-step and warm-start baselines on the same seeds.
int bench(const RunConfig& r) {
  echo(r);
  const auto models = load_planning_models(r);
  const PointMassEnv env = make_env(r.env_id);
  const auto ref = reference_returns(env);
  const EvalOptions opt{r.seeds, r.episodes, r.workers, r.timing};
  nlohmann::json arms = nlohmann::json::array();
  double tdp_passes = 0.0, tdp_ms = 0.0;
  for (PlannerKind kind : {PlannerKind::tdp, PlannerKind::replan_every_step, PlannerKind::warm_start}) {
    const auto factory = make_planner_factory(kind, models, r.planner, r.warm_start_steps);
    const auto episodes = evaluate_planner(env, factory, opt);
    const auto rep = summarize(episodes, ref, factory()->name());
    save_steps_csv(fs::path(r.out_dir) / (std::string(to_string(kind)) + "_steps.csv"), episodes,
                   env.spec().action_dim);
    if (kind == PlannerKind::tdp) {
      tdp_passes = rep.passes_per_decision;
      tdp_ms = rep.wall_mean_ms;
    }
    auto j = to_json(rep);
    j["pass_speedup_of_tdp"] = rep.passes_per_decision / tdp_passes;
    j["wall_speedup_of_tdp"] = tdp_ms > 0.0 ? rep.wall_mean_ms / tdp_ms : 0.0;
    std::cout << rep.planner << ": score " << rep.score_mean << " +- " << rep.score_stderr << ", passes/decision "
              << rep.passes_per_decision << ", " << rep.wall_mean_ms << " ms/decision, replan ratio "
              << rep.replan_ratio << '\n';
    arms.push_back(std::move(j));
  }
  save_json(fs::path(r.out_dir) / "bench.json", arms);
  return 0;
}

int ablate(const RunConfig& r, const std::string& what, const std::vector<int>& intervals,
           const std::vector<double>& thresholds, const std::vector<int>& m_values) {
  echo(r);
  const auto models = load_planning_models(r);
  const PointMassEnv env = make_env(r.env_id);
  AblationSetup s{env, models, r.planner, {r.seeds, r.episodes, r.workers, r.timing}, reference_returns(env)};
  const fs::path dir(r.out_dir);
  std::vector<ArmResult> arms;
  if (what == "interval") {
    arms = ablate_fixed_interval(s, intervals);
    save_plot_csv(dir / "interval_plot.csv", interval_plot(arms));
  } else if (what == "criterion") {
    std::vector<double> th = thresholds;
    if (th.empty()) {
      th = r.planner.criterion == ReplanCriterion::state ? std::vector<double>{1, 3, 10, 30, 100}
                                                         : std::vector<double>{0.02, 0.05, 0.1, 0.2, 0.5};
    }
    arms = ablate_criterion(s, r.planner.criterion, th);
    save_plot_csv(dir / "criterion_plot.csv", criterion_plot(arms, std::string(to_string(r.planner.criterion))));
    if (!replan_ratio_monotone(arms)) notice("replan ratio is not monotone in the threshold on these seeds");
  } else {
    arms = ablate_candidate_selection(s, m_values);
  }
  save_json(dir / ("ablate_" + what + ".json"), to_json(arms));
  for (const auto& a : arms) {
    std::cout << a.label << ": score " << a.report.score_mean << " +- " << a.report.score_stderr << ", replan ratio "
              << a.report.replan_ratio << ", avg interval " << a.report.avg_replan_interval << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal diffusion planner: data, training, evaluation and ablations"};
  Overrides o;

  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  add_common(gen, o);

  auto* tr = app.add_subcommand("train", "Train one network");
  add_common(tr, o);
  std::string train_what;
  tr->add_option("network", train_what, "denoiser | value | invdyn")
      ->required()
      ->check(CLI::IsMember({"denoiser", "value", "invdyn"}));

  auto* ev = app.add_subcommand("eval", "Closed-loop evaluation");
  add_common(ev, o);

  auto* be = app.add_subcommand("bench", "Compare TDP with the replanning baselines");
  add_common(be, o);

  auto* ab = app.add_subcommand("ablate", "Run an ablation sweep");
  add_common(ab, o);
  std::string ablate_what;
  std::vector<int> intervals{1, 2, 4, 8, 16, 32};
  std::vector<double> thresholds;
  std::vector<int> m_values{64, 1, 8};
  ab->add_option("study", ablate_what, "interval | criterion | selection")
      ->required()
      ->check(CLI::IsMember({"interval", "criterion", "selection"}));
  ab->add_option("--intervals", intervals, "Fixed replan intervals");
  ab->add_option("--thresholds", thresholds, "Thresholds for the criterion sweep");
  ab->add_option("--m-values", m_values, "Survivor counts for the selection study");

  app.require_subcommand(0, 1);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    const RunConfig run = resolve(o);
    if (*gen) return gen_data(run, o);
    if (*tr) return train(run, o, train_what);
    if (*ev) return eval(run);
    if (*be) return bench(run);
    if (*ab) return ablate(run, ablate_what, intervals, thresholds, m_values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
