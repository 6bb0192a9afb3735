// Acceptance suite: one PASS/FAIL line per criterion.
//
// Trained models are cached under --cache so reruns skip training.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "support/gradcheck.hpp"
#include "tdp/harness/ablation.hpp"
#include "tdp/harness/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tdp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kTrainSteps = 40000;
constexpr int kDatasetEpisodes = 200;
constexpr std::uint64_t kDatasetSeed = 7;

struct Outcome {
  bool pass = false;
  std::string detail;
  bool soft_flag = false;  // a reported-only sub-check failed
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Model cache

struct TierBundle {
  Tier tier{};
  Dataset dataset;
  DenoiserNet<double> denoiser{DenoiserConfig{6}};
  ValueModel value{ValueNet<double>(ValueConfig{6})};
  nlohmann::json meta;
  std::shared_ptr<const PlanningModels> planning;
  std::string ds_path, den_path, val_path;
};

class ModelCache {
 public:
  explicit ModelCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const TierBundle& get(Tier tier) {
    auto it = bundles_.find(tier);
    if (it != bundles_.end()) return it->second;
    return bundles_.emplace(tier, load_or_train(tier)).first->second;
  }

  const fs::path& dir() const { return dir_; }

 private:
  TierBundle load_or_train(Tier tier) {
    const std::string tag(to_string(tier));
    TierBundle b;
    b.tier = tier;
    b.ds_path = (dir_ / ("dataset_" + tag + ".ndjson")).string();
    b.den_path = (dir_ / ("denoiser_" + tag + ".json")).string();
    b.val_path = (dir_ / ("value_" + tag + ".json")).string();
    const fs::path meta_path = dir_ / ("train_" + tag + ".json");
    if (fs::exists(b.ds_path) && fs::exists(b.den_path) && fs::exists(b.val_path) && fs::exists(meta_path)) {
      b.dataset = load_dataset(b.ds_path);
      b.denoiser = load_denoiser(b.den_path);
      b.value = load_value(b.val_path);
      std::ifstream in(meta_path);
      b.meta = nlohmann::json::parse(in);
      std::cout << "  [cache] loaded " << tag << " models" << std::endl;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      Dataset ds = gen_dataset(point_reach_env(), tier, kDatasetEpisodes, kDatasetSeed);
      TrainPlan plan;
      plan.denoiser.steps = kTrainSteps;
      plan.value.steps = kTrainSteps;
      TrainedModels tm = train_models(std::move(ds), PlannerConfig{}, plan);
      b.dataset = std::move(tm.dataset);
      b.denoiser = std::move(tm.denoiser.model);
      b.value = std::move(tm.value.model);
      const auto& dt = tm.denoiser.trace;
      const auto& vt = tm.value.trace;
      b.meta = {{"steps", kTrainSteps},
                {"denoiser_initial", dt.window_mean(0, 100)},
                {"denoiser_final", dt.tail_mean(500)},
                {"value_initial", vt.window_mean(0, 100)},
                {"value_final", vt.tail_mean(500)}};
      save_dataset(b.ds_path, b.dataset);
      save_checkpoint(b.den_path, b.denoiser);
      save_checkpoint(b.val_path, b.value);
      save_json(meta_path, b.meta);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "  [cache] trained " << tag << " models in " << fmt("%.0f", secs) << " s" << std::endl;
    }
    const PlannerConfig cfg;
    const ElementLayout layout{b.dataset.state_dim, b.dataset.action_dim, cfg.array_mode()};
    b.planning = PlanningModels::make(Schedule::make(cfg.diffusion_steps, cfg.schedule), b.dataset.stats, layout,
                                      b.denoiser, b.value, std::nullopt, b.dataset.element_bounds(cfg.array_mode()));
    return b;
  }

  fs::path dir_;
  std::map<Tier, TierBundle> bundles_;
};

struct Suite {
  ModelCache cache;
  int workers = 1;
  PointMassEnv env = point_reach_env();
  ReferenceReturns reference = reference_returns(point_reach_env());

  EvalOptions full_eval(bool timing = true) const { return {{0, 1, 2, 3, 4}, 20, workers, timing}; }

  AblationSetup setup(Tier tier, EvalOptions opt) {
    return {env, cache.get(tier).planning, PlannerConfig{}, std::move(opt), reference};
  }

  void write_results(const std::string& name, const nlohmann::json& j) {
    save_json(cache.dir() / "results" / (name + ".json"), j);
  }
  void write_plot(const std::string& name, const std::vector<PlotRow>& rows) {
    save_plot_csv(cache.dir() / "results" / (name + ".csv"), rows);
  }
};

// ---------------------------------------------------------------------------
// 1. Diffusion math against independent oracles

double oracle_cosine_alpha_bar(int k, int K) {
  constexpr double s = 0.008;
  const auto f = [&](int j) {
    const double c = std::cos((static_cast<double>(j) / K + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  return f(k) / f(0);
}

Outcome criterion_diffusion_math() {
  double fwd_err = 0.0;
  for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    for (int K : {2, 8, 64, 256}) {
      const Schedule s = Schedule::make(K, kind);
      const Vec x0 = Vec::LinSpaced(5, -2.0, 3.0);
      // Propagate mean and variance one forward transition at a time.
      Vec mean = x0;
      double var = 0.0;
      for (int k = 1; k <= K; ++k) {
        mean *= std::sqrt(1.0 - s.beta(k));
        var = (1.0 - s.beta(k)) * var + s.beta(k);
        const Vec m_closed = forward_noise(x0, k, Vec::Zero(5), s);
        const Vec unit = forward_noise(x0, k, Vec::Ones(5), s) - m_closed;
        fwd_err = std::max(fwd_err, (mean - m_closed).cwiseAbs().maxCoeff());
        fwd_err = std::max(fwd_err, std::abs(var - unit[0] * unit[0]));
        fwd_err = std::max(fwd_err, std::abs(var - (1.0 - s.alpha_bar(k))));
      }
    }
  }

  // K = 2 by hand.
  double post_err = 0.0;
  {
    const Schedule lin = Schedule::make(2, ScheduleKind::linear);
    const double b1 = 1e-4, b2 = 0.02;
    const double ab1 = 1.0 - b1, ab2 = (1.0 - b1) * (1.0 - b2);
    post_err = std::max(post_err, std::abs(lin.posterior_variance(1) - 0.0));
    post_err = std::max(post_err, std::abs(lin.posterior_variance(2) - (1.0 - ab1) / (1.0 - ab2) * b2));
    const Schedule cos = Schedule::make(2, ScheduleKind::cosine);
    const double c1 = oracle_cosine_alpha_bar(1, 2);
    const double c2 = oracle_cosine_alpha_bar(2, 2);
    const double cb2 = std::min(1.0 - c2 / c1, 0.999);
    const double cab2 = c1 * (1.0 - cb2);
    post_err = std::max(post_err, std::abs(cos.posterior_variance(1)));
    post_err = std::max(post_err, std::abs(cos.posterior_variance(2) - (1.0 - c1) / (1.0 - cab2) * cb2));
  }

  // C_state against a product of one-dimensional densities.
  double cstate_err = 0.0;
  NoiseStream rng(2024);
  const Schedule s = Schedule::make(64, ScheduleKind::cosine);
  for (int n = 0; n < 1000; ++n) {
    const int d = rng.uniform_int(1, 8);
    const int k = rng.uniform_int(1, 64);
    Vec truth(d), plan(d);
    for (int i = 0; i < d; ++i) {
      truth[i] = 2.0 * rng.normal();
      plan[i] = std::sqrt(s.alpha_bar(k)) * truth[i] + 1.5 * std::sqrt(1.0 - s.alpha_bar(k)) * rng.normal();
    }
    const double sd = std::sqrt(1.0 - s.alpha_bar(k));
    double density = 1.0;
    for (int i = 0; i < d; ++i) {
      const double z = (plan[i] - std::sqrt(s.alpha_bar(k)) * truth[i]) / sd;
      density *= std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
    }
    cstate_err = std::max(cstate_err, std::abs(criterion_state(plan, truth, k, s) - (-std::log(density))));
  }

  Outcome o;
  o.pass = fwd_err <= 1e-10 && post_err <= 1e-12 && cstate_err <= 1e-9;
  o.detail = fmt("forward marginal err %.1e (<=1e-10), K=2 posterior err %.1e (<=1e-12), C_state err %.1e (<=1e-9)",
                 fwd_err, post_err, cstate_err);
  return o;
}

// ---------------------------------------------------------------------------
// 2. Triangular initial planning cost

Outcome criterion_triangular(Suite& suite) {
  const auto& models = suite.cache.get(Tier::expert).planning;
  const PlannerConfig cfg;
  CountingDenoiser den(models->denoiser);
  NoiseStream rng(1);
  PlanningContext ctx{*models, cfg, den, rng};
  const Vec s = Vec::Zero(4);
  triangular_initial_plan(ctx, s);
  const long tri = den.passes();
  const long before = den.passes();
  detail::plan_from_scratch(ctx, s);
  const long full = den.passes() - before;
  const long H = cfg.horizon, kappa = cfg.kappa, M = cfg.candidates;
  Outcome o;
  const bool exact = tri == M * kappa * H * (H + 1) / 2 && full == M * cfg.diffusion_steps * H;
  // (H + 1) / (2H) = 9/16 at H = 8; compared in integers.
  const bool ratio = tri * 2 * H == full * (H + 1) && tri * 16 == full * 9;
  o.pass = exact && ratio;
  o.detail = fmt("triangular %ld passes = M*kappa*H(H+1)/2 = %ld, full %ld, ratio %.4f (expected 0.5625)", tri,
                 M * kappa * H * (H + 1) / 2, full, static_cast<double>(tri) / static_cast<double>(full));
  return o;
}

// ---------------------------------------------------------------------------
// 3 and 4 share the expert-tier runs.

struct ParityRuns {
  std::vector<EpisodeResult> tdp, baseline;
  EfficiencyReport tdp_report, baseline_report;
};

ParityRuns& parity_runs(Suite& suite) {
  static std::optional<ParityRuns> runs;
  if (runs) return *runs;
  const auto& models = suite.cache.get(Tier::expert).planning;
  const PlannerConfig cfg;
  ParityRuns r;
  r.tdp = evaluate_planner(suite.env, make_planner_factory(PlannerKind::tdp, models, cfg), suite.full_eval());
  r.baseline =
      evaluate_planner(suite.env, make_planner_factory(PlannerKind::replan_every_step, models, cfg), suite.full_eval());
  r.tdp_report = summarize(r.tdp, suite.reference, "TDP");
  r.baseline_report = summarize(r.baseline, suite.reference, "ReplanEveryStep");
  suite.write_results("parity", nlohmann::json::array({to_json(r.tdp_report), to_json(r.baseline_report)}));
  runs = std::move(r);
  return *runs;
}

Outcome criterion_speedup(Suite& suite) {
  const auto& r = parity_runs(suite);
  const PlannerConfig cfg;
  const long M = cfg.candidates;
  bool identity = true;
  for (const auto& ep : r.tdp) {
    long sum = 0, replans = 0;
    for (const auto& s : ep.steps) {
      sum += s.element_passes;
      replans += s.replanned ? 1 : 0;
    }
    // The value criterion refines at every step after the first, then plans
    // from scratch whenever it fires.
    const long refines = static_cast<long>(ep.steps.size()) - 1;
    const long expected = M * (refines * cfg.refinement_passes_per_candidate() +
                               replans * cfg.initial_plan_passes_per_candidate());
    identity = identity && sum == expected && sum == ep.planner_passes;
  }
  bool baseline_exact = true;
  for (const auto& ep : r.baseline) {
    for (const auto& s : ep.steps) baseline_exact = baseline_exact && s.element_passes == M * 64 * 8;
  }
  const double rho = r.tdp_report.replan_ratio;
  const double factor = r.baseline_report.passes_per_decision / r.tdp_report.passes_per_decision;
  const double K = cfg.diffusion_steps, H = cfg.horizon, kappa = cfg.kappa;
  const double model_factor = K * H / (kappa * H + rho * kappa * H * (H + 1) / 2);
  Outcome o;
  const bool bound = rho > 0.1 || factor >= 6.0;
  o.pass = identity && baseline_exact && bound;
  o.detail = fmt("replan ratio %.4f, passes/decision %.1f vs %.1f, reduction %.2fx (>=6 when ratio<=0.1; "
                 "formula %.2fx), counter identity %s",
                 rho, r.tdp_report.passes_per_decision, r.baseline_report.passes_per_decision, factor, model_factor,
                 identity && baseline_exact ? "exact" : "BROKEN");
  if (rho > 0.1) o.detail += " [ratio above 0.1: bound not applicable]";
  return o;
}

Outcome criterion_parity(Suite& suite) {
  const auto& r = parity_runs(suite);
  const double tdp = r.tdp_report.score_mean, base = r.baseline_report.score_mean;
  Outcome o;
  o.pass = tdp >= 0.95 * base;
  o.detail = fmt("normalised score TDP %.2f +- %.2f vs per-step replanning %.2f +- %.2f (need >= 0.95x = %.2f); "
                 "raw return %.2f vs %.2f",
                 tdp, r.tdp_report.score_stderr, base, r.baseline_report.score_stderr, 0.95 * base,
                 r.tdp_report.return_mean, r.baseline_report.return_mean);
  return o;
}

// ---------------------------------------------------------------------------
// 5. Fixed-interval degradation

Outcome criterion_interval(Suite& suite) {
  const auto arms = ablate_fixed_interval(suite.setup(Tier::mixed, suite.full_eval()), {1, 2, 4, 8, 16, 32});
  suite.write_results("interval_mixed", to_json(arms));
  suite.write_plot("interval_mixed", interval_plot(arms));
  const auto find = [&](const std::string& label) -> const EfficiencyReport& {
    for (const auto& a : arms) {
      if (a.label == label) return a.report;
    }
    throw std::logic_error("missing arm " + label);
  };
  const auto& i1 = find("interval_1");
  const auto& i32 = find("interval_32");
  const auto& autoplan = find("auto");
  const double pooled = std::hypot(i1.return_stderr, i32.return_stderr);
  const ArmResult* best = nullptr;
  for (const auto& a : arms) {
    if (a.label != "auto" && (!best || a.report.return_mean > best->report.return_mean)) best = &a;
  }
  const bool degrades = i1.return_mean - i32.return_mean > pooled;
  const bool auto_ok = autoplan.return_mean >= best->report.return_mean - best->report.return_stderr;
  std::string curve;
  for (const auto& a : arms) curve += fmt(" %s=%.2f", a.label.c_str(), a.report.return_mean);
  Outcome o;
  o.pass = degrades && auto_ok;
  o.detail = fmt("interval 1 %.2f vs 32 %.2f (gap %.2f, pooled SE %.2f) %s; auto %.2f (interval %.1f) vs best %s "
                 "%.2f - SE %.2f %s;",
                 i1.return_mean, i32.return_mean, i1.return_mean - i32.return_mean, pooled, degrades ? "ok" : "FAIL",
                 autoplan.return_mean, autoplan.avg_replan_interval, best->label.c_str(), best->report.return_mean,
                 best->report.return_stderr, auto_ok ? "ok" : "FAIL") +
             curve;
  return o;
}

// ---------------------------------------------------------------------------
// 6. Criterion comparison

Outcome criterion_compare(Suite& suite) {
  const std::vector<double> value_th{-kInf, 0.02, 0.05, 0.1, 0.2, 0.5, kInf};
  const std::vector<double> state_th{-kInf, 1.0, 3.0, 10.0, 30.0, 100.0, kInf};
  bool curves_ok = true;
  int value_wins = 0;
  std::string detail;
  for (Tier tier : {Tier::expert, Tier::medium, Tier::mixed}) {
    const auto s = suite.setup(tier, {{0, 1}, 5, suite.workers, false});
    const auto v = ablate_criterion(s, ReplanCriterion::value, value_th);
    const auto st = ablate_criterion(s, ReplanCriterion::state, state_th);
    const std::string tag(to_string(tier));
    suite.write_results("criterion_" + tag, {{"value", to_json(v)}, {"state", to_json(st)}});
    auto rows = criterion_plot(v, "value");
    for (auto& r : criterion_plot(st, "state")) rows.push_back(r);
    suite.write_plot("criterion_" + tag, rows);

    const bool mono = replan_ratio_monotone(v) && replan_ratio_monotone(st);
    const bool ends = v.front().report.replan_ratio == 1.0 && v.back().report.replan_ratio == 0.0 &&
                      st.front().report.replan_ratio == 1.0 && st.back().report.replan_ratio == 0.0;
    curves_ok = curves_ok && mono && ends;
    const auto worst = [](const std::vector<ArmResult>& arms) {
      double w = kInf;
      for (const auto& a : arms) w = std::min(w, a.report.score_mean);
      return w;
    };
    const double wv = worst(v), ws = worst(st);
    value_wins += wv >= ws ? 1 : 0;
    std::string ratios;
    for (const auto& a : v) ratios += fmt("%.2f/", a.report.replan_ratio);
    ratios.back() = ' ';
    ratios += "| ";
    for (const auto& a : st) ratios += fmt("%.2f/", a.report.replan_ratio);
    ratios.pop_back();
    detail += fmt("%s: monotone %s, worst value %.1f vs state %.1f, ratios %s; ", tag.c_str(), mono ? "yes" : "NO", wv,
                  ws, ratios.c_str());
  }
  Outcome o;
  o.pass = curves_ok;
  o.soft_flag = value_wins < 2;
  o.detail = detail + fmt("value worst >= state worst on %d/3 tiers (soft)", value_wins);
  return o;
}

// ---------------------------------------------------------------------------
// 7. Candidate selection

Outcome criterion_selection(Suite& suite) {
  const auto arms = ablate_candidate_selection(suite.setup(Tier::mixed, suite.full_eval()), {64, 1, 8});
  suite.write_results("selection_mixed", to_json(arms));
  const auto& all = arms[0].report;
  const auto& best = arms[1].report;
  const auto& tdp = arms[2].report;
  const double pooled = std::hypot(all.score_stderr, tdp.score_stderr);
  const bool collapse = all.score_mean < tdp.score_mean - pooled;
  const bool best_close = std::abs(best.score_mean - tdp.score_mean) <= 0.1 * std::abs(tdp.score_mean);
  Outcome o;
  o.pass = collapse && best_close;
  o.detail = fmt("TDP_All %.2f +- %.2f, TDP_Best %.2f +- %.2f, TDP %.2f +- %.2f; All below TDP beyond pooled SE %.2f: "
                 "%s; Best within 10%% of TDP: %s",
                 all.score_mean, all.score_stderr, best.score_mean, best.score_stderr, tdp.score_mean,
                 tdp.score_stderr, pooled, collapse ? "yes" : "NO", best_close ? "yes" : "NO");
  return o;
}

// ---------------------------------------------------------------------------
// 8. Gradients and training health

Outcome criterion_gradients(Suite& suite) {
  double param_err = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    param_err = std::max({param_err, testing::denoiser_param_grad_error(10, seed),
                          testing::value_param_grad_error(10, seed), testing::invdyn_param_grad_error(10, seed)});
  }
  double input_err = 0.0;
  bool loss_ok = true;
  std::string losses;
  const PlannerConfig cfg;
  const Schedule sched = Schedule::make(cfg.diffusion_steps, cfg.schedule);
  for (Tier tier : {Tier::expert, Tier::medium, Tier::mixed}) {
    const auto& b = suite.cache.get(tier);
    NoiseStream rng(77);
    for (int n = 0; n < 5; ++n) {
      const auto traj = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(b.dataset.trajectories.size()) - 1));
      const int t0 = rng.uniform_int(0, b.dataset.trajectories[traj].length() - cfg.horizon);
      const Mat w = b.dataset.window(traj, t0, cfg.horizon, ArrayMode::state_action);
      const NoiseArray arr = build_noise_array(w, cfg.horizon, rng.uniform_int(0, cfg.kappa), cfg.kappa, sched, rng,
                                               {4, 2, ArrayMode::state_action});
      input_err = std::max(input_err, testing::value_input_grad_error(b.value.net, arr.data(), arr.steps()));
    }
    const double first = b.meta.at("denoiser_initial").get<double>();
    const double last = b.meta.at("denoiser_final").get<double>();
    loss_ok = loss_ok && last <= 0.5 * first;
    losses += fmt(" %s %.3f->%.3f (%.0f%% drop)", std::string(to_string(tier)).c_str(), first, last,
                  100.0 * (1.0 - last / first));
  }
  Outcome o;
  o.pass = param_err < 1e-4 && input_err < 1e-4 && loss_ok;
  o.detail = fmt("param grad rel err %.1e, value input grad rel err %.1e (<1e-4); denoiser loss", param_err, input_err) +
             losses;
  return o;
}

// ---------------------------------------------------------------------------
// 9. Teleport trigger

Outcome criterion_teleport(Suite& suite) {
  const auto& b = suite.cache.get(Tier::expert);
  PlannerConfig cfg;
  cfg.criterion = ReplanCriterion::state;
  cfg.threshold = default_threshold(cfg.criterion);
  constexpr int kJump = 20;
  bool ok = true;
  double max_err = 0.0, min_c = kInf, max_before = -kInf;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TdpPlanner p(b.planning, cfg);
    p.reset(seed);
    NoiseStream env_rng(100 + seed);
    Vec s = suite.env.reset(env_rng);
    double r = 0.0;
    for (int t = 0; t <= kJump; ++t) {
      double closed = std::numeric_limits<double>::quiet_NaN();
      if (t == kJump) {
        s += 10.0 * b.dataset.stats.state_std;
        const auto& st = p.state();
        const Vec planned = st.candidates.plans[st.best_index].state(1);
        const Vec truth = b.planning->norm.normalize_state(s);
        const double ab = b.planning->schedule.alpha_bar(cfg.kappa);
        const double d = static_cast<double>(truth.size());
        closed = (0.5 * d * std::log(2.0 * std::numbers::pi * (1.0 - ab)) +
                  (planned - std::sqrt(ab) * truth).squaredNorm() / (2.0 * (1.0 - ab))) /
                 d;
      }
      const Decision dec = p.act(s, r);
      if (t > 0 && t < kJump) {
        ok = ok && !dec.replanned;
        max_before = std::max(max_before, dec.criterion);
      }
      if (t == kJump) {
        max_err = std::max(max_err, std::abs(dec.criterion - closed));
        min_c = std::min(min_c, dec.criterion);
        ok = ok && dec.replanned;
      }
      const auto res = suite.env.step(s, dec.action);
      s = res.next;
      r = res.reward;
    }
  }
  Outcome o;
  o.pass = ok && max_err <= 1e-9;
  o.detail = fmt("5 episodes: replanned exactly at t=%d %s; C_state there >= %.1f vs threshold %.0f (max before %.2f); "
                 "closed-form err %.1e",
                 kJump, ok ? "yes" : "NO", min_c, cfg.threshold, max_before, max_err);
  return o;
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_determinism(Suite& suite) {
  const auto& b = suite.cache.get(Tier::expert);
  RunConfig run;
  run.tier = Tier::expert;
  run.dataset = b.ds_path;
  run.checkpoints.denoiser = b.den_path;
  run.checkpoints.value = b.val_path;
  run.seeds = {0, 1, 2};
  run.episodes = 3;
  run.timing = false;
  const fs::path root = suite.cache.dir() / "determinism";
  auto go = [&](const std::string& name, int workers) {
    RunConfig r = run;
    r.workers = workers;
    r.out_dir = (root / name).string();
    evaluate(r);
    return std::pair{slurp(root / name / "steps.csv"), slurp(root / name / "summary.json")};
  };
  const auto a = go("serial_a", 1);
  const auto b2 = go("serial_b", 1);
  const auto c = go("parallel", 4);
  // The echoed config reproduces the run.
  std::ifstream echo(root / "serial_a" / "config.json");
  RunConfig again = run_config_from_json(nlohmann::json::parse(echo));
  again.out_dir = (root / "echo").string();
  evaluate(again);
  const std::string d = slurp(root / "echo" / "steps.csv");
  Outcome o;
  o.pass = !a.first.empty() && a == b2 && a == c && a.first == d;
  o.detail = fmt("steps.csv %zu bytes; serial rerun %s, 4 workers %s, echoed config %s", a.first.size(),
                 a == b2 ? "identical" : "DIFFERS", a == c ? "identical" : "DIFFERS",
                 a.first == d ? "identical" : "DIFFERS");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the temporal diffusion planner"};
  std::string cache_dir = "acceptance_cache";
  std::vector<int> only;
  std::vector<int> xfail;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--cache", cache_dir, "Directory for trained models and result files");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--xfail", xfail, "Criteria whose failure does not fail the run");
  app.add_option("--workers", workers, "Parallel evaluation workers");
  CLI11_PARSE(app, argc, argv);

  Suite suite{ModelCache(cache_dir), std::max(1, workers)};
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"diffusion math exactness", [] { return criterion_diffusion_math(); }},
      {"triangular planning cost", [&] { return criterion_triangular(suite); }},
      {"pass-count speedup", [&] { return criterion_speedup(suite); }},
      {"performance parity", [&] { return criterion_parity(suite); }},
      {"fixed-interval degradation", [&] { return criterion_interval(suite); }},
      {"criterion comparison", [&] { return criterion_compare(suite); }},
      {"candidate selection shape", [&] { return criterion_selection(suite); }},
      {"gradient and training health", [&] { return criterion_gradients(suite); }},
      {"teleport replanning trigger", [&] { return criterion_teleport(suite); }},
      {"determinism", [&] { return criterion_determinism(suite); }},
  };
  const std::set<int> wanted(only.begin(), only.end());
  const std::set<int> expected_fail(xfail.begin(), xfail.end());
  int unexpected = 0, failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string tag = o.pass ? "PASS" : "FAIL";
    if (!o.pass) {
      ++failed;
      if (expected_fail.contains(id)) {
        tag += " (expected)";
      } else {
        ++unexpected;
      }
    }
    if (o.soft_flag) tag += " [soft-check flag]";
    std::cout << tag << "  criterion " << id << ": " << criteria[i].first << " | " << o.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
  }
  std::cout << failed << " failed, " << unexpected << " unexpected" << std::endl;
  return unexpected == 0 ? 0 : 1;
}
