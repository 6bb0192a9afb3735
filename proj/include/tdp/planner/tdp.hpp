#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "tdp/core/diffusion.hpp"
#include "tdp/core/errors.hpp"
#include "tdp/core/noise_array.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/planner/config.hpp"
#include "tdp/planner/models.hpp"

namespace tdp {

/// Candidate plans with their cached value estimates (raw return units).
struct CandidateSet {
  std::vector<NoiseArray> plans;
  std::vector<double> values;

  std::size_t size() const { return plans.size(); }
  bool empty() const { return plans.empty(); }
};

struct Plan {
  NoiseArray array;
  double value = 0.0;
  std::size_t index = 0;
};

/// Everything a planning operation touches. The denoiser and noise stream are
/// per-rollout and mutated; the models and config are shared.
struct PlanningContext {
  const PlanningModels& models;
  const PlannerConfig& config;
  CountingDenoiser& denoiser;
  NoiseStream& rng;
};

namespace detail {

inline Vec gaussian_element(int dim, NoiseStream& rng) {
  Vec e(dim);
  rng.fill_normal({e.data(), static_cast<std::size_t>(dim)});
  return e;
}

/// One reverse transition of every plan in a batch. All plans share length and
/// the per-position step pattern `steps`; positions that are inactive or at step
/// 0 are left untouched. Position 0's state is held fixed.
inline void reverse_batch(std::vector<NoiseArray>& plans, const std::vector<int>& steps,
                          const std::vector<bool>& active, PlanningContext& ctx) {
  if (plans.empty()) return;
  const int L = plans.front().length();
  const int d = plans.front().dim();
  const int ds = plans.front().layout().state_dim;
  const auto n = static_cast<int>(plans.size());
  const Schedule& sched = ctx.models.schedule;

  Mat x(d, static_cast<Eigen::Index>(n) * L);
  std::vector<int> all_steps(static_cast<std::size_t>(n) * L);
  for (int b = 0; b < n; ++b) {
    if (plans[b].length() != L) throw StateError("batched plans differ in length");
    x.middleCols(static_cast<Eigen::Index>(b) * L, L) = plans[b].data();
    std::copy(steps.begin(), steps.end(), all_steps.begin() + static_cast<std::ptrdiff_t>(b) * L);
  }
  const auto layout = nn::SeqLayout::uniform(n, L);
  Mat eps = ctx.denoiser(x, all_steps, layout);

  auto moves = [&](int i) { return active[static_cast<std::size_t>(i)] && steps[static_cast<std::size_t>(i)] > 0; };
  Mat mu = x;
  std::vector<int> next_steps = all_steps;
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < L; ++i) {
      if (!moves(i)) continue;
      const Eigen::Index c = static_cast<Eigen::Index>(b) * L + i;
      if (ctx.models.clips_x0()) {
        eps.col(c) = clip_predicted_noise(x.col(c), steps[i], eps.col(c), ctx.models.x0_low, ctx.models.x0_high, sched);
      }
      mu.col(c) = posterior_mean(x.col(c), steps[i], eps.col(c), sched);
      next_steps[static_cast<std::size_t>(c)] = steps[i] - 1;
    }
    mu.col(static_cast<Eigen::Index>(b) * L).head(ds) = x.col(static_cast<Eigen::Index>(b) * L).head(ds);
  }

  const GuidanceConfig guidance{ctx.config.guidance_scale, ctx.config.guidance_scale > 0.0};
  Mat grad;
  if (guidance.active()) {
    grad = ctx.models.value.input_grad(mu.cast<PlanScalar>(), next_steps, layout).cast<double>();
  }
  Vec g;
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < L; ++i) {
      if (!moves(i)) continue;
      const Eigen::Index c = static_cast<Eigen::Index>(b) * L + i;
      if (guidance.active()) g = grad.col(c);
      plans[b].element(i) =
          reverse_from_mean(mu.col(c), steps[i], guidance.active() ? &g : nullptr, guidance, ctx.rng, sched);
    }
    plans[b].state(0) = x.col(static_cast<Eigen::Index>(b) * L).head(ds);
  }
}

/// One reverse step of plans that share a header; base_step drops by one.
inline void denoise_headers(std::vector<NoiseArray>& plans, PlanningContext& ctx) {
  if (plans.empty()) return;
  for (const auto& p : plans) {
    if (!p.same_header(plans.front())) throw StateError("batched plans differ in header");
  }
  if (plans.front().base_step() == 0) throw StateError("plans are already at step 0");
  const std::vector<int> steps = plans.front().steps();
  reverse_batch(plans, steps, std::vector<bool>(steps.size(), true), ctx);
  for (auto& p : plans) p.set_base_step(p.base_step() - 1);
}

}  // namespace detail

/// Value estimates (raw return units) of each plan at its current steps.
inline std::vector<double> estimate_values(const std::vector<NoiseArray>& plans, const PlanningModels& models) {
  if (plans.empty()) return {};
  const int L = plans.front().length();
  const auto n = static_cast<int>(plans.size());
  Mat x(plans.front().dim(), static_cast<Eigen::Index>(n) * L);
  std::vector<int> steps;
  steps.reserve(static_cast<std::size_t>(n) * L);
  for (int b = 0; b < n; ++b) {
    if (plans[b].length() != L) throw StateError("batched plans differ in length");
    x.middleCols(static_cast<Eigen::Index>(b) * L, L) = plans[b].data();
    const auto s = plans[b].steps();
    steps.insert(steps.end(), s.begin(), s.end());
  }
  const auto v = models.value.forward(x.cast<PlanScalar>(), steps, nn::SeqLayout::uniform(n, L));
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) out[b] = static_cast<double>(v[b]) * models.value_std + models.value_mean;
  return out;
}

/// Builds M plans from pure noise conditioned on the normalised state `s`.
///
/// Round r denoises the current prefix for kappa steps and then appends fresh
/// noise (one element, or a state pair in inverse-dynamics mode). After the last
/// round position 0 is at step 0 and position i at step i * kappa.
inline CandidateSet triangular_initial_plan(PlanningContext& ctx, const Eigen::Ref<const Vec>& s) {
  const PlannerConfig& cfg = ctx.config;
  const ElementLayout& layout = ctx.models.layout;
  const int K = cfg.diffusion_steps;
  const int per_round = cfg.mode == ActionMode::direct ? 1 : 2;
  if (s.size() != layout.state_dim) throw InputError("conditioning state has wrong dimension");

  CandidateSet out;
  out.plans.reserve(static_cast<std::size_t>(cfg.candidates));
  for (int b = 0; b < cfg.candidates; ++b) {
    NoiseArray a(layout, K, cfg.kappa, K, 0);
    for (int j = 0; j < per_round; ++j) a.append(detail::gaussian_element(layout.element_dim(), ctx.rng));
    a.pin_state(s);
    out.plans.push_back(std::move(a));
  }
  for (int r = 1; r <= cfg.levels(); ++r) {
    for (int k = 0; k < cfg.kappa; ++k) detail::denoise_headers(out.plans, ctx);
    if (r == cfg.levels()) break;
    for (auto& p : out.plans) {
      for (int j = 0; j < per_round; ++j) p.append(detail::gaussian_element(layout.element_dim(), ctx.rng));
    }
  }
  out.values = estimate_values(out.plans, ctx.models);
  return out;
}

/// Candidate indices by descending value; ties keep the lower index first.
inline std::vector<std::size_t> rank_by_value(const CandidateSet& c) {
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.values[a] > c.values[b]; });
  return order;
}

/// Advances every plan by one environment step.
///
/// Position 0 is dropped, the top-m plans by cached value are duplicated
/// cyclically to M, the new state is pinned, a fresh noise element is appended
/// and kappa reverse steps restore the staircase.
inline CandidateSet refine_step(PlanningContext& ctx, const CandidateSet& prev, const Eigen::Ref<const Vec>& s) {
  const PlannerConfig& cfg = ctx.config;
  if (prev.empty()) throw StateError("refinement needs an existing candidate set");
  if (prev.values.size() != prev.plans.size()) throw StateError("candidate values are stale");
  if (s.size() != ctx.models.layout.state_dim) throw InputError("conditioning state has wrong dimension");

  const auto order = rank_by_value(prev);
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_m), prev.size());
  CandidateSet out;
  out.plans.reserve(static_cast<std::size_t>(cfg.candidates));
  for (int j = 0; j < cfg.candidates; ++j) {
    NoiseArray p = prev.plans[order[static_cast<std::size_t>(j) % m]];
    if (p.length() < 1) throw StateError("candidate plan is empty");
    p.drop_front();
    p.append(detail::gaussian_element(p.dim(), ctx.rng));
    p.pin_state(s);
    out.plans.push_back(std::move(p));
  }

  if (cfg.mode == ActionMode::direct) {
    for (int k = 0; k < cfg.kappa; ++k) detail::denoise_headers(out.plans, ctx);
  } else {
    // After the drop, odd positions lead their pair by kappa steps. Denoising
    // only those re-forms aligned pairs.
    std::vector<int> steps = out.plans.front().steps();
    std::vector<bool> active(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) active[i] = i % 2 == 1;
    for (int k = 0; k < cfg.kappa; ++k) {
      detail::reverse_batch(out.plans, steps, active, ctx);
      for (std::size_t i = 0; i < steps.size(); ++i) {
        if (active[i] && steps[i] > 0) --steps[i];
      }
    }
    for (auto& p : out.plans) p.set_phase(0);
  }
  out.values = estimate_values(out.plans, ctx.models);
  return out;
}

/// Highest-value candidate; ties go to the lowest index.
inline Plan select_best(const CandidateSet& c) {
  if (c.empty()) throw StateError("no candidates to select from");
  const std::size_t i = rank_by_value(c).front();
  return {c.plans[i], c.values[i], i};
}

/// Raw-unit action for the first step of `plan`, inside the action box.
inline Vec extract_action(const NoiseArray& plan, const PlanningModels& models, ActionMode mode) {
  if (!plan.data().allFinite()) throw StateError("plan diverged to non-finite values");
  if (mode == ActionMode::direct) return models.norm.denormalize_action(Vec(plan.action(0)));
  if (!models.invdyn) throw ConfigError("inverse-dynamics mode needs an inverse dynamics model");
  if (plan.length() < 2) throw StateError("inverse dynamics needs two planned states");
  const int ds = plan.layout().state_dim;
  Mat pair(2 * ds, 1);
  pair.col(0) << plan.state(0), plan.state(1);
  return models.invdyn->forward(pair).col(0);
}

/// -log N(s_plan; sqrt(alpha_bar_kappa) s_true, (1 - alpha_bar_kappa) I).
inline double criterion_state(const Eigen::Ref<const Vec>& s_plan, const Eigen::Ref<const Vec>& s_true, int kappa,
                              const Schedule& schedule) {
  return -noised_state_log_density(s_plan, s_true, kappa, schedule);
}

/// Temporal-difference residual J_prev - r - gamma * J_new.
inline double criterion_value(double j_prev, double reward, double gamma, double j_new) {
  return j_prev - reward - gamma * j_new;
}

struct ReplanRecord {
  int t = 0;
  double criterion = std::numeric_limits<double>::quiet_NaN();
  bool replanned = false;
};

/// Per-rollout planner memory.
struct PlannerState {
  CandidateSet candidates;
  std::size_t best_index = 0;
  double best_value = std::numeric_limits<double>::quiet_NaN();
  int t = 0;
  int steps_since_plan = 0;
  long initial_plans = 0;
  long refinements = 0;
  long pass_counter = 0;
  std::vector<ReplanRecord> replan_log;

  bool initialized() const { return !candidates.empty(); }

  /// Element-passes implied by the plan and refinement counts.
  long expected_passes(const PlannerConfig& cfg) const {
    return cfg.candidates * (initial_plans * cfg.initial_plan_passes_per_candidate() +
                             refinements * cfg.refinement_passes_per_candidate());
  }
};

struct Decision {
  Vec action;  // raw units, inside the action box
  bool replanned = false;
  double criterion = std::numeric_limits<double>::quiet_NaN();
  long element_passes = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
};

/// One control decision. `obs` is the raw observation at time t and
/// `reward_prev` the reward received for the previous action (ignored at t = 0).
inline Decision tdp_step(const Eigen::Ref<const Vec>& obs, double reward_prev, PlannerState& state,
                         PlanningContext& ctx) {
  const PlannerConfig& cfg = ctx.config;
  if (!obs.allFinite()) throw InputError("observation contains non-finite values");
  if (state.initialized() && !std::isfinite(reward_prev)) throw InputError("reward is not finite");
  const Vec s = ctx.models.norm.normalize_state(obs);
  const long passes_before = ctx.denoiser.passes();

  Decision d;
  bool refined = false;
  if (!state.initialized()) {
    d.replanned = true;
  } else {
    switch (cfg.criterion) {
      case ReplanCriterion::state: {
        const NoiseArray& best = state.candidates.plans[state.best_index];
        if (best.length() >= 2) {
          d.criterion = criterion_state(best.state(1), s, cfg.kappa, ctx.models.schedule) / s.size();
          d.replanned = d.criterion > cfg.threshold;
        }
        break;
      }
      case ReplanCriterion::value: {
        CandidateSet next = refine_step(ctx, state.candidates, s);
        ++state.refinements;
        const double j_new = *std::max_element(next.values.begin(), next.values.end());
        d.criterion = criterion_value(state.best_value, reward_prev, cfg.gamma, j_new) / ctx.models.value_std;
        d.replanned = d.criterion > cfg.threshold;
        if (!d.replanned) {
          state.candidates = std::move(next);
          refined = true;
        }
        break;
      }
      case ReplanCriterion::never:
        break;
      case ReplanCriterion::every_n:
        d.replanned = state.steps_since_plan >= cfg.interval;
        break;
    }
  }

  if (d.replanned) {
    state.candidates = triangular_initial_plan(ctx, s);
    ++state.initial_plans;
    state.steps_since_plan = 0;
  } else if (!refined) {
    state.candidates = refine_step(ctx, state.candidates, s);
    ++state.refinements;
  }
  ++state.steps_since_plan;

  const Plan best = select_best(state.candidates);
  state.best_index = best.index;
  state.best_value = best.value;
  d.value = best.value;
  d.action = extract_action(best.array, ctx.models, cfg.mode);
  d.element_passes = ctx.denoiser.passes() - passes_before;
  state.pass_counter += d.element_passes;
  state.replan_log.push_back({state.t, d.criterion, d.replanned});
  ++state.t;
  return d;
}

}  // namespace tdp
