#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tdp/core/diffusion.hpp"
#include "tdp/planner/agent.hpp"
#include "tdp/planner/tdp.hpp"

namespace tdp {

namespace detail {

/// M uniform-step arrays denoised from pure noise through all K steps.
inline CandidateSet plan_from_scratch(PlanningContext& ctx, const Eigen::Ref<const Vec>& s) {
  const PlannerConfig& cfg = ctx.config;
  const ElementLayout& layout = ctx.models.layout;
  const int K = cfg.diffusion_steps;
  CandidateSet out;
  out.plans.reserve(static_cast<std::size_t>(cfg.candidates));
  for (int b = 0; b < cfg.candidates; ++b) {
    NoiseArray a(layout, K, 0, K);
    for (int i = 0; i < cfg.horizon; ++i) a.append(gaussian_element(layout.element_dim(), ctx.rng));
    a.pin_state(s);
    out.plans.push_back(std::move(a));
  }
  for (int k = 0; k < K; ++k) denoise_headers(out.plans, ctx);
  out.values = estimate_values(out.plans, ctx.models);
  return out;
}

}  // namespace detail

/// Shared scaffolding for the uniform-step baselines.
class UniformBaseline : public Planner {
 public:
  UniformBaseline(std::shared_ptr<const PlanningModels> models, PlannerConfig cfg, std::string label)
      : models_(std::move(models)), cfg_(cfg), label_(std::move(label)), denoiser_(models_->denoiser), rng_(0) {
    cfg_.validate();
    if (cfg_.diffusion_steps != models_->schedule.steps()) throw ConfigError("K does not match the trained schedule");
    if (cfg_.array_mode() != models_->layout.mode) throw ConfigError("action mode does not match the trained layout");
  }

  void reset(std::uint64_t seed) override {
    rng_ = NoiseStream(seed);
    denoiser_ = CountingDenoiser(models_->denoiser);
    candidates_ = {};
    t_ = 0;
  }

  long element_passes() const override { return denoiser_.passes(); }
  std::string name() const override { return label_; }

 protected:
  PlanningContext context() { return {*models_, cfg_, denoiser_, rng_}; }

  Decision finish(bool replanned, long passes_before) {
    const Plan best = select_best(candidates_);
    Decision d;
    d.replanned = replanned;
    d.value = best.value;
    d.action = extract_action(best.array, *models_, cfg_.mode);
    d.element_passes = denoiser_.passes() - passes_before;
    ++t_;
    return d;
  }

  std::shared_ptr<const PlanningModels> models_;
  PlannerConfig cfg_;
  std::string label_;
  CountingDenoiser denoiser_;
  NoiseStream rng_;
  CandidateSet candidates_;
  int t_ = 0;
};

/// Full K-step denoising of a fresh H-element plan at every decision.
class PerStepReplanPlanner final : public UniformBaseline {
 public:
  PerStepReplanPlanner(std::shared_ptr<const PlanningModels> models, PlannerConfig cfg,
                       std::string label = "ReplanEveryStep")
      : UniformBaseline(std::move(models), cfg, std::move(label)) {}

  Decision act(const Vec& obs, double /*reward_prev*/) override {
    if (!obs.allFinite()) throw InputError("observation contains non-finite values");
    const long before = denoiser_.passes();
    PlanningContext ctx = context();
    candidates_ = detail::plan_from_scratch(ctx, models_->norm.normalize_state(obs));
    return finish(true, before);
  }
};

/// Shifts each previous plan by one step, re-noises it to step n and denoises
/// n steps. The first decision plans from scratch.
class WarmStartPlanner final : public UniformBaseline {
 public:
  WarmStartPlanner(std::shared_ptr<const PlanningModels> models, PlannerConfig cfg, int renoise_steps,
                   std::string label = "WarmStart")
      : UniformBaseline(std::move(models), cfg, std::move(label)), n_(renoise_steps) {
    if (n_ < 0 || n_ > cfg_.diffusion_steps) throw ConfigError("warm-start steps outside [0, K]");
  }

  Decision act(const Vec& obs, double /*reward_prev*/) override {
    if (!obs.allFinite()) throw InputError("observation contains non-finite values");
    const long before = denoiser_.passes();
    PlanningContext ctx = context();
    const Vec s = models_->norm.normalize_state(obs);
    if (candidates_.empty()) {
      candidates_ = detail::plan_from_scratch(ctx, s);
      return finish(true, before);
    }
    const Schedule& sched = models_->schedule;
    for (auto& p : candidates_.plans) {
      // The vacated tail repeats the last planned element.
      const Vec last = p.element(p.length() - 1);
      p.drop_front();
      p.append(last);
      p.set_base_step(0);
      p.pin_state(s);
      if (n_ == 0) continue;
      for (int i = 0; i < p.length(); ++i) {
        p.element(i) = forward_noise(p.element(i), n_, detail::gaussian_element(p.dim(), rng_), sched);
      }
      p.pin_state(s);
      p.set_base_step(n_);
    }
    for (int k = 0; k < n_; ++k) detail::denoise_headers(candidates_.plans, ctx);
    candidates_.values = estimate_values(candidates_.plans, *models_);
    return finish(false, before);
  }

  int renoise_steps() const { return n_; }

 private:
  int n_;
};

}  // namespace tdp
