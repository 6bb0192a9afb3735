#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "tdp/core/noise_stream.hpp"
#include "tdp/planner/config.hpp"
#include "tdp/planner/models.hpp"
#include "tdp/planner/tdp.hpp"

namespace tdp {

/// A closed-loop decision maker. One instance drives one rollout at a time.
class Planner {
 public:
  virtual ~Planner() = default;

  /// Clears all memory and reseeds the sampling noise.
  virtual void reset(std::uint64_t seed) = 0;

  /// `reward_prev` is the reward for the previous action; ignored on the first call.
  virtual Decision act(const Vec& obs, double reward_prev) = 0;

  /// Denoiser element-passes since the last reset.
  virtual long element_passes() const = 0;

  virtual std::string name() const = 0;
};

class TdpPlanner final : public Planner {
 public:
  TdpPlanner(std::shared_ptr<const PlanningModels> models, PlannerConfig cfg, std::string label = "TDP")
      : models_(std::move(models)), cfg_(cfg), label_(std::move(label)), denoiser_(models_->denoiser), rng_(0) {
    cfg_.validate();
    if (cfg_.array_mode() != models_->layout.mode) throw ConfigError("action mode does not match the trained layout");
    if (cfg_.diffusion_steps != models_->schedule.steps()) throw ConfigError("K does not match the trained schedule");
    if (cfg_.mode == ActionMode::inverse_dynamics && !models_->invdyn) {
      throw ConfigError("inverse-dynamics mode needs an inverse dynamics model");
    }
  }

  void reset(std::uint64_t seed) override {
    rng_ = NoiseStream(seed);
    denoiser_ = CountingDenoiser(models_->denoiser);
    state_ = PlannerState{};
  }

  Decision act(const Vec& obs, double reward_prev) override {
    PlanningContext ctx{*models_, cfg_, denoiser_, rng_};
    return tdp_step(obs, reward_prev, state_, ctx);
  }

  long element_passes() const override { return denoiser_.passes(); }
  std::string name() const override { return label_; }

  const PlannerState& state() const { return state_; }
  const PlannerConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<const PlanningModels> models_;
  PlannerConfig cfg_;
  std::string label_;
  CountingDenoiser denoiser_;
  NoiseStream rng_;
  PlannerState state_;
};

}  // namespace tdp
