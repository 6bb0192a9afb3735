#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "tdp/core/noise_array.hpp"
#include "tdp/core/schedule.hpp"
#include "tdp/envs/dataset.hpp"
#include "tdp/models/denoiser.hpp"
#include "tdp/models/invdyn.hpp"
#include "tdp/models/training.hpp"
#include "tdp/models/value.hpp"
#include "tdp/planner/config.hpp"

namespace tdp {

/// Precision of network evaluation during planning. Training and gradient
/// checks run in double; planning runs in single precision for speed.
using PlanScalar = float;

/// Read-only bundle shared by every rollout.
struct PlanningModels {
  Schedule schedule;
  NormStats norm;
  ElementLayout layout;
  DenoiserNet<PlanScalar> denoiser;
  ValueNet<PlanScalar> value;
  double value_mean = 0.0;
  double value_std = 1.0;
  std::optional<InvDynNet<double>> invdyn;
  /// Box for predicted clean elements (normalised units); empty disables clipping.
  Vec x0_low, x0_high;

  bool clips_x0() const { return x0_low.size() > 0; }

  static std::shared_ptr<const PlanningModels> make(const Schedule& schedule, const NormStats& norm,
                                                    ElementLayout layout, const DenoiserNet<double>& den,
                                                    const ValueModel& value,
                                                    std::optional<InvDynNet<double>> invdyn = std::nullopt,
                                                    std::optional<std::pair<Vec, Vec>> x0_box = std::nullopt) {
    if (den.config().element_dim != layout.element_dim() || value.net.config().element_dim != layout.element_dim()) {
      throw ConfigError("model element dimension does not match the plan layout");
    }
    if (den.config().max_step != schedule.steps() || value.net.config().max_step != schedule.steps()) {
      throw ConfigError("model step embedding does not cover the schedule");
    }
    if (x0_box && (x0_box->first.size() != layout.element_dim() || x0_box->second.size() != layout.element_dim())) {
      throw ConfigError("clean-element box does not match the plan layout");
    }
    PlanningModels m{schedule, norm, layout, den.template cast<PlanScalar>(), value.net.template cast<PlanScalar>(),
                     value.return_mean, value.return_std, std::move(invdyn), {}, {}};
    if (x0_box) {
      m.x0_low = x0_box->first;
      m.x0_high = x0_box->second;
    }
    return std::make_shared<const PlanningModels>(std::move(m));
  }
};

/// Denoiser handle that counts element-passes: one per input column per call.
/// Owned by a single rollout.
class CountingDenoiser {
 public:
  explicit CountingDenoiser(const DenoiserNet<PlanScalar>& net) : net_(&net) {}

  Mat operator()(const Mat& x, const std::vector<int>& steps, const nn::SeqLayout& layout) {
    passes_ += x.cols();
    return net_->forward(x.cast<PlanScalar>(), steps, layout).template cast<double>();
  }

  long passes() const { return passes_; }

 private:
  const DenoiserNet<PlanScalar>* net_;
  long passes_ = 0;
};

}  // namespace tdp
