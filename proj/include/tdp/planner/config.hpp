#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_array.hpp"
#include "tdp/core/schedule.hpp"

namespace tdp {

enum class ReplanCriterion { state, value, never, every_n };
enum class ActionMode { direct, inverse_dynamics };

inline ReplanCriterion parse_criterion(std::string_view s) {
  if (s == "state") return ReplanCriterion::state;
  if (s == "value") return ReplanCriterion::value;
  if (s == "never") return ReplanCriterion::never;
  if (s == "every_n" || s == "interval") return ReplanCriterion::every_n;
  throw ConfigError("unknown replan criterion: " + std::string(s));
}

inline std::string_view to_string(ReplanCriterion c) {
  switch (c) {
    case ReplanCriterion::state: return "state";
    case ReplanCriterion::value: return "value";
    case ReplanCriterion::never: return "never";
    case ReplanCriterion::every_n: return "every_n";
  }
  return "?";
}

inline ActionMode parse_action_mode(std::string_view s) {
  if (s == "direct") return ActionMode::direct;
  if (s == "inverse_dynamics") return ActionMode::inverse_dynamics;
  throw ConfigError("unknown action mode: " + std::string(s));
}

inline std::string_view to_string(ActionMode m) {
  return m == ActionMode::direct ? "direct" : "inverse_dynamics";
}

// Calibrated on PointReach by the threshold sweep in the harness.
inline constexpr double kDefaultValueThreshold = 0.2;
inline constexpr double kDefaultStateThreshold = 30.0;

inline double default_threshold(ReplanCriterion c) {
  return c == ReplanCriterion::state ? kDefaultStateThreshold : kDefaultValueThreshold;
}

struct PlannerConfig {
  int horizon = 8;
  int diffusion_steps = 64;
  int kappa = 8;
  int candidates = 64;
  int top_m = 8;
  double guidance_scale = 0.1;
  ReplanCriterion criterion = ReplanCriterion::value;
  /// value: normalised-return units; state: negative log-density per state
  /// dimension.
  double threshold = kDefaultValueThreshold;
  int interval = 1;
  double gamma = 0.99;
  ActionMode mode = ActionMode::direct;
  ScheduleKind schedule = ScheduleKind::cosine;

  ArrayMode array_mode() const {
    return mode == ActionMode::direct ? ArrayMode::state_action : ArrayMode::state_only;
  }

  /// Distinct diffusion-step levels across a full plan.
  int levels() const { return mode == ActionMode::direct ? horizon : horizon / 2; }

  void validate() const {
    if (horizon < 1 || kappa < 1 || diffusion_steps < 2) throw ConfigError("H, kappa and K must be positive");
    if (mode == ActionMode::inverse_dynamics && (horizon < 2 || horizon % 2 != 0)) {
      throw ConfigError("inverse-dynamics plans need an even horizon >= 2");
    }
    if (levels() * kappa != diffusion_steps) {
      throw ConfigError("kappa * levels must equal K (kappa = K/H, or 2K/H in inverse-dynamics mode)");
    }
    if (candidates < 1 || top_m < 1 || top_m > candidates) throw ConfigError("need 1 <= m <= M");
    if (guidance_scale < 0.0 || !std::isfinite(guidance_scale)) throw ConfigError("guidance scale must be >= 0");
    if (std::isnan(threshold)) throw ConfigError("replan threshold is NaN");
    if (criterion == ReplanCriterion::every_n && interval < 1) throw ConfigError("replan interval must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  }

  /// Element-passes of one triangular initial plan, per candidate.
  long initial_plan_passes_per_candidate() const {
    long total = 0;
    const int per_round = mode == ActionMode::direct ? 1 : 2;
    for (int r = 1; r <= levels(); ++r) total += static_cast<long>(kappa) * r * per_round;
    return total;
  }

  /// Element-passes of one refinement, per candidate.
  long refinement_passes_per_candidate() const { return static_cast<long>(kappa) * horizon; }
};

}  // namespace tdp
