#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_array.hpp"
#include "tdp/core/noise_stream.hpp"

namespace tdp {

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  int episode_length = 0;
  std::string reward_id = "neg_goal_distance";
  std::string dynamics_id = "point_mass_semi_implicit";
  double dt = 0.1;
  double velocity_limit = 2.0;
  double start_range = 2.0;  // start positions ~ U[-range, range]^n, at rest
};

inline EnvSpec point_reach_spec() {
  return {"point_reach", 4, 2, {-1.0, -1.0}, {1.0, 1.0}, 64};
}

inline EnvSpec line_world_spec() {
  return {"line_world", 2, 1, {-1.0}, {1.0}, 32};
}

/// Deterministic point mass in n dimensions with state (position, velocity) and
/// acceleration actions. The goal is the origin.
///
///   v' = clip(v + a dt, +-vmax),  p' = p + v' dt,  r = -|p'|
class PointMassEnv {
 public:
  struct StepResult {
    Vec next;
    double reward = 0.0;
  };

  explicit PointMassEnv(EnvSpec spec) : spec_(std::move(spec)) {
    if (spec_.state_dim != 2 * spec_.action_dim || spec_.action_dim <= 0) {
      throw ConfigError("point mass needs state_dim == 2 * action_dim");
    }
    if (static_cast<int>(spec_.action_low.size()) != spec_.action_dim ||
        static_cast<int>(spec_.action_high.size()) != spec_.action_dim) {
      throw ConfigError("action box does not match action_dim");
    }
    if (spec_.episode_length <= 0) throw ConfigError("episode length must be positive");
  }

  const EnvSpec& spec() const { return spec_; }
  int dims() const { return spec_.action_dim; }

  Vec reset(NoiseStream& rng) const {
    Vec s = Vec::Zero(spec_.state_dim);
    for (int i = 0; i < dims(); ++i) s[i] = rng.uniform(-spec_.start_range, spec_.start_range);
    return s;
  }

  Vec clip_action(const Eigen::Ref<const Vec>& a) const {
    Vec out = a;
    for (int i = 0; i < spec_.action_dim; ++i) out[i] = std::clamp(out[i], spec_.action_low[i], spec_.action_high[i]);
    return out;
  }

  StepResult step(const Eigen::Ref<const Vec>& s, const Eigen::Ref<const Vec>& a) const {
    if (s.size() != spec_.state_dim || a.size() != spec_.action_dim) throw InputError("state/action dimension mismatch");
    const Vec u = clip_action(a);
    Vec next(spec_.state_dim);
    const int n = dims();
    for (int i = 0; i < n; ++i) {
      const double v = std::clamp(s[n + i] + u[i] * spec_.dt, -spec_.velocity_limit, spec_.velocity_limit);
      next[n + i] = v;
      next[i] = s[i] + v * spec_.dt;
    }
    return {next, reward(next)};
  }

  double reward(const Eigen::Ref<const Vec>& s) const { return -s.head(dims()).norm(); }

 private:
  EnvSpec spec_;
};

inline PointMassEnv point_reach_env() { return PointMassEnv(point_reach_spec()); }
inline PointMassEnv line_world_env() { return PointMassEnv(line_world_spec()); }

inline PointMassEnv make_env(std::string_view id) {
  if (id == "point_reach") return point_reach_env();
  if (id == "line_world") return line_world_env();
  throw ConfigError("unknown environment: " + std::string(id));
}

}  // namespace tdp
