#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_array.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/envs/point_mass.hpp"

namespace tdp {

enum class Tier { expert, medium, mixed };

inline std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::expert: return "expert";
    case Tier::medium: return "medium";
    case Tier::mixed: return "mixed";
  }
  return "?";
}

inline Tier parse_tier(std::string_view s) {
  if (s == "expert") return Tier::expert;
  if (s == "medium") return Tier::medium;
  if (s == "mixed") return Tier::mixed;
  throw ConfigError("unknown dataset tier: " + std::string(s));
}

/// One episode; column t of states/actions is step t.
struct Trajectory {
  Mat states;
  Mat actions;
  Vec rewards;
  bool terminal = false;

  int length() const { return static_cast<int>(rewards.size()); }
};

/// Per-dimension mean/std normalisation of states and actions.
struct NormStats {
  Vec state_mean, state_std, action_mean, action_std;
  std::vector<double> action_low, action_high;

  Vec normalize_state(const Eigen::Ref<const Vec>& s) const {
    return (s - state_mean).cwiseQuotient(state_std);
  }
  Vec denormalize_state(const Eigen::Ref<const Vec>& s) const {
    return s.cwiseProduct(state_std) + state_mean;
  }
  Vec normalize_action(const Eigen::Ref<const Vec>& a) const {
    return (a - action_mean).cwiseQuotient(action_std);
  }
  /// Raw action, clamped to the action box.
  Vec denormalize_action(const Eigen::Ref<const Vec>& a) const {
    Vec out = a.cwiseProduct(action_std) + action_mean;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out[i] = std::clamp(out[i], action_low[static_cast<std::size_t>(i)], action_high[static_cast<std::size_t>(i)]);
    }
    return out;
  }
  Vec denormalize_action_unclipped(const Eigen::Ref<const Vec>& a) const {
    return a.cwiseProduct(action_std) + action_mean;
  }

  bool operator==(const NormStats&) const = default;
};

namespace detail {
inline void mean_std(const std::vector<const Mat*>& blocks, Vec& mean, Vec& std_out, const char* what) {
  const Eigen::Index d = blocks.front()->rows();
  mean = Vec::Zero(d);
  long n = 0;
  for (const Mat* m : blocks) {
    mean += m->rowwise().sum();
    n += m->cols();
  }
  mean /= static_cast<double>(n);
  Vec var = Vec::Zero(d);
  for (const Mat* m : blocks) var += (m->colwise() - mean).array().square().matrix().rowwise().sum();
  var /= static_cast<double>(n);
  std_out = var.cwiseSqrt();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(std_out[i] > 1e-12)) {
      throw InputError(std::string("cannot normalise: ") + what + " dimension " + std::to_string(i) +
                       " has zero standard deviation");
    }
  }
}
}  // namespace detail

inline NormStats compute_norm_stats(const std::vector<Trajectory>& trajs, const EnvSpec& spec) {
  if (trajs.empty()) throw InputError("cannot normalise an empty dataset");
  std::vector<const Mat*> s, a;
  for (const auto& t : trajs) {
    s.push_back(&t.states);
    a.push_back(&t.actions);
  }
  NormStats st;
  detail::mean_std(s, st.state_mean, st.state_std, "state");
  detail::mean_std(a, st.action_mean, st.action_std, "action");
  st.action_low = spec.action_low;
  st.action_high = spec.action_high;
  return st;
}

struct Dataset {
  std::string env_id;
  Tier tier = Tier::expert;
  int state_dim = 0;
  int action_dim = 0;
  int episode_length = 0;
  std::vector<Trajectory> trajectories;
  NormStats stats;

  /// G_t = r_t + gamma * G_{t+1}, G_T = 0.
  Vec returns_to_go(std::size_t traj, double gamma) const {
    const Vec& r = trajectories.at(traj).rewards;
    Vec g(r.size());
    double acc = 0.0;
    for (Eigen::Index t = r.size() - 1; t >= 0; --t) {
      acc = r[t] + gamma * acc;
      g[t] = acc;
    }
    return g;
  }

  double mean_return() const {
    double s = 0.0;
    for (const auto& t : trajectories) s += t.rewards.sum();
    return s / static_cast<double>(trajectories.size());
  }

  /// Normalised [state; action] (or state-only) elements for steps [t, t+len).
  Mat window(std::size_t traj, int t, int len, ArrayMode mode) const {
    const auto& tr = trajectories.at(traj);
    if (t < 0 || t + len > tr.length()) throw InputError("window exceeds trajectory");
    const int d = mode == ArrayMode::state_action ? state_dim + action_dim : state_dim;
    Mat w(d, len);
    for (int i = 0; i < len; ++i) {
      w.col(i).head(state_dim) = stats.normalize_state(tr.states.col(t + i));
      if (mode == ArrayMode::state_action) w.col(i).tail(action_dim) = stats.normalize_action(tr.actions.col(t + i));
    }
    return w;
  }

  /// Per-dimension range of the normalised elements over the whole dataset.
  std::pair<Vec, Vec> element_bounds(ArrayMode mode) const {
    const int d = mode == ArrayMode::state_action ? state_dim + action_dim : state_dim;
    Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
    Vec hi = -lo;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const Mat w = window(i, 0, trajectories[i].length(), mode);
      lo = lo.cwiseMin(w.rowwise().minCoeff());
      hi = hi.cwiseMax(w.rowwise().maxCoeff());
    }
    return {lo, hi};
  }
};

/// Scripted behaviour policies used to fill datasets.
struct PdController {
  double kp = 2.0;
  double kd = 2.5;
  double noise = 0.05;

  Vec operator()(const PointMassEnv& env, const Eigen::Ref<const Vec>& s, NoiseStream& rng) const {
    const int n = env.dims();
    Vec a(n);
    for (int i = 0; i < n; ++i) a[i] = -kp * s[i] - kd * s[n + i] + noise * rng.normal();
    return env.clip_action(a);
  }
};

inline PdController expert_controller() { return {2.0, 2.5, 0.05}; }
inline PdController medium_controller() { return {0.3, 0.3, 0.3}; }

inline Vec random_action(const PointMassEnv& env, NoiseStream& rng) {
  Vec a(env.spec().action_dim);
  for (int i = 0; i < a.size(); ++i) a[i] = rng.uniform(env.spec().action_low[i], env.spec().action_high[i]);
  return a;
}

enum class Behaviour { expert, medium, random };

inline Trajectory rollout_behaviour(const PointMassEnv& env, Behaviour b, NoiseStream& rng) {
  const auto& sp = env.spec();
  Trajectory tr;
  tr.states.resize(sp.state_dim, sp.episode_length);
  tr.actions.resize(sp.action_dim, sp.episode_length);
  tr.rewards.resize(sp.episode_length);
  Vec s = env.reset(rng);
  const PdController ctl = b == Behaviour::medium ? medium_controller() : expert_controller();
  for (int t = 0; t < sp.episode_length; ++t) {
    const Vec a = b == Behaviour::random ? random_action(env, rng) : ctl(env, s, rng);
    auto res = env.step(s, a);
    tr.states.col(t) = s;
    tr.actions.col(t) = a;
    tr.rewards[t] = res.reward;
    s = std::move(res.next);
  }
  tr.terminal = false;
  return tr;
}

/// expert: PD controller with small noise; medium: weak gains, larger noise;
/// mixed: even episodes expert, odd episodes uniformly random actions.
inline Dataset gen_dataset(const PointMassEnv& env, Tier tier, int n_episodes, std::uint64_t seed) {
  if (n_episodes <= 0) throw ConfigError("dataset needs at least one episode");
  NoiseStream rng(seed);
  Dataset ds;
  ds.env_id = env.spec().id;
  ds.tier = tier;
  ds.state_dim = env.spec().state_dim;
  ds.action_dim = env.spec().action_dim;
  ds.episode_length = env.spec().episode_length;
  for (int e = 0; e < n_episodes; ++e) {
    Behaviour b = Behaviour::expert;
    if (tier == Tier::medium) b = Behaviour::medium;
    if (tier == Tier::mixed) b = e % 2 == 0 ? Behaviour::expert : Behaviour::random;
    ds.trajectories.push_back(rollout_behaviour(env, b, rng));
  }
  ds.stats = compute_norm_stats(ds.trajectories, env.spec());
  return ds;
}

/// Mean undiscounted return of the random and expert behaviours over fixed start
/// states; used to map raw returns to a 0 (random) .. 100 (expert) score.
struct ReferenceReturns {
  double random = 0.0;
  double expert = 0.0;

  double score(double raw_return) const { return 100.0 * (raw_return - random) / (expert - random); }
};

inline ReferenceReturns reference_returns(const PointMassEnv& env, int episodes = 200, std::uint64_t seed = 12345) {
  ReferenceReturns ref;
  NoiseStream r1(seed), r2(seed);
  for (int e = 0; e < episodes; ++e) {
    ref.random += rollout_behaviour(env, Behaviour::random, r1).rewards.sum();
    ref.expert += rollout_behaviour(env, Behaviour::expert, r2).rewards.sum();
  }
  ref.random /= episodes;
  ref.expert /= episodes;
  return ref;
}

}  // namespace tdp
