#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/envs/dataset.hpp"
#include "tdp/envs/point_mass.hpp"
#include "tdp/planner/agent.hpp"

namespace tdp {

struct StepRecord {
  std::uint64_t seed = 0;
  int episode = 0;
  int t = 0;
  Vec action;
  double reward = 0.0;
  double criterion = std::numeric_limits<double>::quiet_NaN();
  bool replanned = false;
  long element_passes = 0;
  std::int64_t wall_ns = 0;
};

struct EpisodeResult {
  std::uint64_t seed = 0;
  int episode = 0;
  double total_return = 0.0;
  std::vector<StepRecord> steps;
  long planner_passes = 0;  // the planner's own counter at episode end
};

using PlannerFactory = std::function<std::unique_ptr<Planner>()>;

/// Optional hook that may overwrite the true state before the planner sees it.
using Disturbance = std::function<void(int t, Vec& state)>;

struct EvalOptions {
  std::vector<std::uint64_t> seeds{0};
  int episodes = 1;
  int workers = 1;
  bool timing = true;
};

enum class StreamRole : std::uint64_t { env = 0, planner = 1 };

/// Deterministic per-(seed, episode) noise source.
inline NoiseStream episode_stream(std::uint64_t seed, int episode, StreamRole role) {
  return NoiseStream::derive(seed, 2 * static_cast<std::uint64_t>(episode) + static_cast<std::uint64_t>(role));
}

inline EpisodeResult run_episode(const PointMassEnv& env, Planner& planner, std::uint64_t seed, int episode,
                                 bool timing, const Disturbance& disturbance = {}) {
  NoiseStream env_rng = episode_stream(seed, episode, StreamRole::env);
  planner.reset(episode_stream(seed, episode, StreamRole::planner).next_u64());
  EpisodeResult out{seed, episode, 0.0, {}, 0};
  out.steps.reserve(static_cast<std::size_t>(env.spec().episode_length));
  Vec s = env.reset(env_rng);
  double reward_prev = 0.0;
  for (int t = 0; t < env.spec().episode_length; ++t) {
    if (disturbance) disturbance(t, s);
    const auto start = std::chrono::steady_clock::now();
    Decision d = planner.act(s, reward_prev);
    const auto stop = std::chrono::steady_clock::now();
    auto [next, reward] = env.step(s, d.action);
    StepRecord rec{seed, episode, t, env.clip_action(d.action), reward, d.criterion, d.replanned, d.element_passes,
                   timing ? std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count() : 0};
    out.total_return += reward;
    out.steps.push_back(std::move(rec));
    s = std::move(next);
    reward_prev = reward;
  }
  out.planner_passes = planner.element_passes();
  return out;
}

/// Runs every (seed, episode) pair, possibly on several threads. Results are
/// ordered by (seed index, episode) whatever the scheduling.
inline std::vector<EpisodeResult> evaluate_planner(const PointMassEnv& env, const PlannerFactory& make_planner,
                                                   const EvalOptions& opt, const Disturbance& disturbance = {}) {
  if (opt.seeds.empty()) throw ConfigError("evaluation needs at least one seed");
  if (opt.episodes < 1) throw ConfigError("evaluation needs at least one episode");
  const std::size_t jobs = opt.seeds.size() * static_cast<std::size_t>(opt.episodes);
  std::vector<EpisodeResult> results(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    try {
      auto planner = make_planner();
      for (std::size_t j = next++; j < jobs; j = next++) {
        const std::uint64_t seed = opt.seeds[j / static_cast<std::size_t>(opt.episodes)];
        const int episode = static_cast<int>(j % static_cast<std::size_t>(opt.episodes));
        results[j] = run_episode(env, *planner, seed, episode, opt.timing, disturbance);
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = jobs;
    }
  };

  const int n_workers = std::clamp<int>(opt.workers, 1, static_cast<int>(jobs));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

struct EfficiencyReport {
  std::string planner;
  long episodes = 0;
  long steps = 0;
  long replans = 0;  // including the first decision of each episode
  double wall_mean_ms = 0.0;
  double wall_p50_ms = 0.0;
  double wall_p95_ms = 0.0;
  double decisions_per_second = 0.0;
  double passes_per_decision = 0.0;
  double replan_ratio = 0.0;
  double avg_replan_interval = 0.0;
  double return_mean = 0.0;
  double return_stderr = 0.0;  // over per-seed means
  double return_stderr_episodes = 0.0;
  double score_mean = 0.0;
  double score_stderr = 0.0;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Aggregates step records. The first decision of each episode always plans and
/// is left out of the replan ratio; the average interval counts it.
inline EfficiencyReport summarize(const std::vector<EpisodeResult>& results, const ReferenceReturns& ref,
                                  std::string planner = {}) {
  EfficiencyReport r;
  r.planner = std::move(planner);
  r.episodes = static_cast<long>(results.size());
  std::vector<double> wall_ms, episode_returns;
  std::vector<std::uint64_t> seed_order;
  std::vector<std::vector<double>> per_seed;
  long passes = 0;
  for (const auto& ep : results) {
    double ret = 0.0;
    for (const auto& s : ep.steps) {
      ++r.steps;
      r.replans += s.replanned ? 1 : 0;
      passes += s.element_passes;
      ret += s.reward;
      wall_ms.push_back(static_cast<double>(s.wall_ns) * 1e-6);
    }
    episode_returns.push_back(ret);
    auto it = std::find(seed_order.begin(), seed_order.end(), ep.seed);
    if (it == seed_order.end()) {
      seed_order.push_back(ep.seed);
      per_seed.emplace_back();
      it = seed_order.end() - 1;
    }
    per_seed[static_cast<std::size_t>(it - seed_order.begin())].push_back(ret);
  }
  if (r.steps == 0) return r;
  r.wall_mean_ms = detail::mean_of(wall_ms);
  r.wall_p50_ms = detail::percentile(wall_ms, 0.5);
  r.wall_p95_ms = detail::percentile(wall_ms, 0.95);
  r.decisions_per_second = r.wall_mean_ms > 0.0 ? 1e3 / r.wall_mean_ms : 0.0;
  r.passes_per_decision = static_cast<double>(passes) / static_cast<double>(r.steps);
  const long optional_steps = r.steps - r.episodes;
  r.replan_ratio = optional_steps > 0 ? static_cast<double>(r.replans - r.episodes) / static_cast<double>(optional_steps) : 0.0;
  r.avg_replan_interval = r.replans > 0 ? static_cast<double>(r.steps) / static_cast<double>(r.replans) : 0.0;

  std::vector<double> seed_means, seed_scores;
  for (const auto& v : per_seed) {
    seed_means.push_back(detail::mean_of(v));
    seed_scores.push_back(ref.score(seed_means.back()));
  }
  r.return_mean = detail::mean_of(episode_returns);
  r.return_stderr = detail::stderr_of(seed_means);
  r.return_stderr_episodes = detail::stderr_of(episode_returns);
  r.score_mean = ref.score(r.return_mean);
  r.score_stderr = detail::stderr_of(seed_scores);
  return r;
}

}  // namespace tdp
