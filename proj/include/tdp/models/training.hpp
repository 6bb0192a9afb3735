#pragma once

#include <Eigen/Core>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "tdp/core/diffusion.hpp"
#include "tdp/core/errors.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/core/schedule.hpp"
#include "tdp/envs/dataset.hpp"
#include "tdp/models/denoiser.hpp"
#include "tdp/models/invdyn.hpp"
#include "tdp/models/value.hpp"
#include "tdp/nn/adam.hpp"

namespace tdp {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int steps = 4000;
  int horizon = 8;
  int kappa = 8;
  int diffusion_steps = 64;
  double gamma = 0.99;
  std::uint64_t seed = 0;
  double ema_decay = 0.0;  // 0 disables
  ArrayMode mode = ArrayMode::state_action;
  ScheduleKind schedule = ScheduleKind::cosine;
  // Fraction of samples drawn as ordinary arrays (all elements at one step), so
  // the same network also serves the full-replanning baselines.
  double uniform_fraction = 0.25;
  int channels = 32;
  int value_channels = 32;
  int invdyn_hidden = 128;

  /// kappa * H == K in state_action mode, kappa * H == 2K in state_only mode.
  void validate() const {
    if (horizon < 1 || kappa < 1 || diffusion_steps < 2) throw ConfigError("horizon, kappa and K must be positive");
    if (diffusion_steps % horizon != 0) throw ConfigError("horizon must divide K exactly");
    const int levels = mode == ArrayMode::state_action ? horizon : horizon / 2;
    if (mode == ArrayMode::state_only && horizon % 2 != 0) throw ConfigError("state_only plans need an even horizon");
    if (levels * kappa != diffusion_steps) throw ConfigError("kappa must equal K / (number of step levels)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (batch_size < 1 || steps < 0) throw ConfigError("bad batch size or step count");
    if (uniform_fraction < 0.0 || uniform_fraction > 1.0) throw ConfigError("uniform_fraction outside [0, 1]");
  }
};

/// Trained value model plus the affine map from network output to raw return.
struct ValueModel {
  ValueNet<double> net;
  double return_mean = 0.0;
  double return_std = 1.0;
};

struct TrainTrace {
  std::vector<double> loss;

  double window_mean(std::size_t begin, std::size_t count) const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = begin; i < loss.size() && n < count; ++i, ++n) s += loss[i];
    return n ? s / static_cast<double>(n) : 0.0;
  }
  double tail_mean(std::size_t count) const {
    return loss.size() < count ? window_mean(0, loss.size()) : window_mean(loss.size() - count, count);
  }
};

template <class Net>
struct Trained {
  Net model;
  TrainTrace trace;
};

/// Per-element step pattern of one training sample.
///
/// state_action: k, k+kappa, ... (or all k with probability uniform_fraction).
/// state_only: either k + floor(i/2) kappa, or the intermediate pattern a
/// state_only refinement passes through: odd positions j steps behind.
inline std::vector<int> sample_step_pattern(const TrainConfig& cfg, int min_base, NoiseStream& rng) {
  const int K = cfg.diffusion_steps;
  const int H = cfg.horizon;
  std::vector<int> steps;
  const bool uniform = rng.uniform() < cfg.uniform_fraction;
  const int k = rng.uniform_int(min_base, K);
  if (uniform) {
    steps.assign(static_cast<std::size_t>(H), k);
    return steps;
  }
  if (cfg.mode == ArrayMode::state_action) {
    for (int i = 0; i < H && k + i * cfg.kappa <= K; ++i) steps.push_back(k + i * cfg.kappa);
    return steps;
  }
  if (rng.uniform() < 0.5) {
    for (int i = 0; i < H && k + (i / 2) * cfg.kappa <= K; ++i) steps.push_back(k + (i / 2) * cfg.kappa);
    return steps;
  }
  const int lag = rng.uniform_int(0, cfg.kappa - 1);
  for (int i = 0; i < H; ++i) {
    const int lvl = (i + 1) / 2;
    steps.push_back(i % 2 == 1 ? lvl * cfg.kappa - lag : lvl * cfg.kappa);
  }
  return steps;
}

/// Noised sample built from a clean window and explicit per-element steps;
/// position 0's state is replaced by the clean state.
struct TrainingSample {
  Mat x;
  Mat eps;
  Mat mask;  // 1 where the noise target is defined
  std::vector<int> steps;
};

inline TrainingSample make_training_sample(const Mat& window, std::vector<int> steps, int state_dim,
                                           const Schedule& schedule, NoiseStream& rng) {
  const int d = static_cast<int>(window.rows());
  const int L = static_cast<int>(steps.size());
  TrainingSample s{Mat(d, L), Mat::Zero(d, L), Mat::Ones(d, L), std::move(steps)};
  for (int i = 0; i < L; ++i) {
    const int k = s.steps[static_cast<std::size_t>(i)];
    if (k == 0) {
      s.x.col(i) = window.col(i);
      s.mask.col(i).setZero();
      continue;
    }
    Vec e(d);
    rng.fill_normal({e.data(), static_cast<std::size_t>(d)});
    s.eps.col(i) = e;
    s.x.col(i) = forward_noise(window.col(i), k, e, schedule);
  }
  s.x.col(0).head(state_dim) = window.col(0).head(state_dim);
  s.mask.col(0).head(state_dim).setZero();
  return s;
}

namespace detail {

inline void check_trainable(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.trajectories.empty()) throw InputError("training needs a non-empty dataset");
  for (const auto& t : ds.trajectories) {
    if (t.length() < cfg.horizon) throw InputError("trajectory shorter than the planning horizon");
  }
}

inline void check_finite(double loss, int step, const char* what) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << what << " training diverged: non-finite loss at step " << step;
    throw TrainingError(msg.str());
  }
}

struct WindowDraw {
  std::size_t traj;
  int start;
};

inline WindowDraw draw_window(const Dataset& ds, int horizon, NoiseStream& rng) {
  const auto traj = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(ds.trajectories.size()) - 1));
  const int start = rng.uniform_int(0, ds.trajectories[traj].length() - horizon);
  return {traj, start};
}

inline void ema_update(nn::Buffer<double>& ema, const nn::Buffer<double>& params, double decay) {
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = decay * ema[i] + (1.0 - decay) * params[i];
}

}  // namespace detail

inline DenoiserConfig denoiser_config_for(const Dataset& ds, const TrainConfig& cfg) {
  DenoiserConfig c;
  c.element_dim = cfg.mode == ArrayMode::state_action ? ds.state_dim + ds.action_dim : ds.state_dim;
  c.channels = cfg.channels;
  c.max_step = cfg.diffusion_steps;
  return c;
}

/// Masked squared-error loss of a noise prediction and its output gradient.
inline double denoiser_loss(const Mat& pred, const Mat& target, const Mat& mask, Mat* grad) {
  const double n = mask.sum();
  const Mat diff = (pred - target).cwiseProduct(mask);
  if (grad) *grad = (2.0 / n) * diff;
  return diff.squaredNorm() / n;
}

/// Minimises E || eps - eps_theta(x_k(tau), k) ||^2 over sampled windows.
inline Trained<DenoiserNet<double>> train_denoiser(const Dataset& ds, const TrainConfig& cfg, NoiseStream& rng) {
  detail::check_trainable(ds, cfg);
  const Schedule schedule = Schedule::make(cfg.diffusion_steps, cfg.schedule);
  DenoiserNet<double> net(denoiser_config_for(ds, cfg));
  net.initialize(rng);
  nn::Adam opt(net.params().size(), {cfg.learning_rate});
  nn::Buffer<double> ema = net.params().values();
  Trained<DenoiserNet<double>> out{net, {}};
  out.trace.loss.reserve(static_cast<std::size_t>(cfg.steps));
  nn::Buffer<double> grads;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<TrainingSample> batch;
    std::vector<int> lengths;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto w = detail::draw_window(ds, cfg.horizon, rng);
      auto steps = sample_step_pattern(cfg, 1, rng);
      const Mat window = ds.window(w.traj, w.start, static_cast<int>(steps.size()), cfg.mode);
      batch.push_back(make_training_sample(window, std::move(steps), ds.state_dim, schedule, rng));
      lengths.push_back(static_cast<int>(batch.back().steps.size()));
    }
    const auto layout = nn::SeqLayout::from_lengths(lengths);
    const int d = net.config().element_dim;
    Mat x(d, layout.total()), eps(d, layout.total()), mask(d, layout.total());
    std::vector<int> all_steps;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const int o = layout.offsets[b];
      const int n = layout.lengths[b];
      x.middleCols(o, n) = batch[b].x;
      eps.middleCols(o, n) = batch[b].eps;
      mask.middleCols(o, n) = batch[b].mask;
      all_steps.insert(all_steps.end(), batch[b].steps.begin(), batch[b].steps.end());
    }
    DenoiserNet<double>::Cache cache;
    const Mat pred = out.model.forward(x, all_steps, layout, &cache);
    Mat gout;
    const double loss = denoiser_loss(pred, eps, mask, &gout);
    detail::check_finite(loss, step, "denoiser");
    out.trace.loss.push_back(loss);
    grads.assign(out.model.params().size(), 0.0);
    out.model.backward(cache, gout, grads);
    opt.step(out.model.params().values(), grads);
    if (cfg.ema_decay > 0.0) detail::ema_update(ema, out.model.params().values(), cfg.ema_decay);
  }
  if (cfg.ema_decay > 0.0) out.model.params().values() = ema;
  return out;
}

inline ValueConfig value_config_for(const Dataset& ds, const TrainConfig& cfg) {
  ValueConfig c;
  c.element_dim = cfg.mode == ArrayMode::state_action ? ds.state_dim + ds.action_dim : ds.state_dim;
  c.channels = cfg.value_channels;
  c.max_step = cfg.diffusion_steps;
  return c;
}

/// Regresses the discounted return-to-go from the window start on noise arrays
/// built at sampled steps k in {0..K}.
inline Trained<ValueModel> train_value(const Dataset& ds, const TrainConfig& cfg, NoiseStream& rng) {
  detail::check_trainable(ds, cfg);
  const Schedule schedule = Schedule::make(cfg.diffusion_steps, cfg.schedule);
  std::vector<Vec> rtg;
  double sum = 0.0, sum2 = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    rtg.push_back(ds.returns_to_go(i, cfg.gamma));
    sum += rtg.back().sum();
    sum2 += rtg.back().squaredNorm();
    count += rtg.back().size();
  }
  ValueModel vm{ValueNet<double>(value_config_for(ds, cfg))};
  vm.return_mean = sum / count;
  const double var = sum2 / count - vm.return_mean * vm.return_mean;
  vm.return_std = var > 1e-12 ? std::sqrt(var) : 1.0;
  vm.net.initialize(rng);
  nn::Adam opt(vm.net.params().size(), {cfg.learning_rate});
  nn::Buffer<double> ema = vm.net.params().values();
  Trained<ValueModel> out{vm, {}};
  nn::Buffer<double> grads;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<int> lengths, all_steps;
    std::vector<Mat> xs;
    Vec target(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto w = detail::draw_window(ds, cfg.horizon, rng);
      auto steps = sample_step_pattern(cfg, 0, rng);
      const Mat window = ds.window(w.traj, w.start, static_cast<int>(steps.size()), cfg.mode);
      auto s = make_training_sample(window, std::move(steps), ds.state_dim, schedule, rng);
      target[b] = (rtg[w.traj][w.start] - vm.return_mean) / vm.return_std;
      lengths.push_back(static_cast<int>(s.steps.size()));
      all_steps.insert(all_steps.end(), s.steps.begin(), s.steps.end());
      xs.push_back(std::move(s.x));
    }
    const auto layout = nn::SeqLayout::from_lengths(lengths);
    Mat x(vm.net.config().element_dim, layout.total());
    for (std::size_t b = 0; b < xs.size(); ++b) x.middleCols(layout.offsets[b], layout.lengths[b]) = xs[b];
    ValueNet<double>::Cache cache;
    const Vec pred = out.model.net.forward(x, all_steps, layout, &cache);
    const Vec diff = pred - target;
    const double loss = diff.squaredNorm() / cfg.batch_size;
    detail::check_finite(loss, step, "value");
    out.trace.loss.push_back(loss);
    grads.assign(out.model.net.params().size(), 0.0);
    out.model.net.backward(cache, Vec((2.0 / cfg.batch_size) * diff), grads);
    opt.step(out.model.net.params().values(), grads);
    if (cfg.ema_decay > 0.0) detail::ema_update(ema, out.model.net.params().values(), cfg.ema_decay);
  }
  if (cfg.ema_decay > 0.0) out.model.net.params().values() = ema;
  return out;
}

/// Value estimate in raw return units for every sequence of a batch.
inline Vec value_forward(const ValueModel& vm, const Mat& x, const std::vector<int>& steps, const nn::SeqLayout& layout) {
  return (vm.net.forward(x, steps, layout).array() * vm.return_std + vm.return_mean).matrix();
}

inline Vec value_forward(const ValueModel& vm, const NoiseArray& arr) {
  return value_forward(vm, arr.data(), arr.steps(), nn::SeqLayout::uniform(1, arr.length()));
}

/// Gradient of the normalised value w.r.t. the array elements.
inline Mat value_input_grad(const ValueModel& vm, const NoiseArray& arr) {
  return vm.net.input_grad(arr.data(), arr.steps(), nn::SeqLayout::uniform(1, arr.length()));
}

inline InvDynConfig invdyn_config_for(const Dataset& ds, const TrainConfig& cfg) {
  InvDynConfig c;
  c.state_dim = ds.state_dim;
  c.action_dim = ds.action_dim;
  c.hidden = cfg.invdyn_hidden;
  c.action_low = ds.stats.action_low;
  c.action_high = ds.stats.action_high;
  return c;
}

/// Pairs of normalised consecutive states and the raw actions between them.
struct TransitionSet {
  Mat pairs;
  Mat actions;
};

inline TransitionSet collect_transitions(const Dataset& ds) {
  long n = 0;
  for (const auto& t : ds.trajectories) n += t.length() - 1;
  TransitionSet ts{Mat(2 * ds.state_dim, n), Mat(ds.action_dim, n)};
  long c = 0;
  for (const auto& t : ds.trajectories) {
    for (int i = 0; i + 1 < t.length(); ++i, ++c) {
      ts.pairs.col(c) << ds.stats.normalize_state(t.states.col(i)), ds.stats.normalize_state(t.states.col(i + 1));
      ts.actions.col(c) = t.actions.col(i);
    }
  }
  return ts;
}

/// Minimises E || a - I_psi(s, s') ||^2 over dataset transitions.
inline Trained<InvDynNet<double>> train_invdyn(const Dataset& ds, const TrainConfig& cfg, NoiseStream& rng) {
  if (ds.trajectories.empty()) throw InputError("training needs a non-empty dataset");
  if (cfg.batch_size < 1 || cfg.steps < 0) throw ConfigError("bad batch size or step count");
  const TransitionSet ts = collect_transitions(ds);
  if (ts.pairs.cols() == 0) throw InputError("dataset has no transitions");
  InvDynNet<double> net(invdyn_config_for(ds, cfg));
  net.initialize(rng);
  nn::Adam opt(net.params().size(), {cfg.learning_rate});
  Trained<InvDynNet<double>> out{net, {}};
  nn::Buffer<double> grads;
  Mat in(ts.pairs.rows(), cfg.batch_size), target(ts.actions.rows(), cfg.batch_size);
  for (int step = 0; step < cfg.steps; ++step) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int j = rng.uniform_int(0, static_cast<int>(ts.pairs.cols()) - 1);
      in.col(b) = ts.pairs.col(j);
      target.col(b) = ts.actions.col(j);
    }
    InvDynNet<double>::Cache cache;
    const Mat diff = out.model.forward_raw(in, &cache) - target;
    const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
    detail::check_finite(loss, step, "inverse dynamics");
    out.trace.loss.push_back(loss);
    grads.assign(out.model.params().size(), 0.0);
    out.model.backward(cache, Mat((2.0 / static_cast<double>(diff.size())) * diff), grads);
    opt.step(out.model.params().values(), grads);
  }
  return out;
}

}  // namespace tdp
