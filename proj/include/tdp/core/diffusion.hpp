#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_array.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/core/schedule.hpp"

namespace tdp {

/// Classifier-guidance settings. A zero scale is the same as disabled.
struct GuidanceConfig {
  double scale = 0.0;
  bool enabled = false;

  bool active() const { return enabled && scale != 0.0; }
};

/// sqrt(alpha_bar_k) * x0 + sqrt(1 - alpha_bar_k) * eps.
inline Vec forward_noise(const Eigen::Ref<const Vec>& x0, int k, const Eigen::Ref<const Vec>& eps,
                         const Schedule& schedule) {
  if (k < 1 || k > schedule.steps()) {
    throw std::out_of_range("forward_noise step " + std::to_string(k) + " outside [1, K]");
  }
  if (eps.size() != x0.size()) throw InputError("noise and signal dimensions differ");
  const double ab = schedule.alpha_bar(k);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

/// A noise array together with the Gaussian draws used to produce it.
struct NoisedArray {
  NoiseArray array;
  Mat eps;  // same shape as array.data(); zero columns where no noise was drawn
};

/// Forward-noises a clean window so that position i sits at its implied step.
///
/// `window` holds one clean element per column. The array keeps the positions in
/// [0, horizon) whose step is below K; position 0's state is then replaced by the
/// window's true first state.
inline NoisedArray build_noise_array_with_eps(const Eigen::Ref<const Mat>& window, int horizon, int k, int kappa,
                                              const Schedule& schedule, NoiseStream& eps_source,
                                              ElementLayout layout, int phase = 0) {
  const int K = schedule.steps();
  if (k < 0 || k > K) throw std::out_of_range("base step outside [0, K]");
  if (window.rows() != layout.element_dim()) throw InputError("window rows do not match element dimension");
  const int len = NoiseArray::cutoff_length(k, kappa, K, horizon, layout.mode, phase);
  if (window.cols() < len) {
    throw InputError("trajectory window has " + std::to_string(window.cols()) + " elements, need " +
                     std::to_string(len));
  }
  NoisedArray out{NoiseArray(layout, k, kappa, K, phase), Mat::Zero(layout.element_dim(), len)};
  out.array.data().resize(layout.element_dim(), len);
  for (int i = 0; i < len; ++i) {
    const int step = out.array.implied_step(i);
    if (step == 0) {
      out.array.element(i) = window.col(i);
      continue;
    }
    Vec eps(layout.element_dim());
    eps_source.fill_normal({eps.data(), static_cast<std::size_t>(eps.size())});
    out.eps.col(i) = eps;
    out.array.element(i) = forward_noise(window.col(i), step, eps, schedule);
  }
  if (len > 0) out.array.pin_state(Vec(window.col(0).head(layout.state_dim)));
  return out;
}

inline NoiseArray build_noise_array(const Eigen::Ref<const Mat>& window, int horizon, int k, int kappa,
                                    const Schedule& schedule, NoiseStream& eps_source, ElementLayout layout,
                                    int phase = 0) {
  return build_noise_array_with_eps(window, horizon, k, kappa, schedule, eps_source, layout, phase).array;
}

/// Reverse-process mean at step k for a single element.
inline Vec posterior_mean(const Eigen::Ref<const Vec>& x, int k, const Eigen::Ref<const Vec>& eps_pred,
                          const Schedule& schedule) {
  const double a = schedule.alpha(k);
  const double ab = schedule.alpha_bar(k);
  return (x - ((1.0 - a) / std::sqrt(1.0 - ab)) * eps_pred) / std::sqrt(a);
}

/// Noise prediction implied by clamping the predicted clean element
/// (x - sqrt(1 - alpha_bar_k) eps) / sqrt(alpha_bar_k) to the box [lo, hi].
inline Vec clip_predicted_noise(const Eigen::Ref<const Vec>& x, int k, const Eigen::Ref<const Vec>& eps_pred,
                                const Eigen::Ref<const Vec>& lo, const Eigen::Ref<const Vec>& hi,
                                const Schedule& schedule) {
  const double ab = schedule.alpha_bar(k);
  const double sa = std::sqrt(ab);
  const double sn = std::sqrt(1.0 - ab);
  const Vec x0 = ((x - sn * eps_pred) / sa).cwiseMax(lo).cwiseMin(hi);
  return (x - sa * x0) / sn;
}

/// One reverse transition k -> k-1 of a single element, given its posterior mean.
/// Fresh noise is drawn only when k > 1.
inline Vec reverse_from_mean(const Eigen::Ref<const Vec>& mean, int k, const Vec* guidance_grad,
                             const GuidanceConfig& guidance, NoiseStream& noise_source, const Schedule& schedule) {
  const double var = schedule.posterior_variance(k);
  Vec out = mean;
  if (guidance.active() && guidance_grad != nullptr) out += (guidance.scale * var) * (*guidance_grad);
  if (k > 1) {
    const double sd = std::sqrt(var);
    for (Eigen::Index j = 0; j < out.size(); ++j) out[j] += sd * noise_source.normal();
  }
  return out;
}

/// Posterior means of every element of `arr` at its implied step. Elements at
/// step 0 are returned unchanged.
inline Mat posterior_means(const NoiseArray& arr, const Eigen::Ref<const Mat>& eps_pred, const Schedule& schedule) {
  if (eps_pred.rows() != arr.dim() || eps_pred.cols() != arr.length()) {
    throw InputError("noise prediction is not aligned with the array");
  }
  Mat mu(arr.dim(), arr.length());
  for (int i = 0; i < arr.length(); ++i) {
    const int k = arr.implied_step(i);
    mu.col(i) = k == 0 ? Vec(arr.element(i)) : posterior_mean(arr.element(i), k, eps_pred.col(i), schedule);
  }
  return mu;
}

/// One guided reverse step of a whole array: every element moves from its
/// implied step k_i to k_i - 1, base_step drops by one and position 0's state is
/// re-pinned to the conditioning state it carried before the step.
inline NoiseArray denoise_step(const NoiseArray& arr, const Eigen::Ref<const Mat>& eps_pred,
                               const std::optional<Mat>& guidance_grad, const GuidanceConfig& guidance,
                               NoiseStream& noise_source, const Schedule& schedule) {
  if (arr.base_step() == 0) throw StateError("array is already at step 0");
  if (arr.max_step() != schedule.steps()) throw InputError("array K does not match the schedule");
  if (guidance_grad && (guidance_grad->rows() != arr.dim() || guidance_grad->cols() != arr.length())) {
    throw InputError("guidance gradient is not aligned with the array");
  }
  const Mat mu = posterior_means(arr, eps_pred, schedule);
  NoiseArray out = arr;
  for (int i = 0; i < arr.length(); ++i) {
    const int k = arr.implied_step(i);
    if (k == 0) continue;
    Vec g;
    if (guidance_grad) g = guidance_grad->col(i);
    out.element(i) = reverse_from_mean(mu.col(i), k, guidance_grad ? &g : nullptr, guidance, noise_source, schedule);
  }
  if (arr.length() > 0) out.pin_state(Vec(arr.state(0)));
  out.set_base_step(arr.base_step() - 1);
  return out;
}

/// Appends standard-Gaussian elements until the array has `target_positions`.
inline NoiseArray pad_with_noise(const NoiseArray& arr, int target_positions, NoiseStream& noise_source) {
  NoiseArray out = arr;
  Vec e(arr.dim());
  while (out.length() < target_positions) {
    noise_source.fill_normal({e.data(), static_cast<std::size_t>(e.size())});
    out.append(e);
  }
  return out;
}

/// log N(s_plan; sqrt(alpha_bar_k) s_true, (1 - alpha_bar_k) I).
inline double noised_state_log_density(const Eigen::Ref<const Vec>& s_plan, const Eigen::Ref<const Vec>& s_true, int k,
                                       const Schedule& schedule) {
  if (k == 0) throw std::out_of_range("log density at step 0 is degenerate");
  if (k < 1 || k > schedule.steps()) throw std::out_of_range("log density step outside [1, K]");
  if (s_plan.size() != s_true.size()) throw InputError("state dimensions differ");
  const double ab = schedule.alpha_bar(k);
  const double var = 1.0 - ab;
  const double d = static_cast<double>(s_plan.size());
  const double r2 = (s_plan - std::sqrt(ab) * s_true).squaredNorm();
  return -0.5 * d * std::log(2.0 * std::numbers::pi * var) - r2 / (2.0 * var);
}

}  // namespace tdp
