#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tdp/core/errors.hpp"

namespace tdp {

enum class ScheduleKind { linear, cosine };

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ConfigError("unknown schedule kind: " + std::string(s));
}

inline std::string_view to_string(ScheduleKind k) {
  return k == ScheduleKind::linear ? "linear" : "cosine";
}

/// Variance schedule beta_1..beta_K with its derived ladders.
///
/// Every accessor is indexed by the diffusion step itself. alpha_bar(0) is 1,
/// so the posterior variance at k = 1 evaluates to exactly 0 and the final
/// reverse transition is deterministic.
class Schedule {
 public:
  static Schedule make(int K, ScheduleKind kind, double beta_min = 1e-4, double beta_max = 0.02) {
    if (K < 2) throw ConfigError("schedule needs K >= 2, got " + std::to_string(K));
    std::vector<double> betas(static_cast<std::size_t>(K));
    if (kind == ScheduleKind::linear) {
      if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0)) {
        throw ConfigError("linear schedule needs 0 < beta_min < beta_max < 1");
      }
      for (int k = 1; k <= K; ++k) {
        betas[k - 1] = beta_min + (beta_max - beta_min) * static_cast<double>(k - 1) / (K - 1);
      }
    } else {
      constexpr double s = 0.008;
      auto f = [&](int k) {
        const double c = std::cos((static_cast<double>(k) / K + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return c * c;
      };
      const double f0 = f(0);
      double prev = 1.0;
      for (int k = 1; k <= K; ++k) {
        const double ab = f(k) / f0;
        double b = 1.0 - ab / prev;
        if (b > 0.999) b = 0.999;
        if (b <= 0.0) b = 1e-8;
        betas[k - 1] = b;
        prev = ab;
      }
    }
    return from_betas(std::move(betas), kind);
  }

  static Schedule from_betas(std::vector<double> betas, ScheduleKind kind = ScheduleKind::linear) {
    if (betas.size() < 2) throw ConfigError("schedule needs K >= 2");
    for (std::size_t i = 0; i < betas.size(); ++i) {
      if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw ConfigError("beta outside (0, 1)");
      if (i > 0 && !(betas[i] > betas[i - 1])) throw ConfigError("betas must be strictly increasing");
    }
    Schedule out;
    out.kind_ = kind;
    const std::size_t K = betas.size();
    out.betas_.assign(K + 1, 0.0);
    out.alphas_.assign(K + 1, 1.0);
    out.alpha_bars_.assign(K + 1, 1.0);
    out.posterior_vars_.assign(K + 1, 0.0);
    for (std::size_t k = 1; k <= K; ++k) {
      out.betas_[k] = betas[k - 1];
      out.alphas_[k] = 1.0 - betas[k - 1];
      out.alpha_bars_[k] = out.alpha_bars_[k - 1] * out.alphas_[k];
    }
    for (std::size_t k = 1; k <= K; ++k) {
      out.posterior_vars_[k] =
          (1.0 - out.alpha_bars_[k - 1]) / (1.0 - out.alpha_bars_[k]) * out.betas_[k];
    }
    return out;
  }

  int steps() const { return static_cast<int>(betas_.size()) - 1; }
  ScheduleKind kind() const { return kind_; }

  double beta(int k) const { return betas_.at(checked(k, 1)); }
  double alpha(int k) const { return alphas_.at(checked(k, 1)); }
  double alpha_bar(int k) const { return alpha_bars_.at(checked(k, 0)); }
  double posterior_variance(int k) const { return posterior_vars_.at(checked(k, 1)); }

 private:
  Schedule() = default;

  std::size_t checked(int k, int lo) const {
    if (k < lo || k > steps()) {
      throw std::out_of_range("diffusion step " + std::to_string(k) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(steps()) + "]");
    }
    return static_cast<std::size_t>(k);
  }

  ScheduleKind kind_ = ScheduleKind::linear;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> posterior_vars_;
};

}  // namespace tdp
