#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/nn/ops.hpp"
#include "tdp/nn/params.hpp"

namespace tdp {

struct InvDynConfig {
  int state_dim = 0;
  int action_dim = 0;
  int hidden = 128;
  std::vector<double> action_low;
  std::vector<double> action_high;

  bool operator==(const InvDynConfig&) const = default;
};

/// Two-hidden-layer SiLU MLP mapping (s_t, s_{t+1}) to a_t; inputs are normalised
/// states, outputs are raw actions clamped to the action box.
template <class T>
class InvDynNet {
 public:
  using MatT = nn::MatT<T>;

  InvDynNet() = default;

  explicit InvDynNet(InvDynConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.state_dim <= 0 || cfg_.action_dim <= 0) throw ConfigError("bad inverse dynamics shape");
    if (static_cast<int>(cfg_.action_low.size()) != cfg_.action_dim ||
        static_cast<int>(cfg_.action_high.size()) != cfg_.action_dim) {
      throw ConfigError("action box does not match the action dimension");
    }
    w_[0] = params_.add("l0.w", cfg_.hidden, 2 * cfg_.state_dim);
    b_[0] = params_.add("l0.b", cfg_.hidden, 1);
    w_[1] = params_.add("l1.w", cfg_.hidden, cfg_.hidden);
    b_[1] = params_.add("l1.b", cfg_.hidden, 1);
    w_[2] = params_.add("l2.w", cfg_.action_dim, cfg_.hidden);
    b_[2] = params_.add("l2.b", cfg_.action_dim, 1);
  }

  void initialize(NoiseStream& rng) {
    params_.init_normal(w_[0], 1.0 / std::sqrt(2.0 * cfg_.state_dim), rng);
    params_.init_normal(w_[1], 1.0 / std::sqrt(static_cast<double>(cfg_.hidden)), rng);
    params_.init_normal(w_[2], 1.0 / std::sqrt(static_cast<double>(cfg_.hidden)), rng);
  }

  const InvDynConfig& config() const { return cfg_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  struct Cache {
    MatT in, pre0, pre1, act1;
  };

  /// Unclamped output for a batch; each column of `pairs` is [s; s_next].
  MatT forward_raw(const MatT& pairs, Cache* cache = nullptr) const {
    if (pairs.rows() != 2 * cfg_.state_dim) throw InputError("inverse dynamics input has the wrong dimension");
    MatT pre0 = params_.mat(w_[0]) * pairs;
    pre0.colwise() += params_.mat(b_[0]).col(0);
    MatT a0 = nn::silu(pre0);
    MatT pre1 = params_.mat(w_[1]) * a0;
    pre1.colwise() += params_.mat(b_[1]).col(0);
    MatT a1 = nn::silu(pre1);
    MatT out = params_.mat(w_[2]) * a1;
    out.colwise() += params_.mat(b_[2]).col(0);
    if (cache) {
      cache->in = pairs;
      cache->pre0 = std::move(pre0);
      cache->pre1 = std::move(pre1);
      cache->act1 = std::move(a1);
    }
    return out;
  }

  MatT forward(const MatT& pairs) const {
    MatT out = forward_raw(pairs);
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (int i = 0; i < cfg_.action_dim; ++i)
        out(i, j) = std::clamp(out(i, j), static_cast<T>(cfg_.action_low[i]), static_cast<T>(cfg_.action_high[i]));
    return out;
  }

  void backward(const Cache& c, const MatT& grad_out, nn::Buffer<T>& grads) const {
    if (grads.size() != params_.size()) grads.assign(params_.size(), T(0));
    params_.view(grads, w_[2]) += grad_out * c.act1.transpose();
    params_.view(grads, b_[2]) += grad_out.rowwise().sum();
    MatT d1 = nn::silu_backward(c.pre1, MatT(params_.mat(w_[2]).transpose() * grad_out));
    params_.view(grads, w_[1]) += d1 * nn::silu(c.pre0).transpose();
    params_.view(grads, b_[1]) += d1.rowwise().sum();
    MatT d0 = nn::silu_backward(c.pre0, MatT(params_.mat(w_[1]).transpose() * d1));
    params_.view(grads, w_[0]) += d0 * c.in.transpose();
    params_.view(grads, b_[0]) += d0.rowwise().sum();
  }

 private:
  InvDynConfig cfg_{};
  nn::ParamSet<T> params_;
  std::size_t w_[3]{}, b_[3]{};
};

}  // namespace tdp
