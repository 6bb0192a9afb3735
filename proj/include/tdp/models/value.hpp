#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/nn/ops.hpp"
#include "tdp/nn/params.hpp"

namespace tdp {

struct ValueConfig {
  int element_dim = 0;
  int channels = 32;
  int trunk_layers = 2;  // 0 gives a linear head over the mean-pooled input
  int embed_dim = 16;
  int max_step = 64;

  bool operator==(const ValueConfig&) const = default;
};

/// Return predictor over a (noised) plan: conv trunk with SiLU, mean pool over
/// time, linear head. Output is in normalised return units; the smooth trunk
/// makes the input gradient well defined everywhere.
template <class T>
class ValueNet {
 public:
  using MatT = nn::MatT<T>;
  using VecT = nn::VecT<T>;

  ValueNet() = default;

  explicit ValueNet(ValueConfig cfg) : cfg_(cfg) {
    if (cfg.element_dim <= 0 || cfg.trunk_layers < 0) throw ConfigError("bad value model shape");
    int in = cfg.element_dim + cfg.embed_dim;
    for (int l = 0; l < cfg.trunk_layers; ++l) {
      conv_w_.push_back(params_.add("trunk" + std::to_string(l) + ".w", cfg.channels, 3 * in));
      conv_b_.push_back(params_.add("trunk" + std::to_string(l) + ".b", cfg.channels, 1));
      in = cfg.channels;
    }
    head_w_ = params_.add("head.w", 1, in);
    head_b_ = params_.add("head.b", 1, 1);
    table_ = nn::step_embedding_table<T>(cfg.max_step, cfg.embed_dim);
  }

  void initialize(NoiseStream& rng) {
    int in = cfg_.element_dim + cfg_.embed_dim;
    for (int l = 0; l < cfg_.trunk_layers; ++l) {
      params_.init_normal(conv_w_[l], 1.0 / std::sqrt(3.0 * in), rng);
      in = cfg_.channels;
    }
    params_.init_normal(head_w_, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  }

  const ValueConfig& config() const { return cfg_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  template <class U>
  ValueNet<U> cast() const {
    ValueNet<U> out(cfg_);
    out.params() = params_.template cast<U>();
    return out;
  }

  struct Cache {
    nn::SeqLayout layout;
    std::vector<MatT> cols;  // im2col input of each trunk layer
    std::vector<MatT> pre;   // pre-activation of each trunk layer
    MatT features;           // last activation (or the raw input)
    MatT pooled;
  };

  /// One value per sequence in `layout`.
  VecT forward(const MatT& x, const std::vector<int>& steps, const nn::SeqLayout& layout, Cache* cache = nullptr) const {
    if (x.rows() != cfg_.element_dim) throw InputError("value input has the wrong element dimension");
    if (static_cast<Eigen::Index>(steps.size()) != x.cols() || layout.total() != x.cols()) {
      throw InputError("value steps/layout do not match the input columns");
    }
    MatT emb = nn::gather_columns(table_, steps);
    MatT h(x.rows() + emb.rows(), x.cols());
    h << x, emb;
    if (cache) {
      cache->layout = layout;
      cache->cols.clear();
      cache->pre.clear();
    }
    for (int l = 0; l < cfg_.trunk_layers; ++l) {
      MatT cols = nn::im2col3(h, layout);
      MatT pre = params_.mat(conv_w_[l]) * cols;
      pre.colwise() += params_.mat(conv_b_[l]).col(0);
      h = nn::silu(pre);
      if (cache) {
        cache->cols.push_back(std::move(cols));
        cache->pre.push_back(std::move(pre));
      }
    }
    MatT pooled(h.rows(), layout.batch());
    for (int b = 0; b < layout.batch(); ++b) {
      const int o = layout.offsets[static_cast<std::size_t>(b)];
      const int n = layout.lengths[static_cast<std::size_t>(b)];
      pooled.col(b) = h.middleCols(o, n).rowwise().sum() / static_cast<T>(n);
    }
    VecT out = (params_.mat(head_w_) * pooled).transpose();
    out.array() += params_.mat(head_b_)(0, 0);
    if (cache) {
      cache->features = std::move(h);
      cache->pooled = std::move(pooled);
    }
    return out;
  }

  /// Gradient of each sequence's output w.r.t. that sequence's input elements.
  MatT input_grad(const MatT& x, const std::vector<int>& steps, const nn::SeqLayout& layout) const {
    Cache c;
    forward(x, steps, layout, &c);
    return backprop(c, VecT::Ones(layout.batch()), nullptr);
  }

  /// Accumulates parameter gradients given d(loss)/d(output) per sequence.
  void backward(const Cache& c, const VecT& grad_out, nn::Buffer<T>& grads) const {
    if (grads.size() != params_.size()) grads.assign(params_.size(), T(0));
    backprop(c, grad_out, &grads);
  }

 private:
  MatT backprop(const Cache& c, const VecT& grad_out, nn::Buffer<T>* grads) const {
    const auto& layout = c.layout;
    if (grads) {
      params_.view(*grads, head_w_) += grad_out.transpose() * c.pooled.transpose();
      params_.view(*grads, head_b_)(0, 0) += grad_out.sum();
    }
    MatT dh(c.features.rows(), c.features.cols());
    const auto w = params_.mat(head_w_);
    for (int b = 0; b < layout.batch(); ++b) {
      const int o = layout.offsets[static_cast<std::size_t>(b)];
      const int n = layout.lengths[static_cast<std::size_t>(b)];
      const nn::VecT<T> g = w.transpose() * (grad_out[b] / static_cast<T>(n));
      dh.middleCols(o, n) = g.replicate(1, n);
    }
    for (int l = cfg_.trunk_layers - 1; l >= 0; --l) {
      MatT dpre = nn::silu_backward(c.pre[l], dh);
      if (grads) {
        params_.view(*grads, conv_w_[l]) += dpre * c.cols[l].transpose();
        params_.view(*grads, conv_b_[l]) += dpre.rowwise().sum();
      }
      const int in = l == 0 ? cfg_.element_dim + cfg_.embed_dim : cfg_.channels;
      dh = nn::col2im3(MatT(params_.mat(conv_w_[l]).transpose() * dpre), in, layout);
    }
    return dh.topRows(cfg_.element_dim);
  }

  ValueConfig cfg_{};
  nn::ParamSet<T> params_;
  std::vector<std::size_t> conv_w_, conv_b_;
  std::size_t head_w_ = 0, head_b_ = 0;
  MatT table_;
};

}  // namespace tdp
