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

struct DenoiserConfig {
  int element_dim = 0;
  int channels = 32;
  int blocks = 3;
  int embed_dim = 16;
  int max_step = 64;

  bool operator==(const DenoiserConfig&) const = default;
};

/// Fully convolutional temporal noise model.
///
/// Input conv over [x; emb(k_i)], then `blocks` residual units
/// h += conv(silu(h + P emb(k_i))), then a zero-initialised output conv. All
/// convolutions have kernel 3 along time, so any sequence length >= 1 works and
/// the output has the input's shape. k_i is the element's own diffusion step.
template <class T>
class DenoiserNet {
 public:
  using MatT = nn::MatT<T>;

  DenoiserNet() = default;

  explicit DenoiserNet(DenoiserConfig cfg) : cfg_(cfg) {
    if (cfg.element_dim <= 0 || cfg.channels <= 0 || cfg.blocks < 0) throw ConfigError("bad denoiser shape");
    const int in = cfg.element_dim + cfg.embed_dim;
    in_w_ = params_.add("in.w", cfg.channels, 3 * in);
    in_b_ = params_.add("in.b", cfg.channels, 1);
    for (int b = 0; b < cfg.blocks; ++b) {
      const std::string p = "block" + std::to_string(b);
      emb_w_.push_back(params_.add(p + ".emb.w", cfg.channels, cfg.embed_dim));
      conv_w_.push_back(params_.add(p + ".conv.w", cfg.channels, 3 * cfg.channels));
      conv_b_.push_back(params_.add(p + ".conv.b", cfg.channels, 1));
    }
    out_w_ = params_.add("out.w", cfg.element_dim, 3 * cfg.channels);
    out_b_ = params_.add("out.b", cfg.element_dim, 1);
    table_ = nn::step_embedding_table<T>(cfg.max_step, cfg.embed_dim);
  }

  /// Gaussian fan-in init for hidden layers; output head stays at zero.
  void initialize(NoiseStream& rng) {
    const int in = cfg_.element_dim + cfg_.embed_dim;
    params_.init_normal(in_w_, 1.0 / std::sqrt(3.0 * in), rng);
    for (int b = 0; b < cfg_.blocks; ++b) {
      params_.init_normal(emb_w_[b], 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim)), rng);
      params_.init_normal(conv_w_[b], 0.5 / std::sqrt(3.0 * cfg_.channels), rng);
    }
  }

  const DenoiserConfig& config() const { return cfg_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  template <class U>
  DenoiserNet<U> cast() const {
    DenoiserNet<U> out(cfg_);
    out.params() = params_.template cast<U>();
    return out;
  }

  struct Cache {
    nn::SeqLayout layout;
    MatT emb;
    MatT cols_in;
    MatT pre_in;
    std::vector<MatT> block_u;
    std::vector<MatT> block_cols;
    MatT h_final;
    MatT cols_out;
  };

  MatT forward(const MatT& x, const std::vector<int>& steps, const nn::SeqLayout& layout, Cache* cache = nullptr) const {
    check_input(x, steps, layout);
    MatT emb = nn::gather_columns(table_, steps);
    MatT a0(x.rows() + emb.rows(), x.cols());
    a0 << x, emb;
    MatT cols_in = nn::im2col3(a0, layout);
    MatT pre_in = params_.mat(in_w_) * cols_in;
    pre_in.colwise() += params_.mat(in_b_).col(0);
    MatT h = nn::silu(pre_in);
    if (cache) {
      cache->layout = layout;
      cache->cols_in = std::move(cols_in);
      cache->pre_in = pre_in;
      cache->block_u.clear();
      cache->block_cols.clear();
    }
    for (int b = 0; b < cfg_.blocks; ++b) {
      MatT u = h + params_.mat(emb_w_[b]) * emb;
      MatT cols = nn::im2col3(MatT(nn::silu(u)), layout);
      MatT conv = params_.mat(conv_w_[b]) * cols;
      conv.colwise() += params_.mat(conv_b_[b]).col(0);
      h += conv;
      if (cache) {
        cache->block_u.push_back(std::move(u));
        cache->block_cols.push_back(std::move(cols));
      }
    }
    MatT cols_out = nn::im2col3(MatT(nn::silu(h)), layout);
    MatT out = params_.mat(out_w_) * cols_out;
    out.colwise() += params_.mat(out_b_).col(0);
    if (cache) {
      cache->emb = std::move(emb);
      cache->h_final = std::move(h);
      cache->cols_out = std::move(cols_out);
    }
    return out;
  }

  /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
  void backward(const Cache& c, const MatT& grad_out, nn::Buffer<T>& grads) const {
    if (grads.size() != params_.size()) grads.assign(params_.size(), T(0));
    params_.view(grads, out_w_) += grad_out * c.cols_out.transpose();
    params_.view(grads, out_b_) += grad_out.rowwise().sum();
    MatT dcols = params_.mat(out_w_).transpose() * grad_out;
    MatT dh = nn::silu_backward(c.h_final, nn::col2im3(dcols, cfg_.channels, c.layout));
    for (int b = cfg_.blocks - 1; b >= 0; --b) {
      params_.view(grads, conv_w_[b]) += dh * c.block_cols[b].transpose();
      params_.view(grads, conv_b_[b]) += dh.rowwise().sum();
      MatT dcb = params_.mat(conv_w_[b]).transpose() * dh;
      MatT du = nn::silu_backward(c.block_u[b], nn::col2im3(dcb, cfg_.channels, c.layout));
      params_.view(grads, emb_w_[b]) += du * c.emb.transpose();
      dh += du;
    }
    MatT dpre = nn::silu_backward(c.pre_in, dh);
    params_.view(grads, in_w_) += dpre * c.cols_in.transpose();
    params_.view(grads, in_b_) += dpre.rowwise().sum();
  }

 private:
  void check_input(const MatT& x, const std::vector<int>& steps, const nn::SeqLayout& layout) const {
    if (x.rows() != cfg_.element_dim) throw InputError("denoiser input has the wrong element dimension");
    if (static_cast<Eigen::Index>(steps.size()) != x.cols() || layout.total() != x.cols()) {
      throw InputError("denoiser steps/layout do not match the input columns");
    }
  }

  DenoiserConfig cfg_{};
  nn::ParamSet<T> params_;
  std::size_t in_w_ = 0, in_b_ = 0, out_w_ = 0, out_b_ = 0;
  std::vector<std::size_t> emb_w_, conv_w_, conv_b_;
  MatT table_;
};

}  // namespace tdp
