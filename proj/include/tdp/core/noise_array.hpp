#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "tdp/core/errors.hpp"

namespace tdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// state_action: each element is [state; action] and the diffusion step grows by
/// kappa per position. state_only: elements are states and the step grows by
/// kappa every two positions.
enum class ArrayMode { state_action, state_only };

/// Dimensions of one plan element.
struct ElementLayout {
  int state_dim = 0;
  int action_dim = 0;
  ArrayMode mode = ArrayMode::state_action;

  int element_dim() const { return mode == ArrayMode::state_action ? state_dim + action_dim : state_dim; }
  bool operator==(const ElementLayout&) const = default;
};

/// A plan whose position i sits at its own diffusion step.
///
/// Per-element steps are never stored: they follow from the header as
/// min(base_step + level(i) * kappa, K), where level(i) = i in state_action mode
/// and floor((i + phase) / 2) in state_only mode. Positions whose formula reaches
/// K are Gaussian padding. kappa = 0 describes an ordinary array in which every
/// element shares base_step.
class NoiseArray {
 public:
  NoiseArray() = default;

  NoiseArray(ElementLayout layout, int base_step, int kappa, int max_step, int phase = 0)
      : layout_(layout), base_(base_step), kappa_(kappa), K_(max_step), phase_(phase),
        data_(layout.element_dim(), 0) {
    if (layout.element_dim() <= 0) throw ConfigError("element dimension must be positive");
    if (kappa < 0) throw ConfigError("kappa must be non-negative");
    if (base_step < 0 || base_step > max_step) throw ConfigError("base step outside [0, K]");
    if (phase != 0 && phase != 1) throw ConfigError("phase must be 0 or 1");
    if (phase == 1 && layout.mode != ArrayMode::state_only) throw ConfigError("phase 1 is state_only only");
  }

  const ElementLayout& layout() const { return layout_; }
  ArrayMode mode() const { return layout_.mode; }
  int dim() const { return layout_.element_dim(); }
  int length() const { return static_cast<int>(data_.cols()); }
  int base_step() const { return base_; }
  int kappa() const { return kappa_; }
  int max_step() const { return K_; }
  int phase() const { return phase_; }

  int level(int i) const { return layout_.mode == ArrayMode::state_action ? i : (i + phase_) / 2; }

  int implied_step(int i) const { return std::min(base_ + level(i) * kappa_, K_); }

  std::vector<int> steps() const {
    std::vector<int> s(static_cast<std::size_t>(length()));
    for (int i = 0; i < length(); ++i) s[static_cast<std::size_t>(i)] = implied_step(i);
    return s;
  }

  /// Number of positions in [0, horizon) whose implied step is strictly below K.
  static int cutoff_length(int base_step, int kappa, int max_step, int horizon,
                           ArrayMode mode = ArrayMode::state_action, int phase = 0) {
    int n = 0;
    for (int i = 0; i < horizon; ++i) {
      const int lvl = mode == ArrayMode::state_action ? i : (i + phase) / 2;
      if (base_step + lvl * kappa < max_step) ++n;
    }
    return n;
  }

  Mat& data() { return data_; }
  const Mat& data() const { return data_; }

  auto element(int i) { return data_.col(i); }
  auto element(int i) const { return data_.col(i); }

  auto state(int i) { return data_.col(i).head(layout_.state_dim); }
  auto state(int i) const { return data_.col(i).head(layout_.state_dim); }

  auto action(int i) {
    if (layout_.mode != ArrayMode::state_action) throw StateError("state_only arrays carry no actions");
    return data_.col(i).tail(layout_.action_dim);
  }
  auto action(int i) const {
    if (layout_.mode != ArrayMode::state_action) throw StateError("state_only arrays carry no actions");
    return data_.col(i).tail(layout_.action_dim);
  }

  void append(const Eigen::Ref<const Vec>& element) {
    if (element.size() != dim()) throw InputError("appended element has wrong dimension");
    data_.conservativeResize(Eigen::NoChange, data_.cols() + 1);
    data_.col(data_.cols() - 1) = element;
  }

  /// Removes position 0; the remaining positions keep their implied steps.
  void drop_front() {
    if (length() == 0) throw StateError("cannot drop from an empty array");
    const int n = length() - 1;
    Mat rest = data_.rightCols(n);
    data_ = std::move(rest);
    if (layout_.mode == ArrayMode::state_action) {
      base_ = std::min(base_ + kappa_, K_);
    } else if (phase_ == 0) {
      phase_ = 1;
    } else {
      phase_ = 0;
      base_ = std::min(base_ + kappa_, K_);
    }
  }

  void pin_state(std::span<const double> s) {
    if (length() == 0) throw StateError("cannot pin an empty array");
    if (static_cast<int>(s.size()) != layout_.state_dim) throw InputError("conditioning state has wrong dimension");
    for (int j = 0; j < layout_.state_dim; ++j) data_(j, 0) = s[static_cast<std::size_t>(j)];
  }
  void pin_state(const Eigen::Ref<const Vec>& s) { pin_state(std::span<const double>(s.data(), static_cast<std::size_t>(s.size()))); }

  void set_base_step(int k) {
    if (k < 0 || k > K_) throw ConfigError("base step outside [0, K]");
    base_ = k;
  }
  void set_phase(int p) {
    if (p != 0 && p != 1) throw ConfigError("phase must be 0 or 1");
    if (p == 1 && layout_.mode != ArrayMode::state_only) throw ConfigError("phase 1 is state_only only");
    phase_ = p;
  }

  bool same_header(const NoiseArray& o) const {
    return layout_ == o.layout_ && base_ == o.base_ && kappa_ == o.kappa_ && K_ == o.K_ && phase_ == o.phase_ &&
           length() == o.length();
  }

 private:
  ElementLayout layout_{};
  int base_ = 0;
  int kappa_ = 0;
  int K_ = 0;
  int phase_ = 0;
  Mat data_;
};

}  // namespace tdp
