#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/core/noise_stream.hpp"
#include "tdp/nn/ops.hpp"

namespace tdp::nn {

/// Flat weight or gradient storage. Over-aligned so vectorised kernels see the
/// same alignment on every run and results do not vary with heap placement.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Shape manifest entry for one named weight block inside a flat vector.
struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  bool operator==(const ParamBlock&) const = default;
};

/// All weights of one network as a single flat vector plus its manifest.
/// Blocks are column-major matrices, matching Eigen's default storage.
template <class T>
class ParamSet {
 public:
  std::size_t add(std::string name, int rows, int cols) {
    ParamBlock b{std::move(name), rows, cols, values_.size()};
    values_.resize(values_.size() + b.size(), T(0));
    blocks_.push_back(std::move(b));
    return blocks_.size() - 1;
  }

  Eigen::Map<MatT<T>> mat(std::size_t idx) {
    const auto& b = blocks_.at(idx);
    return {values_.data() + b.offset, b.rows, b.cols};
  }
  Eigen::Map<const MatT<T>> mat(std::size_t idx) const {
    const auto& b = blocks_.at(idx);
    return {values_.data() + b.offset, b.rows, b.cols};
  }

  /// View of block `idx` inside an external gradient buffer shaped like values().
  Eigen::Map<MatT<T>> view(Buffer<T>& buffer, std::size_t idx) const {
    const auto& b = blocks_.at(idx);
    return {buffer.data() + b.offset, b.rows, b.cols};
  }

  Buffer<T>& values() { return values_; }
  const Buffer<T>& values() const { return values_; }
  const std::vector<ParamBlock>& manifest() const { return blocks_; }
  std::size_t size() const { return values_.size(); }

  /// Fan-in scaled Gaussian initialisation of one block.
  void init_normal(std::size_t idx, double stddev, NoiseStream& rng) {
    auto m = mat(idx);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(stddev * rng.normal());
  }

  void assign(const std::vector<ParamBlock>& manifest, const std::vector<T>& values) {
    if (manifest != blocks_) throw InputError("parameter manifest does not match the network layout");
    if (values.size() != values_.size()) throw InputError("parameter vector has the wrong length");
    values_.assign(values.begin(), values.end());
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& b : blocks_) out.add(b.name, b.rows, b.cols);
    for (std::size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<U>(values_[i]);
    return out;
  }

  bool all_finite() const {
    for (const T& v : values_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  std::vector<ParamBlock> blocks_;
  Buffer<T> values_;
};

}  // namespace tdp::nn
