#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numeric>
#include <vector>

#include "tdp/core/errors.hpp"

namespace tdp::nn {

template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Ragged batch of sequences stored column-wise: sequence b occupies columns
/// [offsets[b], offsets[b] + lengths[b]).
struct SeqLayout {
  std::vector<int> offsets;
  std::vector<int> lengths;

  static SeqLayout uniform(int batch, int length) {
    SeqLayout l;
    l.offsets.resize(static_cast<std::size_t>(batch));
    l.lengths.assign(static_cast<std::size_t>(batch), length);
    for (int b = 0; b < batch; ++b) l.offsets[static_cast<std::size_t>(b)] = b * length;
    return l;
  }

  static SeqLayout from_lengths(const std::vector<int>& lengths) {
    SeqLayout l;
    l.lengths = lengths;
    l.offsets.resize(lengths.size());
    int off = 0;
    for (std::size_t b = 0; b < lengths.size(); ++b) {
      if (lengths[b] < 1) throw InputError("sequence lengths must be positive");
      l.offsets[b] = off;
      off += lengths[b];
    }
    return l;
  }

  int batch() const { return static_cast<int>(lengths.size()); }
  int total() const { return lengths.empty() ? 0 : offsets.back() + lengths.back(); }
};

/// Column stack [x(t-1); x(t); x(t+1)] with zero padding at sequence ends.
template <class T>
MatT<T> im2col3(const MatT<T>& x, const SeqLayout& layout) {
  const Eigen::Index c = x.rows();
  MatT<T> cols = MatT<T>::Zero(3 * c, x.cols());
  for (int b = 0; b < layout.batch(); ++b) {
    const int o = layout.offsets[static_cast<std::size_t>(b)];
    const int n = layout.lengths[static_cast<std::size_t>(b)];
    cols.block(c, o, c, n) = x.block(0, o, c, n);
    if (n > 1) {
      cols.block(0, o + 1, c, n - 1) = x.block(0, o, c, n - 1);
      cols.block(2 * c, o, c, n - 1) = x.block(0, o + 1, c, n - 1);
    }
  }
  return cols;
}

/// Adjoint of im2col3.
template <class T>
MatT<T> col2im3(const MatT<T>& cols, Eigen::Index channels, const SeqLayout& layout) {
  const Eigen::Index c = channels;
  MatT<T> x = MatT<T>::Zero(c, cols.cols());
  for (int b = 0; b < layout.batch(); ++b) {
    const int o = layout.offsets[static_cast<std::size_t>(b)];
    const int n = layout.lengths[static_cast<std::size_t>(b)];
    x.block(0, o, c, n) = cols.block(c, o, c, n);
    if (n > 1) {
      x.block(0, o, c, n - 1) += cols.block(0, o + 1, c, n - 1);
      x.block(0, o + 1, c, n - 1) += cols.block(2 * c, o, c, n - 1);
    }
  }
  return x;
}

template <class T>
inline T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

/// x * sigmoid(x), smooth everywhere.
template <class T>
MatT<T> silu(const MatT<T>& x) {
  return (x.array() / (T(1) + (-x.array()).exp())).matrix();
}

template <class T>
MatT<T> silu_backward(const MatT<T>& x, const MatT<T>& grad_out) {
  const auto s = (T(1) / (T(1) + (-x.array()).exp())).eval();
  return (grad_out.array() * s * (T(1) + x.array() * (T(1) - s))).matrix();
}

/// Sinusoidal embedding table; column k embeds diffusion step k.
template <class T>
MatT<T> step_embedding_table(int max_step, int dim) {
  if (dim % 2 != 0 || dim <= 0) throw ConfigError("step embedding dimension must be even and positive");
  MatT<T> table(dim, max_step + 1);
  const int half = dim / 2;
  for (int k = 0; k <= max_step; ++k) {
    for (int j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(1000.0) * static_cast<double>(j) / half);
      table(j, k) = static_cast<T>(std::sin(k * freq));
      table(half + j, k) = static_cast<T>(std::cos(k * freq));
    }
  }
  return table;
}

template <class T>
MatT<T> gather_columns(const MatT<T>& table, const std::vector<int>& idx) {
  MatT<T> out(table.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.cols()) throw std::out_of_range("embedding index out of range");
    out.col(static_cast<Eigen::Index>(i)) = table.col(idx[i]);
  }
  return out;
}

}  // namespace tdp::nn
