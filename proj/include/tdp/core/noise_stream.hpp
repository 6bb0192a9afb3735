#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tdp {

/// Seeded source of Gaussian and uniform draws. Every stochastic operation takes
/// one explicitly so runs are reproducible bit-for-bit.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}

  /// A stream whose Gaussian draws are all exactly zero.
  static NoiseStream frozen_zero() {
    NoiseStream s(0);
    s.zero_ = true;
    return s;
  }

  /// Child stream keyed by (this stream's seed material, tag); does not advance *this.
  static NoiseStream derive(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    std::mt19937_64 e(seq);
    return NoiseStream(e());
  }

  double normal() {
    if (zero_) return 0.0;
    return normal_(engine_);
  }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  std::uint64_t next_u64() { return engine_(); }

  bool is_frozen_zero() const { return zero_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  bool zero_ = false;
};

}  // namespace tdp
