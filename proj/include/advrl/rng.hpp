#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace advrl {

/// Deterministic random helpers on top of std::mt19937_64.
///
/// The standard <random> distributions are allowed to differ between library
/// implementations, which would silently break byte-for-byte reproducible
/// experiment outputs. The raw mt19937_64 bit stream is pinned by the
/// standard, so all value shaping is done here with fixed algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0,1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive. Uses rejection sampling
  /// so the result is exactly uniform and platform-independent.
  int uniform_int(int n) {
    const std::uint64_t span = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return static_cast<int>(x % span);
  }

  /// Standard normal via Box-Muller; one cached value per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Samples an index from an unnormalized nonnegative weight row.
  template <typename Row>
  int categorical(const Row& weights) {
    double total = 0.0;
    for (const double w : weights) total += w;
    const double u = uniform01() * total;
    double acc = 0.0;
    const int n = static_cast<int>(weights.size());
    for (int i = 0; i < n; ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace advrl
