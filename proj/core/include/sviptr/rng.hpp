#pragma once

#include <cmath>
#include <cstdint>

namespace sviptr {

// 64-bit finalizer used by the counter-based generator (splitmix64 mixing step).
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: the n-th draw of stream (seed, stream_id) is a pure
// function of (seed, stream_id, n), so any draw can be reproduced bitwise from
// its coordinates alone. No hidden global state.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : base_(mix64(seed ^ mix64(stream * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL))) {}

  uint64_t next_u64() { return mix64(base_ + (++counter_) * 0x2545f4914f6cdd1dULL); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). n must be >= 1.
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; the pair is drawn eagerly so consumption
  // order is deterministic regardless of call pattern.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0x1.0p-60) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Normal truncated to [-2*sigma, 2*sigma], the usual transformer init.
  double trunc_normal(double sigma) {
    for (;;) {
      const double v = normal();
      if (v >= -2.0 && v <= 2.0) return v * sigma;
    }
  }

  uint64_t counter() const { return counter_; }

 private:
  uint64_t base_ = 0;
  uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace sviptr
