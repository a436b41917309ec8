#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace genadam {

/// Deterministic random source. All draws are derived from raw mt19937_64
/// output so that streams are bit-identical across platforms; the standard
/// library distributions are avoided on purpose (their algorithms are
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; two uniforms per pair, second value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, n). n must be positive.
  std::int64_t uniform_below(std::int64_t n) {
    return static_cast<std::int64_t>(
        (static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace genadam
