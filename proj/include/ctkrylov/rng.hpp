#pragma once

#include <cmath>
#include <cstdint>

namespace ctkrylov {

/// Counter-based 64-bit PRNG (splitmix64). All randomness in the library
/// flows through this generator so runs are reproducible across platforms
/// from a single integer seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + next_unit() * (hi - lo);
  }

  /// Standard normal via Box-Muller; draws two uniforms per pair.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // 1 - u keeps the argument of log strictly positive.
    const double u1 = 1.0 - next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  /// Uniform point in the disk of radius `radius`, by rejection from the
  /// bounding square. Uses only exact arithmetic, so the accepted stream is
  /// identical on every platform.
  void next_in_disk(double radius, double& x, double& y) {
    do {
      x = next_uniform(-radius, radius);
      y = next_uniform(-radius, radius);
    } while (x * x + y * y > radius * radius);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ctkrylov
