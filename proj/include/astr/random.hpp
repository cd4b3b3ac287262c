#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace astr {

/// Seeded generator whose real-valued draws are identical on every standard
/// library: mt19937_64 is fully specified, and the conversion to [0,1) uses
/// the top 53 bits directly instead of a library distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Exp(1) draw.
  double exponential() { return -std::log1p(-uniform()); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace astr
