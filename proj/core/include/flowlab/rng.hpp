#pragma once

#include <cstdint>
#include <random>

namespace flowlab {

/// Seeded random source with platform-stable output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The standard distribution classes are implementation
/// defined, so every transform below is written out explicitly:
/// uniforms take the top 53 bits, normals use the Box-Muller transform and
/// Laplace draws invert the CDF.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). `n` must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Laplace(0, b) with variance 2 b^2.
  double laplace(double scale);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// SplitMix64 finaliser; derives independent child seeds from a master seed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace flowlab
