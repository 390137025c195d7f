#pragma once

#include <cstdint>
#include <random>

namespace umdqn {

/// Deterministic random source. All variates are derived from raw
/// mt19937_64 output so results do not depend on the standard library's
/// distribution implementations, which are unspecified.
///
/// A single seed fans out to independent sub-generators via split():
/// each (seed, stream) pair yields a reproducible stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Unbiased integer in {0, ..., n-1}; n >= 1.
  int uniform_int(int n);
  /// Gaussian via Box-Muller (second variate cached).
  double normal(double mu, double sigma);

  /// Independent sub-generator for the given stream id.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace umdqn
