#pragma once

#include <cstdint>
#include <limits>
#include <optional>

#include "otdebias/tensor.hpp"

namespace otdebias {

/// Counter-based generator: draw i is a pure function of (key, i).
///
/// The mixing function is the SplitMix64 finalizer applied to
/// key + i * golden_gamma, so streams are identical on every platform for a
/// given seed. split() derives an independent key, which lets parallel
/// workers own their own streams without sharing state.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal();

  /// Generator with a key derived from this key and `stream`; does not advance *this.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> cached_normal_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// I.i.d. standard normal draws of the given shape.
Tensor normal_sample(Rng& rng, const Shape& shape);

/// Seed from the OTDEBIAS_SEED environment variable, else `fallback`.
std::uint64_t default_seed(std::uint64_t fallback = 42);

}  // namespace otdebias
