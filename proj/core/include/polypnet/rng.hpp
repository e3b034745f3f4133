#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace polypnet {

// Deterministic random source: xoshiro256++ with the state expanded from the
// seed by SplitMix64. The generator family and the draw mappings below are
// format-pinned (v1): any change invalidates recorded experiments, so treat
// them as frozen alongside the weight-container format.
//
//   next_u64      xoshiro256++ step
//   next_double   (next_u64() >> 11) * 2^-53, uniform in [0,1)
//   next_below(n) rejection-sampled unbiased integer in [0,n)
//   child(k)      Rng(splitmix64_mix(seed ^ (GOLDEN * (k+1))))
//
// A single Rng must stay single-owner; parallel work derives independent
// child generators instead of sharing one.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform draw in [0,1) with 53 random mantissa bits.
  double next_double();
  /// Uniform draw in [lo,hi); throws ValueError unless lo < hi.
  double uniform(double lo, double hi);
  /// Unbiased integer in [0,n); throws ValueError when n == 0.
  std::uint64_t next_below(std::uint64_t n);
  /// True with probability p.
  bool bernoulli(double p) { return next_double() < p; }

  /// Independent stream derived from this generator's seed; deterministic in
  /// (seed, stream) and unaffected by draws already consumed.
  Rng child(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  /// Fisher-Yates shuffle driven by next_below.
  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = next_below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace polypnet
