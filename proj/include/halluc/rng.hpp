#pragma once

// Counter-based 64-bit generator.
//
// Output i of a stream keyed by k is mix64(k + i * 0x9E3779B97F4A7C15), i.e.
// SplitMix64 evaluated at an explicit counter. Child streams are keyed by
// derive_seed(parent_seed, stream_index), so trial i of a Monte Carlo run
// gets the same numbers no matter which worker executes it or in what order.
//
// All derived quantities (uniform doubles, bounded integers, exponentials)
// are implemented here rather than through <random> distributions, whose
// output is not specified across standard library implementations.

#include <cmath>
#include <cstdint>

namespace halluc {

__extension__ using u128 = unsigned __int128;

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of child stream `stream` under `parent`. Distinct (parent, stream)
/// pairs give statistically independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::uint64_t stream) noexcept {
  return mix64(mix64(parent ^ 0x6A09E667F3BCC909ULL) +
               mix64(stream + kGoldenGamma));
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Rng(std::uint64_t seed) noexcept
      : seed_(seed), key_(mix64(seed ^ 0xD1B54A32D192ED03ULL)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    return mix64(key_ + (++counter_) * kGoldenGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  constexpr double uniform_open_left() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n > 0. Lemire's multiply-shift with rejection.
  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    u128 m = static_cast<u128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<u128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform integer in [lo, hi].
  constexpr std::uint64_t between(std::uint64_t lo, std::uint64_t hi) noexcept {
    return lo + below(hi - lo + 1);
  }

  double exponential() noexcept { return -std::log(uniform_open_left()); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  constexpr Rng split(std::uint64_t stream) const noexcept {
    return Rng(derive_seed(seed_, stream));
  }

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace halluc
