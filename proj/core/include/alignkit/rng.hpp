#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace alignkit {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, index), so values never depend on evaluation order.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t index) const noexcept {
    return mix(key_ + index * 0xd1b54a32d192ed03ULL);
  }
  /// Uniform in [0, 1).
  double uniform(std::uint64_t index) const noexcept {
    return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
  }
  double uniform(std::uint64_t index, double lo, double hi) const noexcept {
    return lo + (hi - lo) * uniform(index);
  }
  /// Standard normal via Box-Muller on two consecutive counters.
  double normal(std::uint64_t index) const noexcept {
    const double u1 = 1.0 - uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  /// +1 or -1 with equal probability.
  int sign(std::uint64_t index) const noexcept { return (bits(index) >> 63) ? 1 : -1; }

  /// Independent child stream.
  CounterRng child(std::uint64_t stream) const noexcept { return CounterRng(key_, stream); }

 private:
  // SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace alignkit
