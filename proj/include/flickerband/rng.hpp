#pragma once

// Seeded, splittable random source with fully specified output.
//
// std::*_distribution output is implementation-defined, so the uniform and
// normal transforms live here to keep synthesized data identical across
// standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace flickerband {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Maps 64 random bits to a double in [0, 1).
constexpr double bits_to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGamma;
    return mix64(state_);
  }

  /// Uniform in [0, 1).
  constexpr double uniform() noexcept { return bits_to_unit(next()); }

  /// Uniform in [lo, hi); returns lo exactly when lo == hi.
  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Independent child stream; the parent state is not advanced.
  constexpr Rng split(std::uint64_t stream) const noexcept {
    return Rng(hash_combine(state_, stream));
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Counter-based standard normal: the i-th draw of stream `key` without any
/// sequential state, so per-pixel noise can be generated in any order.
inline double counter_normal(std::uint64_t key, std::uint64_t counter) noexcept {
  const std::uint64_t base = key + 2 * counter * Rng::kGamma;
  const double u1 = 1.0 - bits_to_unit(mix64(base + Rng::kGamma));
  const double u2 = bits_to_unit(mix64(base + 2 * Rng::kGamma));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace flickerband
