#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace lprobe {

/// SplitMix64 (Steele, Lea & Flood 2014): a 64-bit counter-based generator.
/// The state is a Weyl counter advanced by 0x9E3779B97F4A7C15; each output is
/// the counter passed through the finalizer in `mix64`. Every random decision
/// in the toolkit goes through this class so that seeded runs reproduce
/// bit-for-bit on any platform. Floating-point and integer draws are defined
/// below in terms of `next()` only.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1): top 53 bits scaled by 2^-53.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound) by 128-bit multiply-shift. bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  /// Standard normal by Box-Muller; consumes two draws per call (no caching).
  double normal();

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t basis = 0xCBF29CE484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

/// Sub-seed for a named stage: mix64(seed ^ fnv1a64(name)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

}  // namespace lprobe
