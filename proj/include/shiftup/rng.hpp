#pragma once

#include <cstdint>
#include <limits>

namespace shiftup {

// SplitMix64 (Steele, Lea, Flood 2014). Portable and bit-identical everywhere.
//
// Stream derivation: stream(seed, index) starts from mix64(seed ^ mix64(index + golden)),
// so every (seed, call index) pair gets its own independent generator and results
// never depend on how many numbers earlier calls consumed.
inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

constexpr SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
  return SplitMix64(mix64(seed ^ mix64(index + kGoldenGamma)));
}

// Seed for trial `trial` of a run seeded with `seed`; both simulation modes use it.
constexpr std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return mix64(seed + kGoldenGamma * (trial + 1));
}

}  // namespace shiftup
