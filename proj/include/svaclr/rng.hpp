#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "svaclr/errors.hpp"

namespace svaclr {

// splitmix64 step; used to expand seeds and to derive independent streams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic stream derivation: every consumer of randomness owns an Rng
// seeded by mix_seed(base_seed, stream_tag, index). Workers generating clip i
// or batch b get identical draws whether they run sequentially or in
// parallel, which is what makes thread-count independence possible.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index = 0) {
  std::uint64_t s = seed;
  s = splitmix64_next(s) ^ (stream + 0x9e3779b97f4a7c15ull);
  s = splitmix64_next(s) ^ (index + 0xbf58476d1ce4e5b9ull);
  return splitmix64_next(s);
}

// xoshiro256** with splitmix64 seed expansion. The raw 64-bit stream is a
// pure function of the seed (integer arithmetic only), identical on every
// platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64_next(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

  // [0, 1), 53-bit resolution.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw DomainError("rng_uniform: requires lo < hi");
    return lo + unit() * (hi - lo);
  }

  // Unbiased integer in [0, n) via bitmask rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw DomainError("rng_uniform_int: n must be >= 1");
    const std::uint64_t mask = std::bit_ceil(n) - 1;
    for (;;) {
      const std::uint64_t v = next_u64() & mask;
      if (v < n) return v;
    }
  }

  // Box-Muller from two uniforms (cosine branch). u1 in (0,1] keeps the log
  // finite.
  double normal() {
    const double u1 =
        static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

// Stream tags for mix_seed. Centralised so the fork schedule is auditable.
namespace rng_stream {
inline constexpr std::uint64_t dataset_pattern = 1;
inline constexpr std::uint64_t dataset_clip = 2;
inline constexpr std::uint64_t model_init = 3;
inline constexpr std::uint64_t shuffle = 4;
inline constexpr std::uint64_t batch_speed = 5;
inline constexpr std::uint64_t view_offsets = 6;
inline constexpr std::uint64_t affinity_views = 7;
}  // namespace rng_stream

}  // namespace svaclr
