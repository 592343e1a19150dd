#pragma once

#include <array>
#include <cstdint>

namespace tpp {

// Marsaglia xorshift128. One stream per output column, seeded from
// seed ^ column so column-parallel evaluation stays deterministic.
struct PrngState {
  std::array<std::uint32_t, 4> s{};
  std::uint64_t seed = 0;

  static PrngState for_stream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint32_t next() noexcept {
    std::uint32_t t = s[0] ^ (s[0] << 11);
    s[0] = s[1];
    s[1] = s[2];
    s[2] = s[3];
    s[3] = s[3] ^ (s[3] >> 19) ^ t ^ (t >> 8);
    return s[3];
  }

  // Uniform in [0, 1) with 24 random bits, exact in FP32.
  float uniform() noexcept { return static_cast<float>(next() >> 8) * 0x1.0p-24f; }
};

}  // namespace tpp
