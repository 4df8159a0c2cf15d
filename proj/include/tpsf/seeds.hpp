#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>

namespace tpsf {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a sequence of 64-bit words, used to derive
/// independent RNG seeds from (master seed, scenario, ratio, index, ...).
inline constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC908ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline std::uint64_t seed_word(double v) noexcept { return std::bit_cast<std::uint64_t>(v); }

}  // namespace tpsf
