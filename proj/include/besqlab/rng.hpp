#pragma once

#include <cstdint>
#include <random>

namespace besqlab {

using Rng = std::mt19937_64;

/// Seeds an independent child generator from one draw of the parent. The
/// draw is passed through the splitmix64 finalizer so that children of
/// consecutive parent states do not start from related seeds.
inline Rng spawn(Rng& parent) {
  std::uint64_t z = parent() + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return Rng(z ^ (z >> 31));
}

/// Generator for stream `index` of a seeded family; streams are unrelated.
inline Rng stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
  return Rng(seq);
}

}  // namespace besqlab
