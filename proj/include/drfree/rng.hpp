#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace drfree {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// root seed so that every (seed, episode, step, candidate) tuple owns its
/// own generator and no RNG state is ever shared between workers.
constexpr std::uint64_t mix_seed(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix_seed(root);
  for (auto p : path) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags for derive_seed.
namespace stream {
inline constexpr std::uint64_t env_reset = 1;
inline constexpr std::uint64_t env_noise = 2;
inline constexpr std::uint64_t candidates = 3;
inline constexpr std::uint64_t monte_carlo = 4;
inline constexpr std::uint64_t selection = 5;
inline constexpr std::uint64_t training = 6;
inline constexpr std::uint64_t model_init = 7;
inline constexpr std::uint64_t warmup = 8;
}  // namespace stream

}  // namespace drfree
