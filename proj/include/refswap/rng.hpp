#pragma once

// Platform-stable randomness. std::uniform_int_distribution is
// implementation-defined, so every seeded draw in the pipeline goes through
// these functions instead.

#include <cstdint>
#include <string_view>
#include <vector>

namespace refswap {

/// SplitMix64 (Steele, Lea & Flood). next() advances the state by the golden
/// gamma and returns the mixed value.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound). Rejects draws below 2^64 mod bound so the
  /// result is unbiased. bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

/// 64-bit FNV-1a over the bytes of s.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Per-instance seed: first SplitMix64 output seeded with
/// run_seed ^ fnv1a64(instance_id). A non-zero attempt is appended to the id
/// as "#<attempt>" so re-swaps draw independently.
std::uint64_t derive_instance_seed(std::uint64_t run_seed,
                                   std::string_view instance_id,
                                   unsigned attempt = 0);

/// Seeded Fisher-Yates prefix selection of n indices out of [0, population),
/// returned in ascending order.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n,
                                        std::uint64_t seed);

}  // namespace refswap
