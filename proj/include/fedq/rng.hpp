#pragma once

#include <cstdint>
#include <random>

namespace fedq {

/// SplitMix64 finalizer. Used for seed derivation only.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Order-sensitive mixing of a seed with a sequence of stream labels:
/// mix(seed) = splitmix64(seed) and
/// mix(seed, a, rest...) = mix(splitmix64(seed) ^ splitmix64(a + 0x632BE59BD9B4E019), rest...).
constexpr std::uint64_t mix_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t label, Rest... rest) {
  return mix_seed(splitmix64(seed) ^ splitmix64(label + 0x632BE59BD9B4E019ULL), rest...);
}

/// Random stream with a platform-independent double conversion. std::mt19937_64
/// is fully specified by the standard; the distributions in <random> are not,
/// so we only draw raw 64-bit words from it.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedq
