#pragma once

// Every random draw in the library goes through Rng so that results are
// bit-identical across platforms: the engine is std::mt19937_64 (its output
// sequence is fixed by the standard), while the distributions below are
// hand-written because std:: distributions are implementation-defined.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace stratify {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for an independent stream, e.g. one per k-means restart.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

namespace streams {
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kKMeans = 2;
inline constexpr std::uint64_t kPerturb = 3;
inline constexpr std::uint64_t kBootstrap = 4;
inline constexpr std::uint64_t kSynth = 5;
}  // namespace streams

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in the half-open interval [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % n;
    }
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stratify
