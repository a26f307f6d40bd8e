#pragma once

#include <cstdint>
#include <random>

namespace matchtu {

// Identity of the random stream, recorded in experiment manifests so runs can
// be reproduced elsewhere: std::mt19937_64 (output sequence pinned by the
// C++ standard) mapped to [0,1) doubles via the top 53 bits.
inline constexpr const char* kGeneratorName = "mt19937_64-u53";

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 significant bits.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

 private:
  std::mt19937_64 engine_;
};

// Stateless substream derivation (one splitmix64 scramble), used for
// per-repetition and per-combination seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace matchtu
