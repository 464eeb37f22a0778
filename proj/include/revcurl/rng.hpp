#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace revcurl {

// Independent sub-streams are derived from one master seed by XOR with a
// fixed per-purpose constant.
enum class StreamPurpose : std::uint64_t {
  Environment = 0x9E3779B97F4A7C15ULL,
  ActionSampling = 0xBF58476D1CE4E5B9ULL,
  PolicyInit = 0x94D049BB133111EBULL,
  ValueInit = 0xD6E8FEB86659FD93ULL,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose) {
  return master ^ static_cast<std::uint64_t>(purpose);
}

// Seeded 64-bit Mersenne Twister with distribution code kept local so
// sequences do not depend on the standard library's distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Index drawn from a categorical distribution given by `probs`.
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double cumulative = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      cumulative += probs[i];
      if (u < cumulative) return i;
    }
    // Rounding left u above the accumulated mass: fall back to the last
    // action with non-zero probability.
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0.0) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace revcurl
