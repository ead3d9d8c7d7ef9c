#pragma once

#include <cmath>
#include <cstdint>

namespace ogmd {

/// Advances a splitmix64 state and returns the next output word.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic, platform-independent RNG. std::* distributions are
/// implementation-defined, so all sampling goes through this class to keep
/// trajectories byte-identical across toolchains.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

  /// Uniform integer in [0, n). n is small everywhere this is used, so the
  /// modulo bias (< 2^-53) is irrelevant next to determinism.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via the Marsaglia polar method (second value discarded).
  double normal() {
    double u, v, s;
    do {
      u = 2.0 * next_u01() - 1.0;
      v = 2.0 * next_u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t tag) {
  h ^= tag + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return splitmix64_next(h);
}

/// Counter-based substream derivation: the stream for (player, round) depends
/// only on the three integers, never on call order, so per-player draws are
/// reproducible under any execution schedule.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t player,
                                    std::uint64_t round) {
  return hash_combine(hash_combine(seed, player), round);
}

/// Human-readable derivation rule, recorded in run manifests.
inline const char* rng_description() {
  return "splitmix64; substream(player,round) = "
         "splitmix64(hash_combine(splitmix64(hash_combine(seed, player)), round))";
}

}  // namespace ogmd
