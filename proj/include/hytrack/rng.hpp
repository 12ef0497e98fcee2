#pragma once

#include <cstdint>
#include <random>

namespace hytrack {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to derive independent streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named sub-streams so that adding draws to one stream never perturbs another.
enum class Stream : std::uint64_t {
  proposal = 1,
  oracle = 2,
  classifier_init = 3,
  sampling = 4,
  training = 5,
  augment = 6,
  simulate = 7,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(stream))));
}

inline double normal(Rng& rng, double mean, double stddev) {
  if (stddev <= 0.0) return mean;
  return std::normal_distribution<double>(mean, stddev)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace hytrack
