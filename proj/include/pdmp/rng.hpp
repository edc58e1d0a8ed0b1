#pragma once

// Seedable, splittable random streams.
//
// Every stochastic component draws from its own Rng. Streams are derived from
// a master seed and an integer stream id with SplitMix64 mixing, so
//   derive_seed(seed, id)
// is a pure function and any stream can be re-created without touching the
// others. The engine uses stream id j for mechanism j (0-based) and id
// `mechanism_count` for the initial-state draw; replica r of an experiment
// runs with seed derive_seed(master, mechanism_count + r).

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace pdmp {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
  return splitmix64(seed ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL));
}

inline constexpr std::uint64_t replica_seed(std::uint64_t master, std::size_t mechanism_count,
                                            std::size_t replica) {
  return derive_seed(master, mechanism_count + replica);
}

// xoshiro256++ with convenience draws. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& word : state_) {
      z += 0x9e3779b97f4a7c15ULL;
      word = splitmix64(z);
    }
    normal_.reset();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open_left() { return 1.0 - uniform(); }

  // Standard exponential, strictly positive.
  double exponential() { return -std::log(uniform_open_left()); }

  double normal() { return normal_(*this); }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
  std::normal_distribution<double> normal_;
};

}  // namespace pdmp
