#pragma once

#include <array>
#include <cstdint>

namespace wran {

// xoshiro256** seeded through splitmix64. Every random draw in the library
// goes through this generator and the helpers below so that a seed pins the
// exact bit pattern of generated data and initial weights on every platform.
//
//   splitmix64:  z = (s += 0x9E3779B97F4A7C15);
//                z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//                z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//                return z ^ (z >> 31);
//   state[i] = splitmix64() for i = 0..3
//
//   uniform()      = (next() >> 11) * 2^-53                  in [0, 1)
//   below(n)       = Lemire multiply-shift with rejection     in [0, n)
//   normal()       = Box-Muller on two uniform() draws, cosine branch only
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream; used to give each subsystem its own sequence.
  Rng fork(std::uint64_t salt);

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace wran
