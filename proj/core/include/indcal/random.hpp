#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace indcal {

// Seeded random source used everywhere randomness enters (forecast seeds r,
// data generation, minibatch shuffles).
//
// Seed splitting: child(stream) derives an independent generator from the
// parent's seed and a stream label through SplitMix64, never from the
// parent's state. Evaluation units that may run concurrently each take
// child(unit index), so serial and parallel runs draw identical numbers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng child(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9e37U))); }
  Rng child(std::string_view label) const;

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform_open();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stdev) { return mean + stdev * normal(); }
  std::uint64_t next_u64() { return engine_(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() noexcept { return engine_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace indcal
