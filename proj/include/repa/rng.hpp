#pragma once

#include <cstdint>
#include <random>

#include "repa/diffcore/tensor.hpp"

namespace repa {

// Seeded generator with platform-independent variates: the engine is the
// standard 64-bit Mersenne twister, and the uniform/normal transforms are
// fixed here so that streams match across standard library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  double normal();
  diffcore::Tensor normal(diffcore::Shape shape);
  std::uint64_t next() { return engine_(); }

  // Independent child stream derived from this generator's seed material.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace repa
