#pragma once

#include <cstdint>
#include <random>

#include "polyxport/vec.hpp"

namespace polyxport {

std::uint64_t splitmix64(std::uint64_t x);

/// mt19937_64 engine with portable variate generation (no std distributions,
/// so streams are identical across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent substream keyed by (seed, stream, index).
  static Rng substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

  std::uint64_t bits() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double exponential(double rate);
  double normal();
  std::uint64_t below(std::uint64_t n);

  /// Uniform point of the unit sphere in R^dim.
  Vec unit_vector(int dim);
  /// Uniform point of the open unit ball in R^dim (dim = 1 or 2).
  Vec in_ball(int dim);

 private:
  std::mt19937_64 engine_;
};

}  // namespace polyxport
