#include "polyxport/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polyxport {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index));
}

double Rng::exponential(double rate) { return -std::log(uniform_pos()) / rate; }

double Rng::normal() {
  const double u = uniform_pos();
  const double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do x = engine_();
  while (x >= limit);
  return x % n;
}

Vec Rng::unit_vector(int dim) {
  const double phi = 2.0 * std::numbers::pi * uniform();
  if (dim == 2) return Vec{std::cos(phi), std::sin(phi)};
  if (dim == 3) {
    const double z = 2.0 * uniform() - 1.0;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec{z, rho * std::cos(phi), rho * std::sin(phi)};
  }
  throw std::invalid_argument("Rng::unit_vector: dimension must be 2 or 3");
}

Vec Rng::in_ball(int dim) {
  if (dim == 1) {
    double x;
    do x = 2.0 * uniform() - 1.0;
    while (x == -1.0);
    return Vec{x};
  }
  if (dim == 2) {
    const double rho = std::sqrt(uniform());
    const double phi = 2.0 * std::numbers::pi * uniform();
    return Vec{rho * std::cos(phi), rho * std::sin(phi)};
  }
  throw std::invalid_argument("Rng::in_ball: dimension must be 1 or 2");
}

}  // namespace polyxport
