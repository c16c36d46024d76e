#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "crs/constants.hpp"

namespace crs {

// Seeded random source. All distributions are hand-rolled on top of
// mt19937_64 so that draws are bit-identical across standard libraries;
// std::*_distribution makes no such guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cos branch only; consumes two uniforms).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) *
           std::cos(2.0 * constants::pi * u2);
  }

  // CN(0,1): unit-variance circularly symmetric complex Gaussian.
  std::complex<double> complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
  }

  // Exp(1) via inverse CDF.
  double exponential() { return -std::log(1.0 - uniform()); }

  std::uint64_t seed() const { return seed_; }

  // Independent child stream; splitmix64 over (seed, stream) decorrelates
  // sibling streams derived from the same root.
  Rng derive(std::uint64_t stream) const {
    std::uint64_t x = seed_ + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    x = x ^ (x >> 31);
    return Rng(x);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace crs
