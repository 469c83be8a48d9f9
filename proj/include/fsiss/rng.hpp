#pragma once

/**
 * @file rng.hpp
 * @brief Seeded sampling primitives with a pinned algorithm.
 *
 * Everything that samples is driven by std::mt19937_64; uniforms take the top
 * 53 bits of the raw draw, normals come from Box-Muller on those uniforms.
 * Identical seeds therefore reproduce identical clouds run-to-run.
 */

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "fsiss/common.hpp"

namespace fsiss {

/// splitmix64, used to derive independent per-index substream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1), 53-bit resolution.
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * unit(); }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  int below(int n) { return static_cast<int>(unit() * n) % n; }

  double sign() { return unit() < 0.5 ? -1.0 : 1.0; }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Direction with unit length in the given norm.
inline std::vector<double> sphere_direction(Rng& rng, int n, Norm norm) {
  std::vector<double> d(static_cast<size_t>(n));
  switch (norm) {
    case Norm::Two: {
      double s = 0.0;
      for (auto& x : d) {
        x = rng.normal();
        s += x * x;
      }
      s = std::sqrt(s);
      if (s == 0.0) {
        d[0] = 1.0;
        break;
      }
      for (auto& x : d) x /= s;
      break;
    }
    case Norm::One: {
      // exponential spacings give the uniform simplex, then random signs
      double s = 0.0;
      for (auto& x : d) {
        double u = rng.unit();
        while (u <= 0.0) u = rng.unit();
        x = -std::log(u);
        s += x;
      }
      for (auto& x : d) x = rng.sign() * (x / s);
      break;
    }
    case Norm::Inf: {
      const int pivot = rng.below(n);
      for (int i = 0; i < n; ++i)
        d[static_cast<size_t>(i)] =
            (i == pivot) ? rng.sign() : rng.uniform(-1.0, 1.0);
      break;
    }
  }
  return d;
}

/// Random sign-corner direction, scaled to unit norm.
inline std::vector<double> corner_direction(Rng& rng, int n, Norm norm) {
  std::vector<double> d(static_cast<size_t>(n));
  for (auto& x : d) x = rng.sign();
  const double s = vec_norm(d, norm);
  for (auto& x : d) x /= s;
  return d;
}

/// Direction in the nonnegative orthant (2-norm unit length).
inline std::vector<double> orthant_direction(Rng& rng, int n) {
  auto d = sphere_direction(rng, n, Norm::Two);
  for (auto& x : d) x = std::abs(x);
  double s = vec_norm(d, Norm::Two);
  if (s == 0.0) {
    d[0] = 1.0;
    s = 1.0;
  }
  for (auto& x : d) x /= s;
  return d;
}

}  // namespace fsiss
