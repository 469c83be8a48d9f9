#pragma once

/**
 * @file sampling.hpp
 * @brief Seeded sample clouds over state space.
 *
 * Clouds combine a deterministic prefix (coordinate axes, sign corners for
 * small dimensions, all-ones rays, each at a log-spaced radius ladder) with
 * log-uniform random fill. Axes and corners are where gain and norm fits
 * fail first, so they are always present regardless of the seed.
 */

#include <cstdint>
#include <vector>

#include "fsiss/common.hpp"
#include "fsiss/rng.hpp"

namespace fsiss {

struct CloudConfig {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  double radius_min = 1e-3;
  double radius_max = 1e3;
  double input_bound = 1.0;
  double inflation = Defaults::inflation;  // eta on fitted bounds

  CloudConfig with_seed(std::uint64_t s) const {
    CloudConfig c = *this;
    c.seed = s;
    return c;
  }
  CloudConfig with_samples(std::size_t n) const {
    CloudConfig c = *this;
    c.samples = n;
    return c;
  }
};

namespace detail {

inline void push_scaled(std::vector<std::vector<double>>& out,
                        const std::vector<double>& dir, double r,
                        std::size_t cap) {
  if (out.size() >= cap) return;
  std::vector<double> p(dir.size());
  for (size_t i = 0; i < dir.size(); ++i) p[i] = dir[i] * r;
  out.push_back(std::move(p));
}

}  // namespace detail

/// Deterministic prefix shared by all state clouds.
inline std::vector<std::vector<double>> cloud_prefix(int n, Norm norm,
                                                     const CloudConfig& cfg) {
  std::vector<std::vector<double>> pts;
  const std::size_t cap = cfg.samples;
  const auto ladder = logspace(cfg.radius_min, cfg.radius_max, 8);

  std::vector<double> dir(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    dir.assign(static_cast<size_t>(n), 0.0);
    dir[static_cast<size_t>(i)] = 1.0;
    for (double r : ladder) {
      detail::push_scaled(pts, dir, r, cap);
      dir[static_cast<size_t>(i)] = -1.0;
      detail::push_scaled(pts, dir, r, cap);
      dir[static_cast<size_t>(i)] = 1.0;
    }
  }

  if (n >= 2 && n <= 10) {
    const std::size_t corners = std::size_t{1} << n;
    std::size_t rungs = std::max<std::size_t>(1, cap / (4 * corners));
    rungs = std::min<std::size_t>(rungs, ladder.size());
    for (std::size_t c = 0; c < corners; ++c) {
      std::vector<double> d(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i)
        d[static_cast<size_t>(i)] = (c >> i) & 1 ? -1.0 : 1.0;
      const double s = vec_norm(d, norm);
      for (auto& x : d) x /= s;
      for (std::size_t k = 0; k < rungs; ++k)
        detail::push_scaled(pts, d, ladder[ladder.size() - 1 - k], cap);
    }
  } else if (n > 10) {
    std::vector<double> ones(static_cast<size_t>(n), 1.0);
    const double s = vec_norm(ones, norm);
    for (auto& x : ones) x /= s;
    for (double r : ladder) {
      detail::push_scaled(pts, ones, r, cap);
      for (auto& x : ones) x = -x;
      detail::push_scaled(pts, ones, r, cap);
      for (auto& x : ones) x = -x;
    }
  }
  return pts;
}

/// Full state cloud: deterministic prefix + random directions with
/// log-uniform radii, cfg.samples points in total.
inline std::vector<std::vector<double>> state_cloud(int n, Norm norm,
                                                    const CloudConfig& cfg) {
  auto pts = cloud_prefix(n, norm, cfg);
  Rng rng(cfg.seed);
  while (pts.size() < cfg.samples) {
    auto d = sphere_direction(rng, n, norm);
    const double r = rng.log_uniform(cfg.radius_min, cfg.radius_max);
    for (auto& x : d) x *= r;
    pts.push_back(std::move(d));
  }
  return pts;
}

/// Cloud on the nonnegative orthant (for gain-operator checks): indicator
/// corners and axes, then random orthant directions.
inline std::vector<std::vector<double>> orthant_cloud(int n,
                                                      const CloudConfig& cfg) {
  std::vector<std::vector<double>> pts;
  const std::size_t cap = cfg.samples;
  const auto ladder = logspace(cfg.radius_min, cfg.radius_max, 8);

  if (n <= 10) {
    const std::size_t masks = (std::size_t{1} << n) - 1;
    for (std::size_t m = 1; m <= masks; ++m) {
      std::vector<double> d(static_cast<size_t>(n), 0.0);
      for (int i = 0; i < n; ++i)
        if ((m >> i) & 1) d[static_cast<size_t>(i)] = 1.0;
      for (double r : ladder) detail::push_scaled(pts, d, r, cap);
      if (pts.size() >= cap) break;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      std::vector<double> d(static_cast<size_t>(n), 0.0);
      d[static_cast<size_t>(i)] = 1.0;
      for (double r : ladder) detail::push_scaled(pts, d, r, cap);
    }
    std::vector<double> ones(static_cast<size_t>(n), 1.0);
    for (double r : ladder) detail::push_scaled(pts, ones, r, cap);
  }

  Rng rng(cfg.seed);
  while (pts.size() < cfg.samples) {
    auto d = orthant_direction(rng, n);
    const double r = rng.log_uniform(cfg.radius_min, cfg.radius_max);
    for (auto& x : d) x *= r;
    pts.push_back(std::move(d));
  }
  return pts;
}

}  // namespace fsiss
