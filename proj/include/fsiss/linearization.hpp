#pragma once

/**
 * @file linearization.hpp
 * @brief Origin linearization and spectral radius of expression systems.
 *
 * For a linear update map the columns of A are recovered exactly by
 * evaluating G on the basis vectors; the sampled residual tells how linear
 * the system actually is.
 */

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <vector>

#include "fsiss/common.hpp"
#include "fsiss/sampling.hpp"
#include "fsiss/system_model.hpp"

namespace fsiss {

struct LinearizationReport {
  bool linear = false;
  double max_residual = 0.0;  // relative, over the probe cloud
  std::vector<std::vector<double>> a;
  double spectral_radius = 0.0;
};

inline LinearizationReport linearize_at_origin(const SystemModel& sys,
                                               const CloudConfig& cfg) {
  const int n = sys.n();
  LinearizationReport rep;
  rep.a.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));

  const std::vector<double> zu(static_cast<size_t>(std::max(sys.m(), 0)), 0.0);
  std::vector<double> e(static_cast<size_t>(n), 0.0);
  Eigen::MatrixXd A(n, n);
  for (int j = 0; j < n; ++j) {
    e.assign(static_cast<size_t>(n), 0.0);
    e[static_cast<size_t>(j)] = 1.0;
    const auto col = sys.step(e, zu);
    for (int i = 0; i < n; ++i) {
      rep.a[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          col[static_cast<size_t>(i)];
      A(i, j) = col[static_cast<size_t>(i)];
    }
  }

  const auto probes = state_cloud(
      n, Norm::Inf, cfg.with_samples(std::min<std::size_t>(cfg.samples, 2000)));
  double worst = 0.0;
  for (const auto& x : probes) {
    const auto gx = sys.step(x, zu);
    double scale = 1.0, diff = 0.0;
    for (int i = 0; i < n; ++i) {
      double ax = 0.0;
      for (int j = 0; j < n; ++j)
        ax += rep.a[static_cast<size_t>(i)][static_cast<size_t>(j)] *
              x[static_cast<size_t>(j)];
      diff = std::max(diff, std::abs(gx[static_cast<size_t>(i)] - ax));
      scale = std::max(scale, std::abs(ax));
    }
    worst = std::max(worst, diff / scale);
  }
  rep.max_residual = worst;
  rep.linear = worst <= 1e-9;

  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(A, false)
                                  .eigenvalues();
  for (int i = 0; i < ev.size(); ++i)
    rep.spectral_radius = std::max(rep.spectral_radius, std::abs(ev(i)));
  return rep;
}

}  // namespace fsiss
