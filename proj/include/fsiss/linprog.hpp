#pragma once

/**
 * @file linprog.hpp
 * @brief Dense two-phase simplex for small covering programs.
 *
 * Solves   minimize c.x   subject to   A x >= b,  x >= 0
 * with a handful of variables and up to a few hundred active rows. For the
 * sample-cloud fits (1e5+ rows, <= 13 variables) solve_cover_large() runs a
 * cutting-plane loop: solve on an active subset, add the worst violated rows,
 * repeat until the subset optimum is feasible for every row.
 *
 * Bland's rule everywhere, so the pivoting is deterministic and cycle-free.
 */

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fsiss/common.hpp"

namespace fsiss {

struct LpSolution {
  bool feasible = false;
  std::vector<double> x;
  double objective = 0.0;
};

/// Row-major constraint storage for large clouds.
struct DenseRows {
  int ncols = 0;
  std::vector<double> data;  // rows.size = nrows * ncols
  std::vector<double> rhs;

  size_t rows() const { return rhs.size(); }
  std::span<const double> row(size_t i) const {
    return {data.data() + i * static_cast<size_t>(ncols),
            static_cast<size_t>(ncols)};
  }
  void push(std::span<const double> a, double b) {
    data.insert(data.end(), a.begin(), a.end());
    rhs.push_back(b);
  }
};

namespace detail {

constexpr double kLpEps = 1e-11;

class SimplexTableau {
 public:
  // A x >= b with b >= 0; columns: [structural | surplus | artificial | rhs].
  SimplexTableau(const std::vector<std::span<const double>>& rowsA,
                 const std::vector<double>& b, const std::vector<double>& c)
      : m_(rowsA.size()), n_(c.size()), cost_(c) {
    width_ = n_ + 2 * m_ + 1;
    t_.assign(m_ + 1, std::vector<double>(width_, 0.0));
    basis_.resize(m_);
    for (size_t i = 0; i < m_; ++i) {
      if (b[i] < 0.0) throw RangeError("cover LP expects nonnegative rhs");
      for (size_t j = 0; j < n_; ++j) t_[i][j] = rowsA[i][j];
      t_[i][n_ + i] = -1.0;       // surplus
      t_[i][n_ + m_ + i] = 1.0;   // artificial
      t_[i][width_ - 1] = b[i];
      basis_[i] = n_ + m_ + i;
    }
  }

  LpSolution solve() {
    // Phase 1: minimize the artificial sum.
    auto& z = t_[m_];
    std::fill(z.begin(), z.end(), 0.0);
    for (size_t j = n_ + m_; j < n_ + 2 * m_; ++j) z[j] = 1.0;
    for (size_t i = 0; i < m_; ++i) sub_row(z, t_[i], 1.0);
    run(/*allow_artificial=*/true);
    if (z[width_ - 1] < -1e-7) return {};  // infeasible
    drive_out_artificials();

    // Phase 2: original objective.
    std::fill(z.begin(), z.end(), 0.0);
    for (size_t j = 0; j < n_; ++j) z[j] = cost_[j];
    for (size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) sub_row(z, t_[i], cost_[basis_[i]]);
    run(/*allow_artificial=*/false);

    LpSolution s;
    s.feasible = true;
    s.x.assign(n_, 0.0);
    for (size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) s.x[basis_[i]] = t_[i][width_ - 1];
    s.objective = 0.0;
    for (size_t j = 0; j < n_; ++j) s.objective += cost_[j] * s.x[j];
    return s;
  }

 private:
  static void sub_row(std::vector<double>& dst, const std::vector<double>& src,
                      double f) {
    if (f == 0.0) return;
    for (size_t j = 0; j < dst.size(); ++j) dst[j] -= f * src[j];
  }

  void pivot(size_t pr, size_t pc) {
    auto& row = t_[pr];
    const double p = row[pc];
    for (auto& v : row) v /= p;
    for (size_t i = 0; i <= m_; ++i) {
      if (i == pr) continue;
      sub_row(t_[i], row, t_[i][pc]);
      t_[i][pc] = 0.0;   // cancel exactly
    }
    basis_[pr] = pc;
  }

  size_t ratio_row(size_t pc) const {
    size_t pr = m_;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < m_; ++i) {
      if (t_[i][pc] > 1e-9) {
        const double r = t_[i][width_ - 1] / t_[i][pc];
        if (r < best - kLpEps ||
            (r < best + kLpEps && (pr == m_ || basis_[i] < basis_[pr]))) {
          best = r;
          pr = i;
        }
      }
    }
    return pr;
  }

  void run(bool allow_artificial) {
    // Covering programs (c >= 0, x >= 0) are never unbounded, so a negative
    // reduced cost without an admissible pivot row is numerical degeneracy:
    // skip that column instead of reporting unboundedness.
    const size_t ncols = allow_artificial ? n_ + 2 * m_ : n_ + m_;
    auto& z = t_[m_];
    for (size_t iter = 0; iter < 100000; ++iter) {
      size_t pc = width_, pr = m_;
      for (size_t j = 0; j < ncols; ++j) {
        if (z[j] < -1e-9) {
          const size_t cand = ratio_row(j);
          if (cand == m_) continue;
          pc = j;
          pr = cand;
          break;
        }
      }
      if (pc == width_) return;  // optimal (or numerically stalled)
      pivot(pr, pc);
    }
    throw ConvergenceError("simplex iteration cap exceeded");
  }

  void drive_out_articial_row(size_t i) {
    for (size_t j = 0; j < n_ + m_; ++j) {
      if (std::abs(t_[i][j]) > kLpEps) {
        pivot(i, j);
        return;
      }
    }
    // redundant all-zero row: harmless, artificial stays basic at level 0
  }

  void drive_out_artificials() {
    for (size_t i = 0; i < m_; ++i)
      if (basis_[i] >= n_ + m_) drive_out_articial_row(i);
  }

  size_t m_, n_, width_;
  std::vector<double> cost_;
  std::vector<std::vector<double>> t_;
  std::vector<size_t> basis_;
};

}  // namespace detail

inline LpSolution solve_cover(const std::vector<std::vector<double>>& A,
                              const std::vector<double>& b,
                              const std::vector<double>& c) {
  std::vector<std::span<const double>> rows;
  rows.reserve(A.size());
  for (const auto& r : A) rows.emplace_back(r.data(), r.size());
  detail::SimplexTableau tab(rows, b, c);
  return tab.solve();
}

/// Cutting-plane solve over a large row set. Rows are scaled per-row by their
/// largest coefficient before entering the tableau; the returned x is exact
/// for the original scaling.
inline LpSolution solve_cover_large(const DenseRows& rows,
                                    const std::vector<double>& c,
                                    int max_rounds = 200) {
  const int n = rows.ncols;
  std::vector<std::vector<double>> act_A;
  std::vector<double> act_b;
  std::vector<size_t> act_idx;

  auto add_row = [&](size_t i) -> bool {
    for (size_t k : act_idx)
      if (k == i) return false;
    auto r = rows.row(i);
    double scale = rows.rhs[i];
    for (double v : r) scale = std::max(scale, std::abs(v));
    if (scale <= 0.0) return false;
    std::vector<double> a(r.begin(), r.end());
    for (auto& v : a) v /= scale;
    act_A.push_back(std::move(a));
    act_b.push_back(rows.rhs[i] / scale);
    act_idx.push_back(i);
    return true;
  };

  // Seed: per variable the row with the largest rhs-to-coefficient demand.
  for (int j = 0; j < n; ++j) {
    size_t best = rows.rows();
    double best_v = 0.0;
    for (size_t i = 0; i < rows.rows(); ++i) {
      const double aj = rows.row(i)[static_cast<size_t>(j)];
      if (aj > detail::kLpEps) {
        const double v = rows.rhs[i] / aj;
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
    }
    if (best < rows.rows()) add_row(best);
  }
  if (act_idx.empty()) {
    LpSolution s;
    s.feasible = true;
    s.x.assign(static_cast<size_t>(n), 0.0);
    return s;
  }

  // violations below the solver's working precision do not count; fitted
  // coefficients are inflated by (1+eta) afterwards anyway
  const double kViolTol = 1e-9;
  LpSolution sol;
  for (int round = 0; round < max_rounds; ++round) {
    sol = solve_cover(act_A, act_b, c);
    if (!sol.feasible) return sol;

    std::vector<std::pair<double, size_t>> viol;
    for (size_t i = 0; i < rows.rows(); ++i) {
      auto r = rows.row(i);
      double lhs = 0.0;
      for (int j = 0; j < n; ++j)
        lhs += sol.x[static_cast<size_t>(j)] * r[static_cast<size_t>(j)];
      const double scale = std::max(1.0, rows.rhs[i]);
      const double gap = (rows.rhs[i] - lhs) / scale;
      if (gap > kViolTol) viol.emplace_back(gap, i);
    }
    if (viol.empty()) return sol;
    std::sort(viol.begin(), viol.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    size_t added = 0;
    const size_t take = std::min<size_t>(viol.size(), 8);
    for (size_t k = 0; k < take; ++k) added += add_row(viol[k].second) ? 1 : 0;
    if (added == 0) return sol;  // residuals at solver precision only
  }
  throw ConvergenceError("cutting-plane rounds exhausted");
}

}  // namespace fsiss
