#include <doctest.h>

#include <vector>

#include "fsiss/linprog.hpp"
#include "fsiss/rng.hpp"

using namespace fsiss;

TEST_CASE("simplex: known covering solutions") {
  auto sol = solve_cover({{1, 0}, {0, 1}, {1, 1}}, {1.3, 1.0, 2.3}, {1, 1});
  REQUIRE(sol.feasible);
  CHECK(sol.x[0] == doctest::Approx(1.3).epsilon(1e-9));
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-9));

  sol = solve_cover({{2, 0}}, {3}, {1, 1});
  REQUIRE(sol.feasible);
  CHECK(sol.objective == doctest::Approx(1.5));

  sol = solve_cover({{1, 1}}, {0}, {1, 1});
  REQUIRE(sol.feasible);
  CHECK(sol.objective == doctest::Approx(0.0));

  // redundant duplicated rows
  sol = solve_cover({{1, 1}, {1, 1}, {1, 1}}, {2, 2, 2}, {1, 1});
  REQUIRE(sol.feasible);
  CHECK(sol.objective == doctest::Approx(2.0));
}

// brute-force 2-variable reference: scan vertices (constraint intersections
// and single-constraint axis crossings)
static double brute_force_2var(const std::vector<std::vector<double>>& A,
                               const std::vector<double>& b,
                               const std::vector<double>& c) {
  const size_t m = A.size();
  std::vector<std::pair<double, double>> cand;
  cand.emplace_back(0.0, 0.0);
  for (size_t i = 0; i < m; ++i) {
    if (A[i][0] > 1e-12) cand.emplace_back(b[i] / A[i][0], 0.0);
    if (A[i][1] > 1e-12) cand.emplace_back(0.0, b[i] / A[i][1]);
    for (size_t j = i + 1; j < m; ++j) {
      const double det = A[i][0] * A[j][1] - A[i][1] * A[j][0];
      if (std::abs(det) < 1e-12) continue;
      const double x = (b[i] * A[j][1] - b[j] * A[i][1]) / det;
      const double y = (A[i][0] * b[j] - A[j][0] * b[i]) / det;
      cand.emplace_back(x, y);
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (auto [x, y] : cand) {
    if (x < -1e-9 || y < -1e-9) continue;
    bool ok = true;
    for (size_t i = 0; i < m; ++i)
      ok &= A[i][0] * x + A[i][1] * y >= b[i] - 1e-9 * (1.0 + std::abs(b[i]));
    if (ok) best = std::min(best, c[0] * x + c[1] * y);
  }
  return best;
}

TEST_CASE("simplex: random 2-variable instances match vertex enumeration") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + rng.below(8);
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (int i = 0; i < m; ++i) {
      // keep at least one coefficient bounded away from zero
      double a0 = rng.unit() < 0.2 ? 0.0 : rng.log_uniform(0.05, 10.0);
      double a1 = rng.unit() < 0.2 ? 0.0 : rng.log_uniform(0.05, 10.0);
      if (a0 == 0.0 && a1 == 0.0) a0 = 1.0;
      A.push_back({a0, a1});
      b.push_back(rng.log_uniform(0.01, 100.0));
    }
    const std::vector<double> c = {1.0, 1.0};
    const auto sol = solve_cover(A, b, c);
    REQUIRE(sol.feasible);
    const double ref = brute_force_2var(A, b, c);
    CHECK(sol.objective == doctest::Approx(ref).epsilon(1e-7));
    for (size_t i = 0; i < A.size(); ++i)
      CHECK(A[i][0] * sol.x[0] + A[i][1] * sol.x[1] >=
            b[i] - 1e-7 * (1.0 + b[i]));
  }
}

TEST_CASE("cutting-plane wrapper agrees with the direct solve") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + rng.below(4);
    const size_t m = 300;  // small enough for the direct reference solve
    DenseRows rows;
    rows.ncols = n;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (size_t i = 0; i < m; ++i) {
      std::vector<double> a(static_cast<size_t>(n));
      for (auto& v : a) v = rng.unit() < 0.3 ? 0.0 : rng.log_uniform(0.01, 5.0);
      // a covering row needs some coefficient, as every zero-response row
      // is prefiltered in real use
      a[static_cast<size_t>(rng.below(n))] += rng.log_uniform(0.01, 5.0);
      const double bi = rng.log_uniform(0.01, 50.0);
      rows.push(a, bi);
      A.push_back(a);
      b.push_back(bi);
    }
    const std::vector<double> c(static_cast<size_t>(n), 1.0);
    const auto big = solve_cover_large(rows, c);
    REQUIRE(big.feasible);
    // feasibility over every row
    for (size_t i = 0; i < m; ++i) {
      double lhs = 0.0;
      for (int j = 0; j < n; ++j) lhs += big.x[static_cast<size_t>(j)] * A[i][static_cast<size_t>(j)];
      CHECK(lhs >= b[i] - 1e-7 * (1.0 + b[i]));
    }
    // the cutting-plane value is optimal (feasible and equal to a relaxation
    // bound), so no other feasible point may beat it; the one-shot dense
    // solve can stall at a worse vertex on degenerate instances
    const auto ref = solve_cover(A, b, c);
    REQUIRE(ref.feasible);
    CHECK(big.objective <= ref.objective * (1.0 + 1e-7));
  }
}
