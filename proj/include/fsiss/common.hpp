#pragma once

/**
 * @file common.hpp
 * @brief Shared error types, tolerances, norms and block-partition helpers.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsiss {

inline constexpr const char* kVersion = "0.1.0";

/// Library-wide tolerances and probe-grid defaults. Strict inequalities are
/// certified with a relative margin; sampled suprema are inflated before use.
struct Defaults {
  static constexpr double strict_margin = 1e-9;
  static constexpr double invert_tol = 1e-10;
  static constexpr double funceq_tol = 1e-8;
  static constexpr double inflation = 0.02;
  static constexpr double unbounded_probe = 1e8;
  static constexpr double unbounded_floor = 1e4;
  static constexpr int class_grid_points = 256;
  static constexpr double class_grid_lo = 1e-8;
  static constexpr double class_grid_hi = 1e8;
  static constexpr int path_grid_points = 512;
  static constexpr double path_grid_lo = 1e-6;
  static constexpr double path_grid_hi = 1e6;
  static constexpr int omega_grid_points = 64;
  static constexpr double omega_grid_lo = 1e-4;
  static constexpr double omega_grid_hi = 1e4;
  static constexpr double drop_tol = 1e-9;
  static constexpr int cycle_enum_cap = 12;
  static constexpr double origin_tol = 1e-12;
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define FSISS_ERROR_TYPE(Name) \
  struct Name : Error {        \
    using Error::Error;        \
  }

FSISS_ERROR_TYPE(DomainError);        // argument outside the nonnegative domain
FSISS_ERROR_TYPE(ClassError);         // comparison-function class precondition
FSISS_ERROR_TYPE(RangeError);         // numeric parameter out of range
FSISS_ERROR_TYPE(PreconditionError);  // operation precondition violated
FSISS_ERROR_TYPE(ConvergenceError);   // iteration/bracketing failed to converge
FSISS_ERROR_TYPE(DimensionError);     // vector/blocks dimension mismatch
FSISS_ERROR_TYPE(ParseError);         // expression or file parse failure
FSISS_ERROR_TYPE(EvalError);          // runtime expression evaluation failure
FSISS_ERROR_TYPE(ConstructionError);  // certificate/path construction failed
FSISS_ERROR_TYPE(InfeasibleError);    // requested object cannot exist
FSISS_ERROR_TYPE(IoError);

#undef FSISS_ERROR_TYPE

enum class Norm { Inf, One, Two };

inline std::string to_string(Norm n) {
  switch (n) {
    case Norm::Inf: return "inf";
    case Norm::One: return "1";
    case Norm::Two: return "2";
  }
  return "inf";
}

inline Norm parse_norm(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF") return Norm::Inf;
  if (s == "1" || s == "one") return Norm::One;
  if (s == "2" || s == "two") return Norm::Two;
  throw ParseError("unknown norm '" + s + "' (expected inf, 1 or 2)");
}

inline double vec_norm(std::span<const double> v, Norm n) {
  double acc = 0.0;
  switch (n) {
    case Norm::Inf:
      for (double x : v) acc = std::max(acc, std::abs(x));
      return acc;
    case Norm::One:
      for (double x : v) acc += std::abs(x);
      return acc;
    case Norm::Two:
      for (double x : v) acc += x * x;
      return std::sqrt(acc);
  }
  return acc;
}

/// Smallest kappa with |x| <= kappa * max_i |x_i| over an N-block split
/// (p-norms: kappa = N^(1/p)).
inline double kappa_norm(Norm n, int blocks) {
  switch (n) {
    case Norm::Inf: return 1.0;
    case Norm::One: return static_cast<double>(blocks);
    case Norm::Two: return std::sqrt(static_cast<double>(blocks));
  }
  return 1.0;
}

inline void check_blocks(const std::vector<int>& blocks, int n) {
  if (blocks.empty()) throw DimensionError("empty block partition");
  int sum = 0;
  for (int b : blocks) {
    if (b <= 0) throw DimensionError("block sizes must be positive");
    sum += b;
  }
  if (sum != n)
    throw DimensionError("block sizes sum to " + std::to_string(sum) +
                         ", expected " + std::to_string(n));
}

inline std::vector<int> block_offsets(const std::vector<int>& blocks) {
  std::vector<int> off(blocks.size() + 1, 0);
  for (size_t i = 0; i < blocks.size(); ++i) off[i + 1] = off[i] + blocks[i];
  return off;
}

inline std::span<const double> block_span(std::span<const double> x,
                                          const std::vector<int>& offsets,
                                          size_t i) {
  return x.subspan(static_cast<size_t>(offsets[i]),
                   static_cast<size_t>(offsets[i + 1] - offsets[i]));
}

/// n log-spaced points on [lo, hi], endpoints included.
inline std::vector<double> logspace(double lo, double hi, int n) {
  if (n < 2 || lo <= 0.0 || hi <= lo) throw RangeError("bad logspace request");
  std::vector<double> g(static_cast<size_t>(n));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[static_cast<size_t>(i)] =
        std::exp(llo + (lhi - llo) * static_cast<double>(i) / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Conservative 4-decimal display of a decrease rate: rounds toward +inf so
/// the printed coefficient is never smaller than the certified one.
inline std::string display_rate_4dec(double x) {
  const double up = std::ceil(x * 1e4 - 1e-9) / 1e4;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", up);
  return buf;
}

inline bool approx_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace fsiss
