#pragma once

/**
 * @file gain_network.hpp
 * @brief Gain operators on the nonnegative orthant, small-gain checks,
 *        max-plus spectral machinery and Omega-path construction.
 *
 * A GainMatrix holds the internal gains gamma_ij (ScalarFn or zero) plus the
 * input-gain column gamma_iu and induces the monotone map
 *   [Gamma(s)]_i = max_j gamma_ij(s_j).
 * The small-gain condition Gamma(s) !>= s is checked two independent ways:
 * exhaustive minimal-cycle enumeration and a structured sample cloud; for
 * linear gains the max-plus spectral radius (Karp + enumeration) gives a
 * third, exact route.
 */

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsiss/common.hpp"
#include "fsiss/rng.hpp"
#include "fsiss/sampling.hpp"
#include "fsiss/scalar_fn.hpp"

namespace fsiss {

using GainEntry = std::optional<ScalarFn>;

enum class GainForm { Max, Sum };

inline std::string to_string(GainForm f) {
  return f == GainForm::Max ? "max" : "sum";
}

struct GainMatrix {
  int n = 0;
  GainForm form = GainForm::Max;
  std::vector<std::vector<GainEntry>> internal;  // gamma_ij
  std::vector<GainEntry> input;                  // gamma_iu

  static GainMatrix from_linear(const std::vector<std::vector<double>>& a,
                                const std::vector<double>& b = {},
                                GainForm form = GainForm::Max) {
    GainMatrix gm;
    gm.n = static_cast<int>(a.size());
    gm.form = form;
    gm.internal.resize(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != a.size())
        throw DimensionError("gain coefficient matrix must be square");
      for (double c : a[i])
        gm.internal[i].push_back(c > 0.0 ? GainEntry(ScalarFn::linear(c))
                                         : GainEntry());
    }
    if (b.empty()) {
      gm.input.assign(a.size(), GainEntry());
    } else {
      if (b.size() != a.size())
        throw DimensionError("input gain column size mismatch");
      for (double c : b)
        gm.input.push_back(c > 0.0 ? GainEntry(ScalarFn::linear(c))
                                   : GainEntry());
    }
    return gm;
  }

  bool internal_linear() const {
    for (const auto& row : internal)
      for (const auto& e : row)
        if (e && !e->is_linear()) return false;
    return true;
  }

  /// Linear coefficient of entry (i, j); zero entries give 0.
  double coeff(size_t i, size_t j) const {
    const auto& e = internal[i][j];
    return e ? e->linear_coeff() : 0.0;
  }

  double input_coeff(size_t i) const {
    return input[i] ? input[i]->linear_coeff() : 0.0;
  }

  std::vector<double> apply(std::span<const double> s) const {
    if (static_cast<int>(s.size()) != n)
      throw DimensionError("gain map dimension mismatch");
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (size_t i = 0; i < static_cast<size_t>(n); ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < static_cast<size_t>(n); ++j)
        if (internal[i][j]) acc = std::max(acc, (*internal[i][j])(s[j]));
      out[i] = acc;
    }
    return out;
  }

  std::vector<double> iterate(std::span<const double> s, int k) const {
    if (k < 0) throw RangeError("iteration count must be nonnegative");
    std::vector<double> cur(s.begin(), s.end());
    for (int t = 0; t < k; ++t) cur = apply(cur);
    return cur;
  }
};

struct GainValidation {
  bool pass = false;
  std::vector<std::string> errors;    // internal entries failing class K
  std::vector<std::string> warnings;  // internal entries failing class Kinf
};

/// Internal entries must be class K on the probe grid (Kinf failures are
/// warnings: bounded gains occur in intermediate fits), input entries class K.
inline GainValidation validate(const GainMatrix& gm) {
  GainValidation v;
  for (size_t i = 0; i < gm.internal.size(); ++i) {
    for (size_t j = 0; j < gm.internal[i].size(); ++j) {
      const auto& e = gm.internal[i][j];
      if (!e) continue;
      const auto k = check_class(*e, FnClass::K);
      if (!k.pass)
        v.errors.push_back("gamma[" + std::to_string(i + 1) + "][" +
                           std::to_string(j + 1) + "] fails the K class check");
      else if (!check_class(*e, FnClass::Kinf).pass)
        v.warnings.push_back("gamma[" + std::to_string(i + 1) + "][" +
                             std::to_string(j + 1) + "] is not Kinf (bounded)");
    }
    if (gm.input[i] && !check_class(*gm.input[i], FnClass::K).pass)
      v.errors.push_back("gamma_u[" + std::to_string(i + 1) +
                         "] fails the K class check");
  }
  v.pass = v.errors.empty();
  return v;
}

// -- diagonal operators --------------------------------------------------------

/// D = diag(id + delta_i); an absent delta_i is the zero sentinel (d_i = id).
/// An optional factor pair (delta_i1, delta_i2) records D = D2 o D1 entrywise.
struct DiagonalOp {
  std::vector<GainEntry> delta;
  std::optional<std::pair<std::vector<GainEntry>, std::vector<GainEntry>>>
      factors;

  static DiagonalOp identity(int n) {
    DiagonalOp d;
    d.delta.assign(static_cast<size_t>(n), GainEntry());
    return d;
  }

  static DiagonalOp uniform(int n, const ScalarFn& delta_fn) {
    DiagonalOp d;
    d.delta.assign(static_cast<size_t>(n), GainEntry(delta_fn));
    return d;
  }

  int n() const { return static_cast<int>(delta.size()); }

  ScalarFn d_fn(size_t i) const {
    if (!delta[i]) return ScalarFn::identity();
    return add({ScalarFn::identity(), *delta[i]}).with_declared(FnClass::Kinf);
  }

  ScalarFn d_inv_fn(size_t i) const { return invert(d_fn(i)); }

  ScalarFn d2_fn(size_t i) const {
    if (!factors) throw PreconditionError("diagonal operator has no factor pair");
    const auto& d2 = factors->second;
    if (!d2[i]) return ScalarFn::identity();
    return add({ScalarFn::identity(), *d2[i]}).with_declared(FnClass::Kinf);
  }

  ScalarFn d1_fn(size_t i) const {
    if (!factors) throw PreconditionError("diagonal operator has no factor pair");
    const auto& d1 = factors->first;
    if (!d1[i]) return ScalarFn::identity();
    return add({ScalarFn::identity(), *d1[i]}).with_declared(FnClass::Kinf);
  }

  std::vector<double> apply(std::span<const double> s) const {
    std::vector<double> out(s.begin(), s.end());
    for (size_t i = 0; i < out.size(); ++i)
      if (delta[i]) out[i] += (*delta[i])(s[i]);
    return out;
  }

  /// Checks d_i(s) > s for s > 0 and the factor identity d2(d1(s)) = d(s).
  GainValidation validate() const {
    GainValidation v;
    const auto grid = logspace(Defaults::class_grid_lo,
                               Defaults::class_grid_hi, 64);
    for (size_t i = 0; i < delta.size(); ++i) {
      if (delta[i]) {
        const auto rep = check_class(*delta[i], FnClass::PosDef);
        if (!rep.pass)
          v.errors.push_back("delta[" + std::to_string(i + 1) +
                             "] is not positive definite on the grid");
      }
      if (factors) {
        const auto d = d_fn(i);
        const auto d1 = d1_fn(i);
        const auto d2 = d2_fn(i);
        for (double s : grid) {
          const double lhs = d2(d1(s));
          const double rhs = d(s);
          if (!approx_rel(lhs, rhs, 1e-9)) {
            v.errors.push_back("factor pair mismatch at entry " +
                               std::to_string(i + 1) + ", s=" + fmt_g17(s));
            break;
          }
        }
      }
    }
    v.pass = v.errors.empty();
    return v;
  }
};

// -- cycle condition -------------------------------------------------------------

struct CycleInfo {
  std::vector<int> nodes;  // 0-based node sequence i0 -> i1 -> ... -> i0
  double value = 0.0;      // sup over the probe grid of h(s)/s
};

struct CycleReport {
  bool pass = false;
  bool exhaustive = true;
  std::vector<CycleInfo> cycles;
  int worst_index = -1;
  double worst_value = 0.0;

  const CycleInfo* worst() const {
    return worst_index >= 0 ? &cycles[static_cast<size_t>(worst_index)]
                            : nullptr;
  }
};

namespace detail {

inline void enumerate_cycles(const std::vector<std::vector<int>>& adj,
                             std::vector<std::vector<int>>& out,
                             size_t max_cycles) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> path;
  std::vector<char> onpath(static_cast<size_t>(n), 0);
  int start = 0;

  auto dfs = [&](auto&& self, int v) -> void {
    if (out.size() >= max_cycles) return;
    path.push_back(v);
    onpath[static_cast<size_t>(v)] = 1;
    for (int w : adj[static_cast<size_t>(v)]) {
      if (w == start)
        out.push_back(path);
      else if (w > start && !onpath[static_cast<size_t>(w)])
        self(self, w);
      if (out.size() >= max_cycles) break;
    }
    onpath[static_cast<size_t>(v)] = 0;
    path.pop_back();
  };

  for (start = 0; start < n; ++start) dfs(dfs, start);
}

/// Composition value of a cycle: sup over the probe grid of h(s)/s where
/// h = gamma_{i0 i1} o gamma_{i1 i2} o ... o gamma_{ik i0}. Exact product for
/// all-linear cycles.
inline double cycle_value(const GainMatrix& gm, const std::vector<int>& cyc) {
  bool linear = true;
  double prod = 1.0;
  const size_t k = cyc.size();
  for (size_t t = 0; t < k; ++t) {
    const auto& e = gm.internal[static_cast<size_t>(cyc[t])]
                               [static_cast<size_t>(cyc[(t + 1) % k])];
    if (!e) return 0.0;  // not a cycle of the nonzero digraph
    if (e->is_linear())
      prod *= e->linear_coeff();
    else
      linear = false;
  }
  if (linear) return prod;

  const auto grid = logspace(Defaults::class_grid_lo, Defaults::class_grid_hi,
                             Defaults::class_grid_points);
  double worst = 0.0;
  for (double s : grid) {
    double v = s;
    for (size_t t = k; t-- > 0;) {
      const auto& e = gm.internal[static_cast<size_t>(cyc[t])]
                                 [static_cast<size_t>(cyc[(t + 1) % k])];
      v = (*e)(v);
    }
    worst = std::max(worst, v / s);
  }
  return worst;
}

}  // namespace detail

/**
 * Enumerates all minimal cycles of the nonzero-entry digraph (dimension cap
 * 12, cycle cap 200000) and tests each composition < id on the probe grid
 * with strict relative margin. Above the caps the verdict falls back to the
 * max-plus radius (linear gains) and the report is marked non-exhaustive.
 */
inline CycleReport cycle_condition(const GainMatrix& gm);

// -- max-plus spectral radius ------------------------------------------------

namespace detail {

/// Max cycle geometric mean by explicit enumeration; 0 when acyclic.
inline double enum_radius(const std::vector<std::vector<double>>& c) {
  const int n = static_cast<int>(c.size());
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (c[static_cast<size_t>(i)][static_cast<size_t>(j)] > 0.0)
        adj[static_cast<size_t>(i)].push_back(j);
  std::vector<std::vector<int>> cycles;
  enumerate_cycles(adj, cycles, 200000);
  double best = 0.0;
  for (const auto& cyc : cycles) {
    double prod = 1.0;
    for (size_t t = 0; t < cyc.size(); ++t)
      prod *= c[static_cast<size_t>(cyc[t])]
               [static_cast<size_t>(cyc[(t + 1) % cyc.size()])];
    best = std::max(best, std::pow(prod, 1.0 / static_cast<double>(cyc.size())));
  }
  return best;
}

/// Karp's minimum cycle mean on weights -log(c): all cycle products < 1 iff
/// the minimum cycle mean is positive. Returns exp(-mean) = max geometric
/// cycle mean; 0 when acyclic.
inline double karp_radius(const std::vector<std::vector<double>>& c) {
  const int n = static_cast<int>(c.size());
  const double inf = std::numeric_limits<double>::infinity();
  // F[k][v] = min weight of a length-k walk ending at v (any start).
  std::vector<std::vector<double>> F(static_cast<size_t>(n + 1),
                                     std::vector<double>(static_cast<size_t>(n), inf));
  std::fill(F[0].begin(), F[0].end(), 0.0);
  for (int k = 1; k <= n; ++k) {
    for (int u = 0; u < n; ++u) {
      if (F[static_cast<size_t>(k - 1)][static_cast<size_t>(u)] == inf) continue;
      for (int v = 0; v < n; ++v) {
        const double cc = c[static_cast<size_t>(u)][static_cast<size_t>(v)];
        if (cc <= 0.0) continue;
        const double w = -std::log(cc);
        auto& dst = F[static_cast<size_t>(k)][static_cast<size_t>(v)];
        dst = std::min(dst, F[static_cast<size_t>(k - 1)][static_cast<size_t>(u)] + w);
      }
    }
  }
  double mu = inf;
  for (int v = 0; v < n; ++v) {
    if (F[static_cast<size_t>(n)][static_cast<size_t>(v)] == inf) continue;
    double worst = -inf;
    for (int k = 0; k < n; ++k) {
      const double num = F[static_cast<size_t>(n)][static_cast<size_t>(v)] -
                         F[static_cast<size_t>(k)][static_cast<size_t>(v)];
      worst = std::max(worst, num / static_cast<double>(n - k));
    }
    mu = std::min(mu, worst);
  }
  if (mu == inf) return 0.0;
  return std::exp(-mu);
}

inline std::vector<std::vector<double>> coeff_matrix(const GainMatrix& gm) {
  std::vector<std::vector<double>> c(static_cast<size_t>(gm.n),
                                     std::vector<double>(static_cast<size_t>(gm.n), 0.0));
  for (size_t i = 0; i < c.size(); ++i)
    for (size_t j = 0; j < c.size(); ++j) c[i][j] = gm.coeff(i, j);
  return c;
}

}  // namespace detail

/// Max-plus spectral radius of a linear gain matrix, computed by Karp's
/// minimum-cycle-mean on -log coefficients and cross-checked against explicit
/// cycle enumeration (dimensions <= 12); the two must agree to 1e-12.
inline double maxplus_radius(const GainMatrix& gm) {
  if (!gm.internal_linear())
    throw PreconditionError("max-plus radius needs linear internal gains");
  const auto c = detail::coeff_matrix(gm);
  const double karp = detail::karp_radius(c);
  if (gm.n <= Defaults::cycle_enum_cap) {
    const double en = detail::enum_radius(c);
    if (std::abs(karp - en) > 1e-12)
      throw Error("max-plus radius mismatch: karp=" + fmt_g17(karp) +
                  " enumeration=" + fmt_g17(en));
  }
  return karp;
}

inline CycleReport cycle_condition(const GainMatrix& gm) {
  CycleReport rep;
  const size_t cycle_cap = 200000;
  if (gm.n > Defaults::cycle_enum_cap) {
    rep.exhaustive = false;
    if (gm.internal_linear()) {
      const double mu = maxplus_radius(gm);
      rep.worst_value = mu;
      rep.pass = mu <= 1.0 - Defaults::strict_margin;
    } else {
      rep.pass = false;  // resolved by sampling at the call site
    }
    return rep;
  }

  std::vector<std::vector<int>> adj(static_cast<size_t>(gm.n));
  for (int i = 0; i < gm.n; ++i)
    for (int j = 0; j < gm.n; ++j)
      if (gm.internal[static_cast<size_t>(i)][static_cast<size_t>(j)])
        adj[static_cast<size_t>(i)].push_back(j);
  std::vector<std::vector<int>> cycles;
  detail::enumerate_cycles(adj, cycles, cycle_cap);
  rep.exhaustive = cycles.size() < cycle_cap;

  rep.pass = true;
  for (const auto& cyc : cycles) {
    CycleInfo info;
    info.nodes = cyc;
    info.value = detail::cycle_value(gm, cyc);
    if (info.value > rep.worst_value) {
      rep.worst_value = info.value;
      rep.worst_index = static_cast<int>(rep.cycles.size());
    }
    if (info.value > 1.0 - Defaults::strict_margin) rep.pass = false;
    rep.cycles.push_back(std::move(info));
  }
  return rep;
}

// -- sampled small-gain check ---------------------------------------------------

struct SampleCheckReport {
  bool pass = false;
  std::size_t checked = 0;
  bool has_witness = false;
  std::vector<double> witness;
};

/// Checks for every cloud point s that some component of the (optionally
/// D-composed) gain image strictly decreases: exists i with
/// [D(Gamma(s))]_i <= (1 - eps) s_i.
inline SampleCheckReport smallgain_sample_check(
    const GainMatrix& gm, const DiagonalOp* D = nullptr,
    std::optional<CloudConfig> config = std::nullopt) {
  CloudConfig cfg = config.value_or(CloudConfig{});
  if (!config) {
    cfg.radius_min = 1e-4;
    cfg.radius_max = 1e4;
  }
  const auto cloud = orthant_cloud(gm.n, cfg);
  SampleCheckReport rep;
  for (const auto& s : cloud) {
    auto t = gm.apply(s);
    if (D) t = D->apply(t);
    bool decreasing = false;
    for (size_t i = 0; i < t.size(); ++i) {
      if (s[i] > 0.0 && t[i] <= s[i] * (1.0 - Defaults::strict_margin)) {
        decreasing = true;
        break;
      }
    }
    ++rep.checked;
    if (!decreasing) {
      rep.has_witness = true;
      rep.witness = s;
      rep.pass = false;
      return rep;
    }
  }
  rep.pass = true;
  return rep;
}

// -- Omega-paths -----------------------------------------------------------------

/// Vector of Kinf path components along which the gain operator strictly
/// decreases; margin is the verified relative decrease over the check grid.
struct OmegaPath {
  std::vector<ScalarFn> components;
  std::vector<ScalarFn> inverses;
  double margin = -1.0;

  int n() const { return static_cast<int>(components.size()); }

  std::vector<double> at(double r) const {
    std::vector<double> out(components.size());
    for (size_t i = 0; i < components.size(); ++i) out[i] = components[i](r);
    return out;
  }

  static OmegaPath from_components(std::vector<ScalarFn> comps) {
    OmegaPath p;
    p.inverses.reserve(comps.size());
    for (const auto& c : comps) p.inverses.push_back(invert(c));
    p.components = std::move(comps);
    return p;
  }
};

enum class PathOp { Gamma, DGamma, GammaD, D1GammaD2 };

struct PathVerifyReport {
  bool pass = false;
  bool class_ok = false;
  double margin = -std::numeric_limits<double>::infinity();
  double worst_r = 0.0;
  int worst_component = -1;
  std::vector<double> gamma_at_one;  // composite image of sigma(1)
};

/**
 * Evaluates strict decrease of the (optionally D-composed) gain operator
 * along the path on 512 log-spaced r in [1e-6, 1e6]. The margin is
 * min over r and i of (sigma_i(r) - t_i(r)) / sigma_i(r).
 */
inline PathVerifyReport verify_omega_path(const GainMatrix& gm,
                                          const OmegaPath& path,
                                          const DiagonalOp* D = nullptr,
                                          PathOp op = PathOp::DGamma) {
  if (path.n() != gm.n) throw DimensionError("path/gain dimension mismatch");
  if (!D) op = PathOp::Gamma;
  PathVerifyReport rep;

  rep.class_ok = true;
  for (const auto& c : path.components)
    if (!check_class(c, FnClass::Kinf).pass) rep.class_ok = false;

  auto composite = [&](const std::vector<double>& s) {
    switch (op) {
      case PathOp::Gamma: return gm.apply(s);
      case PathOp::DGamma: return D->apply(gm.apply(s));
      case PathOp::GammaD: return gm.apply(D->apply(s));
      case PathOp::D1GammaD2: {
        if (!D->factors)
          throw PreconditionError("path check needs a factored diagonal operator");
        const auto& [f1, f2] = *D->factors;
        std::vector<double> t(s);
        for (size_t i = 0; i < t.size(); ++i)
          if (f2[i]) t[i] = s[i] + (*f2[i])(s[i]);
        t = gm.apply(t);
        for (size_t i = 0; i < t.size(); ++i)
          if (f1[i]) t[i] = t[i] + (*f1[i])(t[i]);
        return t;
      }
    }
    return gm.apply(s);
  };

  const auto grid = logspace(Defaults::path_grid_lo, Defaults::path_grid_hi,
                             Defaults::path_grid_points);
  rep.margin = std::numeric_limits<double>::infinity();
  for (double r : grid) {
    const auto s = path.at(r);
    const auto t = composite(s);
    for (size_t i = 0; i < s.size(); ++i) {
      if (!(s[i] > 0.0)) {
        rep.margin = -std::numeric_limits<double>::infinity();
        rep.worst_r = r;
        rep.worst_component = static_cast<int>(i);
        continue;
      }
      const double m = (s[i] - t[i]) / s[i];
      if (m < rep.margin) {
        rep.margin = m;
        rep.worst_r = r;
        rep.worst_component = static_cast<int>(i);
      }
    }
  }
  rep.gamma_at_one = composite(path.at(1.0));
  rep.pass = rep.class_ok && rep.margin > 0.0;
  return rep;
}

// -- path construction -----------------------------------------------------------

namespace detail {

/// Max-plus Kleene accumulation of B over the all-ones vector.
inline std::vector<double> kleene_direction(
    const std::vector<std::vector<double>>& b) {
  const size_t n = b.size();
  std::vector<double> acc(n, 1.0), t(n, 1.0);
  for (size_t k = 1; k < n; ++k) {
    std::vector<double> nt(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        if (b[i][j] > 0.0) nt[i] = std::max(nt[i], b[i][j] * t[j]);
    t = std::move(nt);
    for (size_t i = 0; i < n; ++i) acc[i] = std::max(acc[i], t[i]);
  }
  return acc;
}

}  // namespace detail

/**
 * Linear Omega-path via the max-plus Kleene star: with mu the max-plus radius
 * and lambda in (mu, 1) (default the midpoint (1+mu)/2), the direction
 * s = max_{k<N} (Gamma/lambda)^k 1 satisfies Gamma(s) <= lambda s < s, so
 * sigma_i(r) = s_i r is an Omega-path with margin at least 1 - lambda.
 */
inline OmegaPath omega_path_linear(const GainMatrix& gm,
                                   std::optional<double> lambda = std::nullopt) {
  if (!gm.internal_linear())
    throw PreconditionError("linear path construction needs linear gains");
  const double mu = maxplus_radius(gm);
  if (mu >= 1.0)
    throw InfeasibleError("max-plus radius " + fmt_g17(mu) +
                          " >= 1: no Omega-path exists");
  const double lam = lambda.value_or(0.5 * (1.0 + mu));
  if (!(lam > mu && lam < 1.0))
    throw RangeError("lambda must lie in (radius, 1)");

  auto b = detail::coeff_matrix(gm);
  for (auto& row : b)
    for (auto& v : row) v /= lam;
  const auto dir = detail::kleene_direction(b);

  const auto img = gm.apply(dir);
  for (size_t i = 0; i < dir.size(); ++i)
    if (img[i] > lam * dir[i] * (1.0 + 1e-12))
      throw ConstructionError("Kleene direction failed its decrease guarantee");

  std::vector<ScalarFn> comps;
  comps.reserve(dir.size());
  for (double s : dir) comps.push_back(ScalarFn::linear(s));
  OmegaPath path = OmegaPath::from_components(std::move(comps));
  path.margin = verify_omega_path(gm, path, nullptr, PathOp::Gamma).margin;
  return path;
}

/**
 * Grid variant for general (possibly nonlinear) gains satisfying the cycle
 * condition. At each grid radius the secant linearization seeds a monotone
 * fixed-point iteration for a vector with Gamma(s) <= (1-eps) s; grid
 * solutions are linked monotonically (upward projection) and interpolated
 * log-linearly. The final path must pass verify_omega_path.
 */
inline OmegaPath omega_path_grid(const GainMatrix& gm,
                                 std::vector<double> r_grid = {}) {
  const auto cyc = cycle_condition(gm);
  if (!cyc.pass)
    throw PreconditionError("cycle condition fails; no Omega-path exists");
  if (r_grid.empty())
    r_grid = logspace(Defaults::omega_grid_lo, Defaults::omega_grid_hi,
                      Defaults::omega_grid_points);

  const size_t n = static_cast<size_t>(gm.n);
  const double eps = Defaults::strict_margin;
  std::vector<std::vector<double>> knots(n);
  std::vector<double> prev;

  for (double r : r_grid) {
    // secant linearization at scale r
    std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        if (gm.internal[i][j]) L[i][j] = (*gm.internal[i][j])(r) / r;

    std::vector<double> s0(n, r);
    const double mu_r = detail::karp_radius(L);
    if (mu_r < 1.0) {
      auto b = L;
      const double lam = 0.5 * (1.0 + mu_r);
      for (auto& row : b)
        for (auto& v : row) v /= lam;
      s0 = detail::kleene_direction(b);
      for (auto& v : s0) v *= r;
    }

    std::vector<double> anchor = s0;
    if (!prev.empty())
      for (size_t i = 0; i < n; ++i)
        anchor[i] = std::max(anchor[i], prev[i] * (1.0 + 1e-6));

    std::vector<double> s = anchor;
    bool converged = false;
    for (int it = 0; it < 20000; ++it) {
      auto img = gm.apply(s);
      bool changed = false;
      for (size_t i = 0; i < n; ++i) {
        const double next = std::max(anchor[i], img[i] / (1.0 - eps));
        if (next > s[i] * (1.0 + 1e-13)) changed = true;
        s[i] = std::max(s[i], next);
        if (s[i] > 1e9 * anchor[i])
          throw ConstructionError("path iteration diverged at r = " +
                                  fmt_g17(r));
      }
      if (!changed) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw ConstructionError("path iteration stalled at r = " + fmt_g17(r));

    for (size_t i = 0; i < n; ++i) knots[i].push_back(s[i]);
    prev = std::move(s);
  }

  std::vector<ScalarFn> comps;
  comps.reserve(n);
  for (size_t i = 0; i < n; ++i)
    comps.push_back(ScalarFn::piecewise_loglin(r_grid, knots[i]));
  OmegaPath path = OmegaPath::from_components(std::move(comps));
  const auto rep = verify_omega_path(gm, path, nullptr, PathOp::Gamma);
  if (!rep.pass)
    throw ConstructionError("constructed path failed verification (margin " +
                            fmt_g17(rep.margin) + ")");
  path.margin = rep.margin;
  return path;
}

// -- alpha-hat robustness check ---------------------------------------------------

enum class AlphaHatWhich { FullD, FactorD2 };

struct AlphaHatReport {
  bool pass = false;
  std::vector<ClassReport> per_component;
};

/**
 * For each i builds the gap g_i(s) = s - sigma_i^{-1}(d_i^{-1}(sigma_i(s)))
 * (with d_i2 instead of d_i for the factored variant) and checks it is Kinf
 * on the probe grid. This is the robustness hypothesis that a composite
 * certificate needs from the diagonal operator.
 */
inline AlphaHatReport check_alphahat(const OmegaPath& path, const DiagonalOp& D,
                                     AlphaHatWhich which = AlphaHatWhich::FullD) {
  if (path.n() != D.n()) throw DimensionError("path/diagonal dimension mismatch");
  AlphaHatReport rep;
  rep.pass = true;
  for (size_t i = 0; i < path.components.size(); ++i) {
    const ScalarFn di_inv = which == AlphaHatWhich::FullD
                                ? D.d_inv_fn(i)
                                : invert(D.d2_fn(i));
    const ScalarFn inner =
        compose(path.inverses[i], compose(di_inv, path.components[i]));
    const ScalarFn gap = sub(ScalarFn::identity(), inner);
    auto cls = check_class(gap, FnClass::Kinf);
    rep.pass = rep.pass && cls.pass;
    rep.per_component.push_back(std::move(cls));
  }
  return rep;
}

}  // namespace fsiss
