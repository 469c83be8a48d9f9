#pragma once

/**
 * @file certificates.hpp
 * @brief Finite-step decrease certificates: norm candidates, falsification,
 *        exponential-decay constant extraction and composition from gains.
 *
 * A Certificate packages a candidate function V, a horizon M and a decrease
 * pair (rho, sigma) claiming V(x(M, xi, u)) <= rho(V(xi)) + sigma(|u|).
 * Certificates produced here are falsification-backed: the evidence block
 * records the cloud (samples, seed, radius) on which zero violations were
 * found. They are candidates supported by evidence, not formal proofs.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsiss/common.hpp"
#include "fsiss/gain_network.hpp"
#include "fsiss/sampling.hpp"
#include "fsiss/scalar_fn.hpp"
#include "fsiss/system_model.hpp"

namespace fsiss {

// -- candidate functions -----------------------------------------------------

struct VSpec {
  enum class Kind { PlainNorm, WeightedBlockMax, ComposedBlockMax };

  Kind kind = Kind::PlainNorm;
  Norm norm = Norm::Inf;
  std::vector<double> weights;       // WeightedBlockMax: c_i per block
  std::vector<ScalarFn> wrappers;    // ComposedBlockMax: f_i applied to |xi_i|
  double lambda = 1.0;               // exponent on the assembled value

  static VSpec plain(Norm n, double lambda = 1.0) {
    VSpec v;
    v.kind = Kind::PlainNorm;
    v.norm = n;
    v.lambda = lambda;
    return v;
  }

  static VSpec block_max(Norm n, std::vector<double> w, double lambda = 1.0) {
    for (double c : w)
      if (!(c > 0.0)) throw RangeError("block weights must be positive");
    VSpec v;
    v.kind = Kind::WeightedBlockMax;
    v.norm = n;
    v.weights = std::move(w);
    v.lambda = lambda;
    return v;
  }

  static VSpec composed_block_max(Norm n, std::vector<ScalarFn> fs) {
    VSpec v;
    v.kind = Kind::ComposedBlockMax;
    v.norm = n;
    v.wrappers = std::move(fs);
    return v;
  }
};

inline double eval_v(const VSpec& v, std::span<const double> xi,
                     const std::vector<int>& blocks) {
  double base = 0.0;
  switch (v.kind) {
    case VSpec::Kind::PlainNorm:
      base = vec_norm(xi, v.norm);
      break;
    case VSpec::Kind::WeightedBlockMax: {
      const auto off = block_offsets(blocks);
      if (v.weights.size() != blocks.size())
        throw DimensionError("weight/block count mismatch");
      for (size_t i = 0; i < blocks.size(); ++i)
        base = std::max(base,
                        v.weights[i] * vec_norm(block_span(xi, off, i), v.norm));
      break;
    }
    case VSpec::Kind::ComposedBlockMax: {
      const auto off = block_offsets(blocks);
      if (v.wrappers.size() != blocks.size())
        throw DimensionError("wrapper/block count mismatch");
      for (size_t i = 0; i < blocks.size(); ++i)
        base = std::max(base, v.wrappers[i](vec_norm(block_span(xi, off, i),
                                                     v.norm)));
      break;
    }
  }
  return v.lambda == 1.0 ? base : std::pow(base, v.lambda);
}

// -- certificates --------------------------------------------------------------

struct Evidence {
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double radius = 0.0;
  double input_bound = 0.0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::string label = "unsampled";
};

struct Certificate {
  VSpec v;
  std::vector<int> blocks;
  int m_steps = 1;
  ScalarFn rho;      // decrease rate; (id - rho) must be Kinf
  ScalarFn sigma;    // input offset (zero function when no input term)
  ScalarFn alpha1;   // lower sandwich bound on V
  ScalarFn alpha2;   // upper sandwich bound on V
  Evidence evidence;
  std::string provenance = "user";
};

/// Well-formedness: (id - rho) passes the Kinf grid check.
inline ClassReport check_certificate_rate(const Certificate& cert) {
  return check_class(sub(ScalarFn::identity(), cert.rho), FnClass::Kinf);
}

struct SandwichReport {
  bool pass = false;
  std::size_t checked = 0;
  double worst_lower = std::numeric_limits<double>::infinity();
  double worst_upper = std::numeric_limits<double>::infinity();
};

/// alpha1(|xi|) <= V(xi) <= alpha2(|xi|) over a state cloud.
inline SandwichReport verify_sandwich(const Certificate& cert, int n,
                                      const CloudConfig& cfg) {
  SandwichReport rep;
  const auto states = state_cloud(n, cert.v.norm, cfg);
  for (const auto& xi : states) {
    const double r = vec_norm(xi, cert.v.norm);
    const double val = eval_v(cert.v, xi, cert.blocks);
    rep.worst_lower = std::min(rep.worst_lower, val - cert.alpha1(r));
    rep.worst_upper = std::min(rep.worst_upper, cert.alpha2(r) - val);
    ++rep.checked;
  }
  const double tol = 1e-12;
  rep.pass = rep.worst_lower >= -tol && rep.worst_upper >= -tol;
  return rep;
}

// -- decrease falsification -----------------------------------------------------

struct DecreaseReport {
  bool pass = false;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::vector<double> witness_state;
  std::string witness_input;
  double witness_lhs = 0.0;
  double witness_rhs = 0.0;
  double witness_ratio = 0.0;  // V(x(M)) / V(xi) at the worst point
};

/**
 * Simulates M steps for every cloud point under the three input families
 * (zero, constant at the bound, seeded random sequences) and checks
 * V(x(M)) <= rho(V(xi)) + sigma(sup|u|). Zero violations = pass; the report
 * carries the worst slack and its witness either way.
 */
inline DecreaseReport verify_decrease(const SystemModel& sys,
                                      const Certificate& cert,
                                      const CloudConfig& cfg) {
  DecreaseReport rep;
  const auto states = state_cloud(sys.n(), cert.v.norm, cfg);
  const auto M = static_cast<std::size_t>(cert.m_steps);
  for (size_t i = 0; i < states.size(); ++i) {
    const auto u = make_input_family(sys.m(), cert.v.norm, cfg.input_bound,
                                     static_cast<int>(i % 3),
                                     mix_seed(cfg.seed, i), M);
    const auto tr = simulate(sys, states[i], u, M);
    const double v0 = eval_v(cert.v, states[i], cert.blocks);
    const double lhs = eval_v(cert.v, tr.back(), cert.blocks);
    const double rhs = cert.rho(v0) + cert.sigma(u.sup_norm(M, cert.v.norm));
    const double slack = rhs - lhs;
    ++rep.checked;
    if (slack < rep.worst_slack) {
      rep.worst_slack = slack;
      rep.witness_state = states[i];
      rep.witness_input = u.describe();
      rep.witness_lhs = lhs;
      rep.witness_rhs = rhs;
      rep.witness_ratio = v0 > 0.0 ? lhs / v0 : 0.0;
    }
    if (slack < 0.0) ++rep.violations;
  }
  rep.pass = rep.violations == 0;
  return rep;
}

// -- Procedure: norm candidate ----------------------------------------------------

struct Proc1Entry {
  int k = 0;
  double c_raw = 0.0;  // sampled contraction supremum
  double c = 0.0;      // inflated coefficient
  double d = 0.0;      // inflated input coefficient (when fitted)
  bool contraction = false;
};

struct Proc1Result {
  bool success = false;
  int m_steps = 0;
  std::optional<Certificate> certificate;
  std::vector<Proc1Entry> table;
  std::optional<DecreaseReport> refalsification;
};

namespace detail {

inline double fit_input_coefficient(const SystemModel& sys, Norm norm, int k,
                                    double c, const CloudConfig& cfg) {
  const auto states = state_cloud(sys.n(), norm, cfg);
  double worst = 0.0;
  std::vector<double> origin(static_cast<size_t>(sys.n()), 0.0);
  for (size_t i = 0; i < states.size(); ++i) {
    const auto& xi = (i % 16 == 0) ? origin : states[i];
    const int family = 1 + static_cast<int>(i % 2);  // constant / random
    const auto u = make_input_family(sys.m(), norm, cfg.input_bound, family,
                                     mix_seed(cfg.seed, i),
                                     static_cast<size_t>(k));
    const double nu = u.sup_norm(static_cast<size_t>(k), norm);
    if (nu <= 0.0) continue;
    const auto tr = simulate(sys, xi, u, static_cast<size_t>(k));
    const double gain =
        (vec_norm(tr.back(), norm) - c * vec_norm(xi, norm)) / nu;
    worst = std::max(worst, gain);
  }
  return worst;
}

}  // namespace detail

/**
 * Iterates the horizon k = 1..max_k looking for the first k at which the
 * plain norm contracts: c_k = (1+eta) * sup |x(k,xi,0)| / |xi| over the
 * zero-input cloud. On contraction the input coefficient is fitted on
 * input-active clouds, the candidate re-falsified on a fresh seed, and the
 * certificate returned. Failure reports the full per-k contraction table.
 */
inline Proc1Result procedure1(const SystemModel& sys, Norm norm, int max_k,
                              const CloudConfig& cfg) {
  if (max_k < 1) throw RangeError("procedure needs max_k >= 1");
  Proc1Result res;

  auto run_attempt = [&](const CloudConfig& attempt_cfg) -> Proc1Result {
    Proc1Result r;
    const auto states = state_cloud(sys.n(), norm, attempt_cfg);
    std::vector<std::vector<double>> cur = states;
    const auto u0 = InputSignal::zero(sys.m());

    for (int k = 1; k <= max_k; ++k) {
      double sup = 0.0;
      try {
        for (auto& x : cur) x = sys.step(x, u0.at(0));
        for (size_t i = 0; i < states.size(); ++i) {
          const double r0 = vec_norm(states[i], norm);
          if (r0 > 0.0) sup = std::max(sup, vec_norm(cur[i], norm) / r0);
        }
      } catch (const EvalError&) {
        // trajectories left the representable range; no later horizon can
        // contract either, record the blow-up and stop
        Proc1Entry entry;
        entry.k = k;
        entry.c_raw = std::numeric_limits<double>::infinity();
        entry.c = entry.c_raw;
        r.table.push_back(entry);
        return r;
      }
      Proc1Entry entry;
      entry.k = k;
      entry.c_raw = sup;
      entry.c = sup * (1.0 + attempt_cfg.inflation);
      entry.contraction = entry.c < 1.0 - Defaults::strict_margin;

      if (entry.contraction) {
        const double d_raw = detail::fit_input_coefficient(
            sys, norm, k, entry.c, attempt_cfg.with_seed(
                                        mix_seed(attempt_cfg.seed, 101)));
        entry.d = d_raw * (1.0 + attempt_cfg.inflation);
        r.table.push_back(entry);

        Certificate cert;
        cert.v = VSpec::plain(norm);
        cert.blocks = sys.blocks();
        cert.m_steps = k;
        cert.rho = ScalarFn::linear(entry.c);
        cert.sigma = entry.d > 0.0 ? ScalarFn::linear(entry.d)
                                   : ScalarFn::zero();
        cert.alpha1 = ScalarFn::identity();
        cert.alpha2 = ScalarFn::identity();
        cert.provenance = "procedure1";

        const auto fresh = attempt_cfg.with_seed(attempt_cfg.seed + 1);
        const auto ver = verify_decrease(sys, cert, fresh);
        if (ver.pass) {
          cert.evidence = {ver.checked, fresh.seed, attempt_cfg.radius_max,
                           attempt_cfg.input_bound, ver.worst_slack,
                           "sampled"};
          r.success = true;
          r.m_steps = k;
          r.certificate = std::move(cert);
          r.refalsification = ver;
          return r;
        }
        // fresh-seed falsification: fall through and keep searching
        r.table.back().contraction = false;
      } else {
        r.table.push_back(entry);
      }
    }
    return r;
  };

  CloudConfig attempt = cfg;
  for (int round = 0; round < 3; ++round) {
    res = run_attempt(attempt);
    if (res.success) return res;
    bool had_candidate = false;
    for (const auto& e : res.table)
      had_candidate |= e.c < 1.0 - Defaults::strict_margin;
    if (!had_candidate) return res;  // genuine failure, no refit will help
    attempt = attempt.with_samples(attempt.samples * 2);
  }
  return res;
}

// -- exponential decay constants ---------------------------------------------------

struct ExpIssEstimate {
  double C = 1.0;
  double kappa = 0.0;
  ScalarFn gamma;  // input gain of the trajectory estimate
  double h = 0.5;
  double lambda = 1.0;
};

/**
 * Assembles the exponential trajectory-estimate constants from a certificate
 * with linear decrease pair and power sandwich bounds, and a linear global
 * envelope. With kappa_tilde = c + h(1-c):
 *   kappa = kappa_tilde^(1/(lambda M)),
 *   C = (b/(a kappa_tilde))^(1/lambda) * max_{j<M} w1^j   (C >= 1 always),
 *   gamma(s) = (b/(a kappa_tilde))^(1/lambda) * w2_max * s
 *              + (d/(a h (1-c)))^(1/lambda) * s^(1/lambda).
 */
inline ExpIssEstimate expiss_constants(const Certificate& cert,
                                       const KBound& kb, double h = 0.5) {
  if (!(h > 0.0 && h < 1.0)) throw RangeError("h must lie in (0, 1)");
  if (!cert.rho.is_linear() && !cert.rho.is_zero())
    throw PreconditionError("decrease rate must be linear");
  if (!cert.sigma.is_linear() && !cert.sigma.is_zero())
    throw PreconditionError("input offset must be linear");
  const double c = cert.rho.is_zero() ? 0.0 : cert.rho.linear_coeff();
  const double d = cert.sigma.is_zero() ? 0.0 : cert.sigma.linear_coeff();
  if (!(c < 1.0)) throw PreconditionError("decrease coefficient must be < 1");

  const auto a1 = cert.alpha1.as_scaled_power();
  const auto a2 = cert.alpha2.as_scaled_power();
  if (!a1 || !a2 || a1->second != a2->second)
    throw PreconditionError("sandwich bounds must be matching powers");
  const double a = a1->first, b = a2->first, lambda = a1->second;
  if (!(b >= a && a > 0.0)) throw PreconditionError("need b >= a > 0");

  const int M = cert.m_steps;
  double w1_max = 1.0, zeta = 0.0, p = 1.0;
  for (int j = 0; j < M - 1; ++j) {
    zeta += p;
    p *= kb.w1;
    w1_max = std::max(w1_max, p);
  }
  const double w2_max = kb.w2 * zeta;

  ExpIssEstimate est;
  est.h = h;
  est.lambda = lambda;
  const double kt = c + h * (1.0 - c);
  est.kappa = std::pow(kt, 1.0 / (lambda * static_cast<double>(M)));
  const double front = std::pow(b / (a * kt), 1.0 / lambda);
  est.C = front * w1_max;
  if (!(est.C >= 1.0))
    throw Error("internal: assembled C < 1 (C = " + fmt_g17(est.C) + ")");

  std::vector<ScalarFn> terms;
  if (front * w2_max > 0.0) terms.push_back(ScalarFn::linear(front * w2_max));
  if (d > 0.0) {
    const double c2 = std::pow(d / (a * h * (1.0 - c)), 1.0 / lambda);
    terms.push_back(lambda == 1.0
                        ? ScalarFn::linear(c2)
                        : scale(c2, ScalarFn::power(1.0 / lambda)));
  }
  est.gamma = terms.empty() ? ScalarFn::zero() : add(terms);
  return est;
}

struct IssCheckReport {
  bool pass = false;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::vector<double> witness_state;
  int witness_step = -1;           // step of the worst slack
  int first_violation_step = -1;   // smallest violating step, -1 when clean
};

/// Simulates the cloud over the horizon and asserts the trajectory estimate
/// |x(k)| <= C kappa^k |xi| + gamma(sup |u|) at every step.
inline IssCheckReport check_iss_estimate(const SystemModel& sys,
                                         const ExpIssEstimate& est, Norm norm,
                                         const CloudConfig& cfg,
                                         int horizon) {
  IssCheckReport rep;
  const auto states = state_cloud(sys.n(), norm, cfg);
  for (size_t i = 0; i < states.size(); ++i) {
    const auto u = make_input_family(sys.m(), norm, cfg.input_bound,
                                     static_cast<int>(i % 3),
                                     mix_seed(cfg.seed, i),
                                     static_cast<size_t>(horizon));
    const auto tr = simulate(sys, states[i], u, static_cast<size_t>(horizon));
    const double r0 = vec_norm(states[i], norm);
    double decay = est.C;
    for (int k = 0; k <= horizon; ++k) {
      const double lhs = vec_norm(tr.states[static_cast<size_t>(k)], norm);
      const double rhs =
          decay * r0 + est.gamma(u.sup_norm(static_cast<size_t>(k), norm));
      const double slack = rhs - lhs;
      ++rep.checked;
      if (slack < rep.worst_slack) {
        rep.worst_slack = slack;
        rep.witness_state = states[i];
        rep.witness_step = k;
      }
      if (slack < 0.0) {
        ++rep.violations;
        if (rep.first_violation_step < 0 || k < rep.first_violation_step)
          rep.first_violation_step = k;
      }
      decay *= est.kappa;
    }
  }
  rep.pass = rep.violations == 0;
  return rep;
}

// -- composition from gains ----------------------------------------------------------

/**
 * Builds the composite certificate from a gain matrix and an Omega-path.
 *
 * Without a diagonal operator this is the linear route: all gains and path
 * components must be linear, V is the weighted block max with weights
 * 1/s_i, rho = max_{ij} gamma_ij s_j / s_i and sigma = max_i gamma_iu / s_i.
 *
 * With a diagonal operator D the path must decrease the composed operator
 * (Gamma o D for max form, D1 o Gamma o D2 for sum form, verified here), the
 * robustness gaps of check_alphahat must be Kinf, and
 * V = max_i (sigma_i^{-1} o d_i^{-1})(V_i) with the matching rho and sigma.
 */
inline Certificate compose_certificate(const GainMatrix& gm,
                                       const OmegaPath& path,
                                       const DiagonalOp* D, int M,
                                       const std::vector<int>& blocks,
                                       Norm norm) {
  if (gm.n != path.n() ||
      gm.n != static_cast<int>(blocks.size()))
    throw DimensionError("gain/path/blocks dimension mismatch");
  if (M < 1) throw RangeError("composition needs M >= 1");
  const size_t n = static_cast<size_t>(gm.n);
  const double kappa = kappa_norm(norm, gm.n);

  Certificate cert;
  cert.blocks = blocks;
  cert.m_steps = M;
  cert.provenance = "composed";

  if (!D) {
    // linear corollary route
    bool linear = gm.internal_linear();
    for (const auto& e : gm.input) linear &= !e || e->is_linear();
    for (const auto& c : path.components) linear &= c.is_linear();
    if (!linear)
      throw PreconditionError(
          "composition without a diagonal operator needs linear gains and a "
          "linear path");
    const auto rep = verify_omega_path(gm, path, nullptr, PathOp::Gamma);
    if (!rep.pass)
      throw PreconditionError("path does not strictly decrease the gain map");

    std::vector<double> s(n);
    std::vector<double> weights(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = path.components[i].linear_coeff();
      weights[i] = 1.0 / s[i];
    }
    double rho_c = 0.0, sigma_c = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j)
        if (gm.internal[i][j])
          rho_c = std::max(rho_c, gm.coeff(i, j) * s[j] / s[i]);
      if (gm.input[i]) sigma_c = std::max(sigma_c, gm.input_coeff(i) / s[i]);
    }

    cert.v = VSpec::block_max(norm, weights);
    cert.rho = rho_c > 0.0 ? ScalarFn::linear(rho_c) : ScalarFn::zero();
    cert.sigma = sigma_c > 0.0 ? ScalarFn::linear(sigma_c) : ScalarFn::zero();
    const double wmin = *std::min_element(weights.begin(), weights.end());
    const double wmax = *std::max_element(weights.begin(), weights.end());
    cert.alpha1 = ScalarFn::linear(wmin / kappa);
    cert.alpha2 = ScalarFn::linear(wmax);

    const auto rate = check_certificate_rate(cert);
    if (!rate.pass)
      throw ConstructionError(
          "id - rho fails the Kinf check; the composed rate does not contract");
    return cert;
  }

  // robust route with a diagonal operator
  if (D->n() != gm.n) throw DimensionError("diagonal operator dimension mismatch");
  const bool sum_form = gm.form == GainForm::Sum;
  if (sum_form && !D->factors)
    throw PreconditionError(
        "sum-form composition needs a factored diagonal operator");

  const auto rep = verify_omega_path(
      gm, path, D, sum_form ? PathOp::D1GammaD2 : PathOp::GammaD);
  if (!rep.pass)
    throw PreconditionError(
        "path does not strictly decrease the composed gain operator");

  const auto ah = check_alphahat(path, *D,
                                 sum_form ? AlphaHatWhich::FactorD2
                                          : AlphaHatWhich::FullD);
  if (!ah.pass)
    throw ConstructionError(
        "robustness gaps of the diagonal operator are not Kinf; composition "
        "refused");

  auto d_inv = [&](size_t i) {
    return sum_form ? invert(D->d2_fn(i)) : D->d_inv_fn(i);
  };

  std::vector<ScalarFn> wrappers;
  std::vector<ScalarFn> rho_terms, alpha2_terms, alpha1_terms;
  for (size_t i = 0; i < n; ++i) {
    const ScalarFn wrap = compose(path.inverses[i], d_inv(i));
    wrappers.push_back(wrap);
    rho_terms.push_back(compose(wrap, path.components[i]));
    alpha2_terms.push_back(wrap);
    alpha1_terms.push_back(compose(wrap, ScalarFn::linear(1.0 / kappa)));
  }
  cert.rho = pointwise_max(rho_terms);

  // input offset
  std::vector<ScalarFn> sigma_terms;
  if (sum_form) {
    // sigma = max_i (id - alphahat_i) o phi^{-1}, phi = min_i phi_i
    std::vector<ScalarFn> phis;
    for (size_t i = 0; i < n; ++i) {
      ScalarFn giu_inv = gm.input[i] ? invert(*gm.input[i])
                                     : ScalarFn::identity();
      bool has_internal = false;
      std::vector<ScalarFn> inner;
      for (size_t j = 0; j < n; ++j)
        if (gm.internal[i][j]) {
          has_internal = true;
          inner.push_back(compose(*gm.internal[i][j],
                                  compose(D->d2_fn(j), path.components[j])));
        }
      if (has_internal) {
        const auto& f1 = D->factors->first;
        const ScalarFn d1gap = f1[i] ? *f1[i] : ScalarFn::zero();
        if (d1gap.is_zero())
          throw PreconditionError(
              "sum-form composition needs strictly expanding first factors");
        phis.push_back(compose(giu_inv,
                               compose(d1gap.with_declared(FnClass::Kinf),
                                       pointwise_max(inner))));
      } else {
        phis.push_back(scale(0.5, compose(giu_inv, path.components[i])));
      }
    }
    const ScalarFn phi_inv = invert(pointwise_min(phis).with_declared(FnClass::Kinf));
    for (size_t i = 0; i < n; ++i)
      sigma_terms.push_back(compose(rho_terms[i], phi_inv));
  } else {
    for (size_t i = 0; i < n; ++i)
      if (gm.input[i])
        sigma_terms.push_back(compose(wrappers[i], *gm.input[i]));
  }
  cert.sigma = sigma_terms.empty() ? ScalarFn::zero()
                                   : pointwise_max(sigma_terms);

  // collapse to plain weights when every piece is linear
  bool all_linear = true;
  for (const auto& w : wrappers) all_linear &= w.is_linear();
  if (all_linear) {
    std::vector<double> weights;
    weights.reserve(n);
    for (const auto& w : wrappers) weights.push_back(w.linear_coeff());
    cert.v = VSpec::block_max(norm, weights);
  } else {
    cert.v = VSpec::composed_block_max(norm, wrappers);
  }
  cert.alpha1 = pointwise_min(alpha1_terms);
  cert.alpha2 = pointwise_max(alpha2_terms);

  const auto rate = check_certificate_rate(cert);
  if (!rate.pass)
    throw ConstructionError(
        "id - rho fails the Kinf check; the composed rate does not contract");
  return cert;
}

}  // namespace fsiss
