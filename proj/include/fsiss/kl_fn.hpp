#pragma once

/**
 * @file kl_fn.hpp
 * @brief KL-class decay functions built from a contraction chi < id.
 *
 * KLFn interpolates the iterates chi^l(s) affinely in the time argument over
 * the knot schedule t_{k0,l} = l*M + k0, so beta(s, t_{k0,l}) = chi^l(s)
 * holds exactly at the knots. ExpDecayBound is the closed-form exponential
 * variant for linear chi(s) = theta*s.
 */

#include <cmath>

#include "fsiss/common.hpp"
#include "fsiss/scalar_fn.hpp"

namespace fsiss {

class KLFn {
 public:
  KLFn(ScalarFn chi, int m, int k0)
      : chi_(std::move(chi)), chi_inv_(invert(chi_)), m_(m), k0_(k0) {}

  /// beta(s, t); class-K in s for fixed t, strictly decreasing to 0 in t.
  double operator()(double s, double t) const {
    if (s < 0.0 || t < 0.0) throw DomainError("KL function takes s, t >= 0");
    if (s == 0.0) return 0.0;
    const double t0 = static_cast<double>(k0_);
    if (t < t0) {
      // leading ramp from chi^{-1}(s) down to s at the first knot
      return ((t0 - t) * chi_inv_(s) + (t + m_ - k0_) * s) / m_;
    }
    double l_real = std::floor((t - t0) / m_);
    const int l = static_cast<int>(l_real);
    const double tl = t0 + static_cast<double>(l) * m_;
    const double vl = iterate_chi(s, l);
    if (t == tl) return vl;  // exact knot identity
    const double vl1 = chi_(vl);
    return ((tl + m_ - t) * vl + (t - tl) * vl1) / m_;
  }

  double knot_value(double s, int l) const { return iterate_chi(s, l); }
  int horizon() const { return m_; }
  int offset() const { return k0_; }
  const ScalarFn& contraction() const { return chi_; }

 private:
  double iterate_chi(double s, int l) const {
    double v = s;
    for (int i = 0; i < l; ++i) v = chi_(v);
    return v;
  }

  ScalarFn chi_;
  ScalarFn chi_inv_;
  int m_;
  int k0_;
};

/// Builds the KL interpolant for a Kinf contraction chi < id (checked on the
/// probe grid).
inline KLFn build_kl(const ScalarFn& chi, int m, int k0) {
  if (m < 1) throw RangeError("build_kl needs M >= 1");
  if (k0 < 0 || k0 >= m) throw RangeError("build_kl needs k0 in [0, M)");
  const auto cls = check_class(chi, FnClass::Kinf);
  if (!cls.pass) throw PreconditionError("chi fails the Kinf grid check");
  const auto grid = logspace(Defaults::class_grid_lo, Defaults::class_grid_hi,
                             Defaults::class_grid_points);
  for (double s : grid)
    if (!(chi(s) < s))
      throw PreconditionError("chi >= id at s = " + fmt_g17(s));
  return KLFn(chi, m, k0);
}

/// Exponential decay envelope (ymax / theta) * theta^{k/M}.
struct ExpDecayBound {
  double theta;
  int m;

  double operator()(double ymax, double k) const {
    return ymax / theta * std::pow(theta, k / static_cast<double>(m));
  }
};

inline ExpDecayBound build_kl_exp(double theta, int m) {
  if (!(theta > 0.0 && theta < 1.0))
    throw RangeError("build_kl_exp needs theta in (0,1)");
  if (m < 1) throw RangeError("build_kl_exp needs M >= 1");
  return ExpDecayBound{theta, m};
}

}  // namespace fsiss
