#pragma once

/**
 * @file scalar_fn.hpp
 * @brief Expression-tree algebra of scalar comparison functions.
 *
 * A ScalarFn is an immutable expression tree over one nonnegative variable
 * with f(0) = 0 guaranteed structurally (there is no constant-offset node).
 * Construction, evaluation, composition, numeric inversion and grid-based
 * class checking live here. The textual grammar (see docs/formats.md):
 *
 *   lin 0.89      max(lin 0.89, comp(lin 0.3, sq_over_1p))     pow 2
 *   id  zero  sq_over_1p  expm1  log1p  expsat
 *   sum(f, g, ...)  min(f, g, ...)  comp(f, g)  inv(f)  sub(f, g)
 *   pwll(r0:v0, r1:v1, ...)         phisol(lambda, g)
 *
 * Class checking is grid-based, not symbolic: verdicts certify behaviour on
 * the probe grid and report witnesses. Ties between numerically
 * indistinguishable neighbouring values (saturation, overflow) are recorded
 * but not treated as monotonicity failures; any decrease fails.
 */

#include <cctype>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fsiss/common.hpp"

namespace fsiss {

enum class FnClass { PosDef, K, Kinf, Linear };

inline std::string to_string(FnClass c) {
  switch (c) {
    case FnClass::PosDef: return "posdef";
    case FnClass::K: return "K";
    case FnClass::Kinf: return "Kinf";
    case FnClass::Linear: return "linear";
  }
  return "posdef";
}

namespace detail {

enum class NodeKind {
  Zero,
  Linear,
  Power,
  SqOver1p,
  Expm1,
  Log1p,
  Expsat,
  Sum,
  Max,
  Min,
  Sub,
  Compose,
  Inverse,
  Pwll,
  PhiSol,
};

struct FnNode {
  NodeKind kind;
  double a = 0.0;  // coefficient / exponent / lambda
  double b = 0.0;  // PhiSol: g(1)
  std::vector<std::shared_ptr<const FnNode>> kids;
  std::vector<double> kr, kv;  // Pwll knots (abscissae, values), ascending

  explicit FnNode(NodeKind k) : kind(k) {}
};

using NodePtr = std::shared_ptr<const FnNode>;

inline double eval_node(const FnNode& n, double s);

inline double bisect_inverse(const FnNode& f, double y) {
  if (y == 0.0) return 0.0;
  if (std::isinf(y)) return y;  // sup-extension of a monotone inverse
  double lo = 0.0, hi = std::max(1.0, y);
  int grow = 0;
  while (eval_node(f, hi) < y) {
    lo = hi;
    hi *= 4.0;
    if (++grow > 200)
      throw ConvergenceError("inverse bracket expansion exhausted");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eval_node(f, mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double eval_pwll(const FnNode& n, double s) {
  if (s == 0.0) return 0.0;
  const auto& r = n.kr;
  const auto& v = n.kv;
  const size_t K = r.size();
  if (K == 1) return v[0] * (s / r[0]);
  auto seg_value = [&](size_t k, double ls) {
    const double lr0 = std::log(r[k]), lr1 = std::log(r[k + 1]);
    const double lv0 = std::log(v[k]), lv1 = std::log(v[k + 1]);
    const double t = (ls - lr0) / (lr1 - lr0);
    return std::exp(lv0 + t * (lv1 - lv0));
  };
  const double ls = std::log(s);
  if (s <= r.front()) return seg_value(0, ls);
  if (s >= r.back()) return seg_value(K - 2, ls);
  size_t lo = 0, hi = K - 1;
  while (hi - lo > 1) {
    const size_t mid = (lo + hi) / 2;
    if (r[mid] <= s)
      lo = mid;
    else
      hi = mid;
  }
  return seg_value(lo, ls);
}

inline double eval_phisol(const FnNode& n, double s) {
  if (s == 0.0) return 0.0;
  const double lambda = n.a, g1 = n.b;
  const FnNode& g = *n.kids[0];
  const FnNode& ginv = *n.kids[1];
  auto seed = [&](double t) {
    return 1.0 + (lambda - 1.0) * (t - 1.0) / (g1 - 1.0);
  };
  // slowly-expanding maps need about 1/s steps to carry tiny arguments into
  // the seed interval; the cap keeps a single evaluation under ~50 ms
  double level = 1.0;
  long steps = 0;
  while (s < 1.0) {
    s = eval_node(g, s);
    level /= lambda;
    if (++steps > 5000000)
      throw ConvergenceError("functional-equation recursion too deep");
  }
  while (s >= g1) {
    s = eval_node(ginv, s);
    level *= lambda;
    if (++steps > 5000000)
      throw ConvergenceError("functional-equation recursion too deep");
  }
  return level * seed(s);
}

inline double eval_node(const FnNode& n, double s) {
  switch (n.kind) {
    case NodeKind::Zero: return 0.0;
    case NodeKind::Linear: return n.a * s;
    case NodeKind::Power: return std::pow(s, n.a);
    case NodeKind::SqOver1p: return s * s / (1.0 + s * s);
    case NodeKind::Expm1: return std::expm1(s);
    case NodeKind::Log1p: return std::log1p(s);
    case NodeKind::Expsat: return s - s * std::exp(-s);
    case NodeKind::Sum: {
      double acc = 0.0;
      for (const auto& k : n.kids) acc += eval_node(*k, s);
      return acc;
    }
    case NodeKind::Max: {
      double acc = -std::numeric_limits<double>::infinity();
      for (const auto& k : n.kids) acc = std::max(acc, eval_node(*k, s));
      return acc;
    }
    case NodeKind::Min: {
      double acc = std::numeric_limits<double>::infinity();
      for (const auto& k : n.kids) acc = std::min(acc, eval_node(*k, s));
      return acc;
    }
    case NodeKind::Sub:
      return eval_node(*n.kids[0], s) - eval_node(*n.kids[1], s);
    case NodeKind::Compose:
      return eval_node(*n.kids[0], eval_node(*n.kids[1], s));
    case NodeKind::Inverse: return bisect_inverse(*n.kids[0], s);
    case NodeKind::Pwll: return eval_pwll(n, s);
    case NodeKind::PhiSol: return eval_phisol(n, s);
  }
  return 0.0;
}

inline int class_rank(FnClass c) {
  switch (c) {
    case FnClass::PosDef: return 0;
    case FnClass::K: return 1;
    case FnClass::Kinf: return 2;
    case FnClass::Linear: return 3;
  }
  return 0;
}

inline FnClass meet_class(FnClass a, FnClass b) {
  return class_rank(a) <= class_rank(b) ? a : b;
}

}  // namespace detail

class ScalarFn {
 public:
  ScalarFn() : node_(zero().node_), cls_(FnClass::PosDef) {}

  double operator()(double s) const {
    if (s < 0.0) throw DomainError("comparison functions take s >= 0");
    return detail::eval_node(*node_, s);
  }

  FnClass declared() const { return cls_; }

  /// Same tree with a different declared class. A declaration is a checkable
  /// claim (see check_class), not a structural guarantee.
  ScalarFn with_declared(FnClass c) const { return ScalarFn(node_, c); }

  bool is_zero() const { return node_->kind == detail::NodeKind::Zero; }
  bool is_linear() const { return node_->kind == detail::NodeKind::Linear; }

  /// Coefficient c of a Linear node (f(s) = c*s).
  double linear_coeff() const {
    if (!is_linear()) throw ClassError("function is not in linear form");
    return node_->a;
  }

  /// Recognizes a*s^p shapes: lin a, pow p, comp(lin a, pow p).
  std::optional<std::pair<double, double>> as_scaled_power() const {
    using detail::NodeKind;
    if (node_->kind == NodeKind::Linear) return {{node_->a, 1.0}};
    if (node_->kind == NodeKind::Power) return {{1.0, node_->a}};
    if (node_->kind == NodeKind::Compose &&
        node_->kids[0]->kind == NodeKind::Linear &&
        node_->kids[1]->kind == NodeKind::Power)
      return {{node_->kids[0]->a, node_->kids[1]->a}};
    return std::nullopt;
  }

  std::string to_string() const;

  // -- factories ------------------------------------------------------------

  static ScalarFn zero() {
    return ScalarFn(make(detail::NodeKind::Zero), FnClass::PosDef);
  }

  static ScalarFn linear(double c) {
    if (!(c > 0.0)) throw RangeError("linear coefficient must be positive");
    auto n = make(detail::NodeKind::Linear);
    n->a = c;
    return ScalarFn(std::move(n), FnClass::Linear);
  }

  static ScalarFn identity() { return linear(1.0); }

  static ScalarFn power(double p) {
    if (!(p > 0.0)) throw RangeError("power exponent must be positive");
    auto n = make(detail::NodeKind::Power);
    n->a = p;
    return ScalarFn(std::move(n), FnClass::Kinf);
  }

  static ScalarFn sq_over_1p() {
    return ScalarFn(make(detail::NodeKind::SqOver1p), FnClass::K);
  }

  static ScalarFn expm1_fn() {
    return ScalarFn(make(detail::NodeKind::Expm1), FnClass::Kinf);
  }

  static ScalarFn log1p_fn() {
    return ScalarFn(make(detail::NodeKind::Log1p), FnClass::K);
  }

  /// s * (1 - e^{-s}): strictly increasing, gap to the identity is bounded.
  static ScalarFn expsat() {
    return ScalarFn(make(detail::NodeKind::Expsat), FnClass::K);
  }

  /// Piecewise log-linear function through the given (r, v) knots, extended
  /// beyond the knot range with the boundary segment slopes; f(0) = 0 by the
  /// limit convention. Knot abscissae strictly ascending, values positive and
  /// nondecreasing.
  static ScalarFn piecewise_loglin(const std::vector<double>& r,
                                   const std::vector<double>& v) {
    if (r.empty() || r.size() != v.size())
      throw ConstructionError("piecewise function needs matching knot lists");
    for (size_t i = 0; i < r.size(); ++i) {
      if (!(r[i] > 0.0) || !(v[i] > 0.0))
        throw ConstructionError("piecewise knots must be positive");
      if (i > 0 && !(r[i] > r[i - 1]))
        throw ConstructionError("piecewise knot abscissae must ascend");
      if (i > 0 && v[i] < v[i - 1])
        throw ConstructionError("piecewise knot values must not decrease");
    }
    auto n = make(detail::NodeKind::Pwll);
    n->kr = r;
    n->kv = v;
    return ScalarFn(std::move(n), FnClass::Kinf);
  }

  /// Raw constructor of the functional-equation solution node for
  /// phi(g(s)) = lambda * phi(s); g must already be the doubled map and
  /// invertible. solve_phi() wraps this with the precondition checks.
  static ScalarFn functional_eq_solution(const ScalarFn& g, double lambda);

  static ScalarFn parse(std::string_view text);

  friend ScalarFn compose(const ScalarFn& f, const ScalarFn& g);
  friend ScalarFn invert(const ScalarFn& f);
  friend ScalarFn pointwise_max(const std::vector<ScalarFn>& fs);
  friend ScalarFn pointwise_min(const std::vector<ScalarFn>& fs);
  friend ScalarFn add(const std::vector<ScalarFn>& fs);
  friend ScalarFn sub(const ScalarFn& f, const ScalarFn& g);
  friend ScalarFn solve_phi(const ScalarFn& omega1, double lambda);

 private:
  static std::shared_ptr<detail::FnNode> make(detail::NodeKind k) {
    return std::make_shared<detail::FnNode>(k);
  }
  ScalarFn(detail::NodePtr n, FnClass c) : node_(std::move(n)), cls_(c) {}

  detail::NodePtr node_;
  FnClass cls_;
};

inline double eval(const ScalarFn& f, double s) { return f(s); }

// -- algebra ---------------------------------------------------------------

inline ScalarFn compose(const ScalarFn& f, const ScalarFn& g) {
  if (f.declared() == FnClass::PosDef || g.declared() == FnClass::PosDef)
    throw ClassError("composition needs class-K (or better) arguments");
  if (f.is_linear() && g.is_linear())
    return ScalarFn::linear(f.linear_coeff() * g.linear_coeff());
  auto n = ScalarFn::make(detail::NodeKind::Compose);
  n->kids = {f.node_, g.node_};
  FnClass c = detail::meet_class(f.declared(), g.declared());
  if (c == FnClass::Linear) c = FnClass::Kinf;
  return ScalarFn(std::move(n), c);
}

inline ScalarFn scale(double c, const ScalarFn& f) {
  return compose(ScalarFn::linear(c), f);
}

inline ScalarFn invert(const ScalarFn& f) {
  using detail::NodeKind;
  if (f.declared() != FnClass::Kinf && f.declared() != FnClass::Linear)
    throw ClassError("only Kinf (or linear) functions are inverted");
  if (f.is_linear()) return ScalarFn::linear(1.0 / f.linear_coeff());
  switch (f.node_->kind) {
    case NodeKind::Power: return ScalarFn::power(1.0 / f.node_->a);
    case NodeKind::Expm1:
      return ScalarFn(ScalarFn::make(NodeKind::Log1p), FnClass::Kinf);
    case NodeKind::Inverse: return ScalarFn(f.node_->kids[0], FnClass::Kinf);
    case NodeKind::Pwll: {
      const auto& v = f.node_->kv;
      bool strict = true;
      for (size_t i = 1; i < v.size(); ++i) strict &= v[i] > v[i - 1];
      if (strict) {
        auto n = ScalarFn::make(NodeKind::Pwll);
        n->kr = f.node_->kv;
        n->kv = f.node_->kr;
        return ScalarFn(std::move(n), FnClass::Kinf);
      }
      break;
    }
    default: break;
  }
  auto n = ScalarFn::make(NodeKind::Inverse);
  n->kids = {f.node_};
  return ScalarFn(std::move(n), FnClass::Kinf);
}

namespace detail {
inline FnClass list_class(const std::vector<ScalarFn>& fs) {
  FnClass c = FnClass::Linear;
  for (const auto& f : fs) c = meet_class(c, f.declared());
  if (c == FnClass::Linear) c = FnClass::Kinf;  // max/min/sum of linears
  return c;
}
}  // namespace detail

inline ScalarFn pointwise_max(const std::vector<ScalarFn>& fs) {
  if (fs.empty()) throw RangeError("pointwise max of an empty list");
  if (fs.size() == 1) return fs[0];
  auto n = ScalarFn::make(detail::NodeKind::Max);
  for (const auto& f : fs) n->kids.push_back(f.node_);
  return ScalarFn(std::move(n), detail::list_class(fs));
}

inline ScalarFn pointwise_min(const std::vector<ScalarFn>& fs) {
  if (fs.empty()) throw RangeError("pointwise min of an empty list");
  if (fs.size() == 1) return fs[0];
  auto n = ScalarFn::make(detail::NodeKind::Min);
  for (const auto& f : fs) n->kids.push_back(f.node_);
  return ScalarFn(std::move(n), detail::list_class(fs));
}

inline ScalarFn add(const std::vector<ScalarFn>& fs) {
  if (fs.empty()) throw RangeError("sum of an empty list");
  if (fs.size() == 1) return fs[0];
  bool all_linear = true;
  double coeff = 0.0;
  for (const auto& f : fs) {
    all_linear &= f.is_linear();
    if (all_linear) coeff += f.linear_coeff();
  }
  if (all_linear) return ScalarFn::linear(coeff);
  auto n = ScalarFn::make(detail::NodeKind::Sum);
  for (const auto& f : fs) n->kids.push_back(f.node_);
  return ScalarFn(std::move(n), detail::list_class(fs));
}

/// Difference f - g. The result may take negative values; it is meant for gap
/// checks (claims about it are verified by check_class, never assumed).
inline ScalarFn sub(const ScalarFn& f, const ScalarFn& g) {
  auto n = ScalarFn::make(detail::NodeKind::Sub);
  n->kids = {f.node_, g.node_};
  return ScalarFn(std::move(n), FnClass::PosDef);
}

inline ScalarFn ScalarFn::functional_eq_solution(const ScalarFn& g,
                                                 double lambda) {
  if (!(lambda > 1.0)) throw RangeError("functional equation needs lambda > 1");
  const double g1 = g(1.0);
  if (!(g1 > 1.0))
    throw PreconditionError("functional equation needs g(1) > 1");
  auto n = make(detail::NodeKind::PhiSol);
  n->a = lambda;
  n->b = g1;
  n->kids = {g.node_, invert(g).node_};
  return ScalarFn(std::move(n), FnClass::Kinf);
}

// -- class checking ---------------------------------------------------------

struct ClassWitness {
  std::string what;
  double s1 = 0.0, f1 = 0.0, s2 = 0.0, f2 = 0.0;
};

struct ClassReport {
  bool pass = false;
  FnClass claimed = FnClass::PosDef;
  int strict_pairs = 0;
  int tied_pairs = 0;
  std::vector<ClassWitness> witnesses;
};

/**
 * Grid-based class verification: monotonicity on 256 log-spaced points over
 * [1e-8, 1e8]; Kinf additionally requires f(1e8) > 1e4. Failures carry
 * witness points. Decreasing pairs always fail; exact ties (saturation at
 * the double-precision resolution) are counted separately and at least one
 * strictly increasing pair is required.
 */
inline ClassReport check_class(const ScalarFn& f, FnClass claimed) {
  ClassReport rep;
  rep.claimed = claimed;
  const auto grid = logspace(Defaults::class_grid_lo, Defaults::class_grid_hi,
                             Defaults::class_grid_points);
  std::vector<double> vals(grid.size());
  auto witness = [&rep](std::string what, double s1, double f1, double s2 = 0,
                        double f2 = 0) {
    if (rep.witnesses.size() < 8)
      rep.witnesses.push_back({std::move(what), s1, f1, s2, f2});
  };

  const double f0 = f(0.0);
  if (f0 != 0.0) witness("f(0) != 0", 0.0, f0);

  for (size_t i = 0; i < grid.size(); ++i) {
    vals[i] = f(grid[i]);
    if (std::isnan(vals[i])) witness("non-finite value", grid[i], vals[i]);
  }
  for (size_t i = 0; i < grid.size(); ++i)
    if (!(vals[i] > 0.0) && !std::isnan(vals[i]))
      witness("not positive", grid[i], vals[i]);

  if (claimed != FnClass::PosDef) {
    for (size_t i = 1; i < grid.size(); ++i) {
      if (std::isnan(vals[i]) || std::isnan(vals[i - 1])) continue;
      if (vals[i] < vals[i - 1])
        witness("decreasing", grid[i - 1], vals[i - 1], grid[i], vals[i]);
      else if (vals[i] == vals[i - 1])
        ++rep.tied_pairs;
      else
        ++rep.strict_pairs;
    }
    if (rep.strict_pairs == 0)
      witness("no strict increase on the grid", grid.front(), vals.front(),
              grid.back(), vals.back());
  }

  if (claimed == FnClass::Kinf || claimed == FnClass::Linear) {
    const double probe = f(Defaults::unbounded_probe);
    if (!(probe > Defaults::unbounded_floor))
      witness("bounded at the unboundedness probe", Defaults::unbounded_probe,
              probe);
  }

  if (claimed == FnClass::Linear) {
    const double c = f(1.0);
    if (!(c > 0.0)) witness("f(1) not positive", 1.0, c);
    for (size_t i = 0; i < grid.size(); ++i) {
      const double want = c * grid[i];
      if (!approx_rel(vals[i], want, 1e-9)) {
        witness("not proportional", grid[i], vals[i], grid[i], want);
        break;
      }
    }
  }

  rep.pass = rep.witnesses.empty();
  return rep;
}

// -- functional-equation solver ----------------------------------------------

/**
 * Solves phi(2*omega1(s)) = lambda * phi(s) for a Kinf phi, seeded on the
 * fundamental interval [1, 2*omega1(1)) by the affine segment matching the
 * interval endpoints (which keeps phi continuous and strictly increasing),
 * and extended both ways by the equation itself.
 */
inline ScalarFn solve_phi(const ScalarFn& omega1, double lambda) {
  if (!(lambda > 1.0)) throw RangeError("solve_phi needs lambda > 1");
  const ScalarFn g = scale(2.0, omega1);
  const auto gap = check_class(sub(g, ScalarFn::identity()), FnClass::Kinf);
  if (!gap.pass)
    throw PreconditionError("2*omega1 - id fails the Kinf grid check");
  ScalarFn phi = ScalarFn::functional_eq_solution(g, lambda);

  // residual and monotonicity on the solver's probe grid (values may
  // underflow to zero near the origin for fast-contracting maps, so exact
  // ties are tolerated there); unboundedness holds by construction
  // (phi(g^k(1)) = lambda^k)
  const auto grid = logspace(1e-6, 1e6, 128);
  double prev = 0.0;
  int strict = 0;
  for (double s : grid) {
    const double value = phi(s);
    if (value < prev)
      throw ConstructionError("solution decreases at s=" + fmt_g17(s));
    if (value > prev) ++strict;
    prev = value;
    const double lhs = phi(g(s));
    const double rhs = lambda * value;
    if (std::abs(lhs - rhs) > Defaults::funceq_tol * (1.0 + rhs))
      throw ConstructionError("functional-equation residual too large at s=" +
                              fmt_g17(s));
  }
  if (strict == 0)
    throw ConstructionError("solution is numerically flat on the probe grid");
  return phi;
}

// -- parsing / printing -------------------------------------------------------

namespace detail {

struct FnLexer {
  std::string_view s;
  size_t pos = 0;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
  }
  bool eof() {
    skip();
    return pos >= s.size();
  }
  char peek() {
    skip();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool accept(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c))
      throw ParseError("expected '" + std::string(1, c) + "' at offset " +
                       std::to_string(pos) + " in function expression");
  }
  std::string ident() {
    skip();
    size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    if (start == pos) throw ParseError("expected a name in function expression");
    return std::string(s.substr(start, pos - start));
  }
  double number() {
    skip();
    size_t start = pos;
    while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) ||
                              s[pos] == '.' || s[pos] == '-' || s[pos] == '+' ||
                              s[pos] == 'e' || s[pos] == 'E'))
      ++pos;
    try {
      size_t used = 0;
      const std::string tok(s.substr(start, pos - start));
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ParseError("bad number at offset " + std::to_string(start));
    }
  }
};

inline ScalarFn parse_fn(FnLexer& lx);

inline std::vector<ScalarFn> parse_fn_list(FnLexer& lx) {
  std::vector<ScalarFn> fs;
  lx.expect('(');
  fs.push_back(parse_fn(lx));
  while (lx.accept(',')) fs.push_back(parse_fn(lx));
  lx.expect(')');
  return fs;
}

inline ScalarFn parse_fn(FnLexer& lx) {
  const std::string name = lx.ident();
  if (name == "lin") return ScalarFn::linear(lx.number());
  if (name == "pow") return ScalarFn::power(lx.number());
  if (name == "id") return ScalarFn::identity();
  if (name == "zero") return ScalarFn::zero();
  if (name == "sq_over_1p") return ScalarFn::sq_over_1p();
  if (name == "expm1") return ScalarFn::expm1_fn();
  if (name == "log1p") return ScalarFn::log1p_fn();
  if (name == "expsat") return ScalarFn::expsat();
  if (name == "sum") return add(parse_fn_list(lx));
  if (name == "max") return pointwise_max(parse_fn_list(lx));
  if (name == "min") return pointwise_min(parse_fn_list(lx));
  if (name == "comp") {
    auto fs = parse_fn_list(lx);
    if (fs.size() != 2) throw ParseError("comp takes exactly two arguments");
    return compose(fs[0], fs[1]);
  }
  if (name == "sub") {
    auto fs = parse_fn_list(lx);
    if (fs.size() != 2) throw ParseError("sub takes exactly two arguments");
    return sub(fs[0], fs[1]);
  }
  if (name == "inv") {
    auto fs = parse_fn_list(lx);
    if (fs.size() != 1) throw ParseError("inv takes exactly one argument");
    return invert(fs[0]);
  }
  if (name == "pwll") {
    lx.expect('(');
    std::vector<double> r, v;
    do {
      r.push_back(lx.number());
      lx.expect(':');
      v.push_back(lx.number());
    } while (lx.accept(','));
    lx.expect(')');
    return ScalarFn::piecewise_loglin(r, v);
  }
  if (name == "phisol") {
    lx.expect('(');
    const double lambda = lx.number();
    lx.expect(',');
    const ScalarFn g2 = parse_fn(lx);  // the already-doubled map
    lx.expect(')');
    return ScalarFn::functional_eq_solution(g2, lambda);
  }
  throw ParseError("unknown function '" + name + "'");
}

inline void print_fn(const FnNode& n, std::ostream& os) {
  auto list = [&os](const FnNode& p, const char* name) {
    os << name << '(';
    for (size_t i = 0; i < p.kids.size(); ++i) {
      if (i) os << ", ";
      print_fn(*p.kids[i], os);
    }
    os << ')';
  };
  switch (n.kind) {
    case NodeKind::Zero: os << "zero"; break;
    case NodeKind::Linear:
      if (n.a == 1.0)
        os << "id";
      else
        os << "lin " << fmt_g17(n.a);
      break;
    case NodeKind::Power: os << "pow " << fmt_g17(n.a); break;
    case NodeKind::SqOver1p: os << "sq_over_1p"; break;
    case NodeKind::Expm1: os << "expm1"; break;
    case NodeKind::Log1p: os << "log1p"; break;
    case NodeKind::Expsat: os << "expsat"; break;
    case NodeKind::Sum: list(n, "sum"); break;
    case NodeKind::Max: list(n, "max"); break;
    case NodeKind::Min: list(n, "min"); break;
    case NodeKind::Sub: list(n, "sub"); break;
    case NodeKind::Compose: list(n, "comp"); break;
    case NodeKind::Inverse: list(n, "inv"); break;
    case NodeKind::Pwll:
      os << "pwll(";
      for (size_t i = 0; i < n.kr.size(); ++i) {
        if (i) os << ", ";
        os << fmt_g17(n.kr[i]) << ':' << fmt_g17(n.kv[i]);
      }
      os << ')';
      break;
    case NodeKind::PhiSol:
      os << "phisol(" << fmt_g17(n.a) << ", ";
      print_fn(*n.kids[0], os);
      os << ')';
      break;
  }
}

}  // namespace detail

inline std::string ScalarFn::to_string() const {
  std::ostringstream os;
  detail::print_fn(*node_, os);
  return os.str();
}

inline ScalarFn ScalarFn::parse(std::string_view text) {
  detail::FnLexer lx{text};
  ScalarFn f = detail::parse_fn(lx);
  if (!lx.eof())
    throw ParseError("trailing characters in function expression");
  return f;
}

}  // namespace fsiss
