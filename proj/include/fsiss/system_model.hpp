#pragma once

/**
 * @file system_model.hpp
 * @brief Expression-defined discrete-time systems and their simulation.
 *
 * Update maps are written in a deliberately tiny infix grammar over the state
 * variables x1..xn and inputs u1..um:
 *
 *   + - * / ( )  abs(e)  min(e,...)  max(e,...)  pow(e, p)  sq_over_1p(e)
 *   exp(e)  numeric literals
 *
 * Evaluation order is fixed (left-to-right), so trajectories are reproducible
 * bit for bit across runs. Systems must fix the origin: |G(0,0)| <= 1e-12
 * componentwise is enforced at construction.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsiss/common.hpp"
#include "fsiss/linprog.hpp"
#include "fsiss/rng.hpp"
#include "fsiss/sampling.hpp"
#include "fsiss/scalar_fn.hpp"

namespace fsiss {

namespace sysexpr {

enum class Op {
  Const,
  VarX,
  VarU,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Abs,
  Min,
  Max,
  Pow,
  SqOver1p,
  Exp,
};

struct Node {
  Op op = Op::Const;
  double value = 0.0;  // Const literal or Pow exponent
  int index = 0;       // VarX / VarU (0-based)
  std::vector<Node> kids;

  Node() = default;
  explicit Node(Op o) : op(o) {}
};

inline double eval(const Node& n, std::span<const double> x,
                   std::span<const double> u) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::VarX: return x[static_cast<size_t>(n.index)];
    case Op::VarU: return u[static_cast<size_t>(n.index)];
    case Op::Add: return eval(n.kids[0], x, u) + eval(n.kids[1], x, u);
    case Op::Sub: return eval(n.kids[0], x, u) - eval(n.kids[1], x, u);
    case Op::Mul: return eval(n.kids[0], x, u) * eval(n.kids[1], x, u);
    case Op::Div: {
      const double num = eval(n.kids[0], x, u);
      const double den = eval(n.kids[1], x, u);
      if (den == 0.0) throw EvalError("division by zero in update expression");
      return num / den;
    }
    case Op::Neg: return -eval(n.kids[0], x, u);
    case Op::Abs: return std::abs(eval(n.kids[0], x, u));
    case Op::Min: {
      double acc = std::numeric_limits<double>::infinity();
      for (const auto& k : n.kids) acc = std::min(acc, eval(k, x, u));
      return acc;
    }
    case Op::Max: {
      double acc = -std::numeric_limits<double>::infinity();
      for (const auto& k : n.kids) acc = std::max(acc, eval(k, x, u));
      return acc;
    }
    case Op::Pow: return std::pow(eval(n.kids[0], x, u), n.value);
    case Op::SqOver1p: {
      const double t = eval(n.kids[0], x, u);
      return t * t / (1.0 + t * t);
    }
    case Op::Exp: return std::exp(eval(n.kids[0], x, u));
  }
  return 0.0;
}

struct Parser {
  std::string_view s;
  size_t pos = 0;
  int n, m;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
  }
  char peek() {
    skip();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool accept(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c))
      throw ParseError("expected '" + std::string(1, c) + "' at offset " +
                       std::to_string(pos));
  }

  Node parse() {
    Node e = expr();
    skip();
    if (pos != s.size())
      throw ParseError("trailing characters at offset " + std::to_string(pos));
    return e;
  }

  Node expr() {
    Node lhs = term();
    for (;;) {
      if (accept('+')) {
        Node n2{Op::Add};
        n2.kids = {std::move(lhs), term()};
        lhs = std::move(n2);
      } else if (accept('-')) {
        Node n2{Op::Sub};
        n2.kids = {std::move(lhs), term()};
        lhs = std::move(n2);
      } else {
        return lhs;
      }
    }
  }

  Node term() {
    Node lhs = factor();
    for (;;) {
      if (accept('*')) {
        Node n2{Op::Mul};
        n2.kids = {std::move(lhs), factor()};
        lhs = std::move(n2);
      } else if (accept('/')) {
        Node n2{Op::Div};
        n2.kids = {std::move(lhs), factor()};
        lhs = std::move(n2);
      } else {
        return lhs;
      }
    }
  }

  Node factor() {
    if (accept('-')) {
      Node n2{Op::Neg};
      n2.kids = {factor()};
      return n2;
    }
    return primary();
  }

  double number_literal() {
    skip();
    size_t start = pos;
    while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) ||
                              s[pos] == '.' || s[pos] == 'e' || s[pos] == 'E' ||
                              ((s[pos] == '+' || s[pos] == '-') && pos > start &&
                               (s[pos - 1] == 'e' || s[pos - 1] == 'E'))))
      ++pos;
    if (start == pos) throw ParseError("expected number at offset " +
                                       std::to_string(pos));
    return std::stod(std::string(s.substr(start, pos - start)));
  }

  Node primary() {
    skip();
    if (pos >= s.size()) throw ParseError("unexpected end of expression");
    const char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      Node n2{Op::Const};
      n2.value = number_literal();
      return n2;
    }
    if (c == '(') {
      ++pos;
      Node e = expr();
      expect(')');
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                                s[pos] == '_'))
        ++pos;
      const std::string name(s.substr(start, pos - start));
      if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u') &&
          std::isdigit(static_cast<unsigned char>(name[1]))) {
        const int idx = std::stoi(name.substr(1));
        const int lim = name[0] == 'x' ? n : m;
        if (idx < 1 || idx > lim)
          throw ParseError("variable '" + name + "' out of range");
        Node n2{name[0] == 'x' ? Op::VarX : Op::VarU};
        n2.index = idx - 1;
        return n2;
      }
      return function_call(name);
    }
    throw ParseError("unexpected character '" + std::string(1, c) +
                     "' at offset " + std::to_string(pos));
  }

  Node function_call(const std::string& name) {
    auto args = [this](size_t lo, size_t hi) {
      expect('(');
      std::vector<Node> as;
      as.push_back(expr());
      while (accept(',')) as.push_back(expr());
      expect(')');
      if (as.size() < lo || as.size() > hi)
        throw ParseError("wrong argument count for '" + std::string("fn") +
                         "'");
      return as;
    };
    if (name == "abs") {
      Node n2{Op::Abs};
      n2.kids = args(1, 1);
      return n2;
    }
    if (name == "min") {
      Node n2{Op::Min};
      n2.kids = args(2, 16);
      return n2;
    }
    if (name == "max") {
      Node n2{Op::Max};
      n2.kids = args(2, 16);
      return n2;
    }
    if (name == "sq_over_1p") {
      Node n2{Op::SqOver1p};
      n2.kids = args(1, 1);
      return n2;
    }
    if (name == "exp") {
      Node n2{Op::Exp};
      n2.kids = args(1, 1);
      return n2;
    }
    if (name == "pow") {
      expect('(');
      Node base = expr();
      expect(',');
      skip();
      bool neg = accept('-');
      double p = number_literal();
      if (neg) p = -p;
      expect(')');
      Node n2{Op::Pow};
      n2.value = p;
      n2.kids = {std::move(base)};
      return n2;
    }
    throw ParseError("unknown function '" + name + "' in update expression");
  }
};

}  // namespace sysexpr

class SystemModel {
 public:
  SystemModel(std::string name, int n, int m, std::vector<int> blocks,
              std::vector<std::string> updates, std::string description = "")
      : name_(std::move(name)),
        description_(std::move(description)),
        n_(n),
        m_(m),
        blocks_(std::move(blocks)),
        sources_(std::move(updates)) {
    if (n_ < 1 || m_ < 0) throw DimensionError("bad system dimensions");
    check_blocks(blocks_, n_);
    if (static_cast<int>(sources_.size()) != n_)
      throw DimensionError("need one update expression per state component");
    exprs_.reserve(sources_.size());
    for (const auto& src : sources_) {
      sysexpr::Parser p{src, 0, n_, m_};
      exprs_.push_back(p.parse());
    }
    offsets_ = block_offsets(blocks_);

    const std::vector<double> zx(static_cast<size_t>(n_), 0.0);
    const std::vector<double> zu(static_cast<size_t>(std::max(m_, 1)), 0.0);
    for (int i = 0; i < n_; ++i) {
      const double gi = sysexpr::eval(exprs_[static_cast<size_t>(i)], zx, zu);
      if (!(std::abs(gi) <= Defaults::origin_tol))
        throw ConstructionError("system does not fix the origin: |G(0,0)[" +
                                std::to_string(i + 1) +
                                "]| = " + fmt_g17(std::abs(gi)));
    }
  }

  const std::string& name() const { return name_; }
  const std::string& description() const { return description_; }
  int n() const { return n_; }
  int m() const { return m_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const std::vector<int>& blocks() const { return blocks_; }
  const std::vector<int>& offsets() const { return offsets_; }
  const std::vector<std::string>& update_sources() const { return sources_; }

  std::vector<double> step(std::span<const double> x,
                           std::span<const double> u) const {
    if (static_cast<int>(x.size()) != n_ ||
        static_cast<int>(u.size()) != std::max(m_, 0))
      throw DimensionError("step: state/input dimension mismatch");
    std::vector<double> out(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      const double v = sysexpr::eval(exprs_[static_cast<size_t>(i)], x, u);
      if (std::isnan(v))
        throw EvalError("update expression " + std::to_string(i + 1) +
                        " produced NaN");
      out[static_cast<size_t>(i)] = v;
    }
    return out;
  }

  SystemModel with_blocks(std::vector<int> blocks) const {
    return SystemModel(name_, n_, m_, std::move(blocks), sources_,
                       description_);
  }

 private:
  std::string name_, description_;
  int n_, m_;
  std::vector<int> blocks_;
  std::vector<std::string> sources_;
  std::vector<sysexpr::Node> exprs_;
  std::vector<int> offsets_;
};

// -- input signals ------------------------------------------------------------

/**
 * Input sequences used by simulation and falsification. The random kind mixes
 * in-ball draws with sign-corner steps at the bound (the corners are where
 * input-gain fits fail first).
 */
class InputSignal {
 public:
  enum class Kind { Zero, Constant, Random, Explicit };

  static InputSignal zero(int m) {
    InputSignal s;
    s.kind_ = Kind::Zero;
    s.m_ = m;
    s.u_.assign(static_cast<size_t>(std::max(m, 0)), 0.0);
    return s;
  }

  static InputSignal constant(std::vector<double> u) {
    InputSignal s;
    s.kind_ = Kind::Constant;
    s.m_ = static_cast<int>(u.size());
    s.u_ = std::move(u);
    return s;
  }

  static InputSignal random(int m, double bound, Norm norm, std::uint64_t seed,
                            std::size_t horizon) {
    InputSignal s;
    s.kind_ = Kind::Random;
    s.m_ = m;
    s.bound_ = bound;
    s.seed_ = seed;
    Rng rng(seed);
    s.steps_.reserve(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
      std::vector<double> u;
      if (rng.unit() < 0.5) {
        u = corner_direction(rng, m, norm);
        for (auto& v : u) v *= bound;
      } else {
        u = sphere_direction(rng, m, norm);
        const double r = bound * rng.unit();
        for (auto& v : u) v *= r;
      }
      s.steps_.push_back(std::move(u));
    }
    return s;
  }

  static InputSignal explicit_list(std::vector<std::vector<double>> steps) {
    if (steps.empty()) throw DimensionError("explicit input needs steps");
    InputSignal s;
    s.kind_ = Kind::Explicit;
    s.m_ = static_cast<int>(steps.front().size());
    s.steps_ = std::move(steps);
    return s;
  }

  Kind kind() const { return kind_; }
  int dim() const { return m_; }

  std::size_t horizon() const {
    switch (kind_) {
      case Kind::Zero:
      case Kind::Constant: return std::numeric_limits<std::size_t>::max();
      default: return steps_.size();
    }
  }

  std::span<const double> at(std::size_t k) const {
    switch (kind_) {
      case Kind::Zero:
      case Kind::Constant: return u_;
      default:
        if (k >= steps_.size())
          throw RangeError("input signal horizon exceeded");
        return steps_[k];
    }
  }

  /// sup over steps 0..upto-1 of the step norm.
  double sup_norm(std::size_t upto, Norm norm) const {
    if (kind_ == Kind::Zero) return 0.0;
    if (kind_ == Kind::Constant) return vec_norm(u_, norm);
    double acc = 0.0;
    for (std::size_t k = 0; k < std::min(upto, steps_.size()); ++k)
      acc = std::max(acc, vec_norm(steps_[k], norm));
    return acc;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::Zero: return "zero";
      case Kind::Constant: return "constant";
      case Kind::Random: return "random(seed=" + std::to_string(seed_) + ")";
      case Kind::Explicit: return "explicit";
    }
    return "?";
  }

 private:
  Kind kind_ = Kind::Zero;
  int m_ = 0;
  double bound_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<double> u_;
  std::vector<std::vector<double>> steps_;
};

/// The three falsification input families: u == 0, constant at the bound,
/// seeded random sequences (mixed ball/corner steps).
inline InputSignal make_input_family(int m, Norm norm, double bound,
                                     int family, std::uint64_t seed,
                                     std::size_t horizon) {
  if (m <= 0 || bound <= 0.0) return InputSignal::zero(std::max(m, 0));
  switch (family % 3) {
    case 0: return InputSignal::zero(m);
    case 1: {
      Rng rng(seed);
      std::vector<double> dir;
      switch (rng.below(3)) {
        case 0: dir = corner_direction(rng, m, norm); break;
        case 1: {
          dir.assign(static_cast<size_t>(m), 0.0);
          dir[static_cast<size_t>(rng.below(m))] = rng.sign();
          break;
        }
        default: dir = sphere_direction(rng, m, norm); break;
      }
      for (auto& v : dir) v *= bound;
      return InputSignal::constant(std::move(dir));
    }
    default: return InputSignal::random(m, bound, norm, seed, horizon);
  }
}

// -- simulation ---------------------------------------------------------------

struct Trajectory {
  std::vector<std::vector<double>> states;  // x(0) .. x(k)

  const std::vector<double>& back() const { return states.back(); }
  std::size_t steps() const { return states.size() - 1; }
};

inline Trajectory simulate(const SystemModel& sys,
                           std::span<const double> x0, const InputSignal& u,
                           std::size_t k) {
  if (k > u.horizon()) throw RangeError("simulation exceeds input horizon");
  Trajectory tr;
  tr.states.reserve(k + 1);
  tr.states.emplace_back(x0.begin(), x0.end());
  for (std::size_t j = 0; j < k; ++j)
    tr.states.push_back(sys.step(tr.states.back(), u.at(j)));
  return tr;
}

/// Stepper whose single step consumes M inputs and equals M steps of the
/// underlying system, applied in the same order (hence bitwise-identical).
class MIteration {
 public:
  MIteration(const SystemModel& sys, int m_steps) : sys_(&sys), m_(m_steps) {
    if (m_steps < 1) throw RangeError("M-iteration needs M >= 1");
  }

  int window() const { return m_; }

  std::vector<double> step(std::span<const double> x, const InputSignal& u,
                           std::size_t block_index) const {
    std::vector<double> cur(x.begin(), x.end());
    for (int j = 0; j < m_; ++j)
      cur = sys_->step(cur, u.at(block_index * static_cast<size_t>(m_) +
                                 static_cast<size_t>(j)));
    return cur;
  }

  std::vector<double> iterate(std::span<const double> x, const InputSignal& u,
                              std::size_t count) const {
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t b = 0; b < count; ++b) cur = step(cur, u, b);
    return cur;
  }

 private:
  const SystemModel* sys_;
  int m_;
};

// -- global K-bound estimation --------------------------------------------------

struct KBound {
  double w1 = 0.0;
  double w2 = 0.0;
  Norm norm = Norm::Inf;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double radius_max = 0.0;
  double worst_slack = 0.0;  // min over the fit cloud of rhs - lhs (>= 0)
  bool growth_warning = false;
};

/**
 * Fits the minimal linear envelope |G(xi,mu)| <= w1|xi| + w2|mu| over the
 * sample cloud (a two-variable covering LP), then inflates both coefficients
 * by (1+eta). growth_warning is set when the per-decade ratio |G(xi,0)|/|xi|
 * keeps growing with the radius, which means no linear envelope exists
 * globally and the system cannot be exponentially stabilizable.
 */
inline KBound estimate_kbound(const SystemModel& sys, Norm norm,
                              const CloudConfig& cfg) {
  const int n = sys.n(), m = sys.m();
  const auto xs = state_cloud(n, norm, cfg.with_samples(cfg.samples / 2));
  const auto us = m > 0 ? state_cloud(m, norm,
                                      cfg.with_seed(mix_seed(cfg.seed, 77))
                                          .with_samples(cfg.samples / 2))
                        : std::vector<std::vector<double>>{};
  const std::vector<double> zu(static_cast<size_t>(std::max(m, 0)), 0.0);
  const std::vector<double> zx(static_cast<size_t>(n), 0.0);

  DenseRows rows;
  rows.ncols = 2;
  std::vector<std::pair<double, double>> decade_max;  // (log10 r, ratio)
  auto add_sample = [&](std::span<const double> x, std::span<const double> u) {
    const double nx = vec_norm(x, norm);
    const double nu = vec_norm(u, norm);
    const double ng = vec_norm(sys.step(x, u), norm);
    if (ng > 0.0) {
      const double a[2] = {nx, nu};
      rows.push(std::span<const double>(a, 2), ng);
    }
    if (nu == 0.0 && nx > 0.0) decade_max.emplace_back(std::log10(nx), ng / nx);
  };

  for (size_t i = 0; i < xs.size(); ++i) {
    add_sample(xs[i], zu);
    if (!us.empty()) {
      add_sample(zx, us[i % us.size()]);
      add_sample(xs[i], us[(i * 7 + 3) % us.size()]);
    }
  }

  const std::vector<double> obj = {1.0, 1.0};
  const auto sol = solve_cover_large(rows, obj);
  if (!sol.feasible) throw ConvergenceError("K-bound fit infeasible");

  KBound kb;
  kb.norm = norm;
  kb.w1 = sol.x[0] * (1.0 + cfg.inflation);
  kb.w2 = sol.x[1] * (1.0 + cfg.inflation);
  kb.samples = rows.rows();
  kb.seed = cfg.seed;
  kb.radius_max = cfg.radius_max;

  double worst = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < rows.rows(); ++i) {
    auto r = rows.row(i);
    worst = std::min(worst, kb.w1 * r[0] + kb.w2 * r[1] - rows.rhs[i]);
  }
  kb.worst_slack = rows.rows() ? worst : 0.0;

  // ratio-growth scan over radius decades
  const int lo_dec = static_cast<int>(std::floor(std::log10(cfg.radius_min)));
  const int hi_dec = static_cast<int>(std::ceil(std::log10(cfg.radius_max)));
  std::vector<double> dec(static_cast<size_t>(hi_dec - lo_dec + 1), 0.0);
  for (auto [lr, ratio] : decade_max) {
    int d = static_cast<int>(std::floor(lr)) - lo_dec;
    d = std::max(0, std::min<int>(d, static_cast<int>(dec.size()) - 1));
    dec[static_cast<size_t>(d)] = std::max(dec[static_cast<size_t>(d)], ratio);
  }
  int growing = 0;
  for (size_t d = 1; d < dec.size(); ++d)
    if (dec[d] > dec[d - 1] * 1.05 && dec[d - 1] > 0.0) ++growing;
  kb.growth_warning = growing >= 3 && dec.back() > 2.0 * dec.front();
  return kb;
}

/// Linear per-step trajectory envelope: theta_j = w1^j,
/// zeta_j = w2 * sum_{i<j} w1^i.
inline std::pair<double, double> trajectory_bounds(const KBound& kb, int j) {
  if (j < 0) throw RangeError("trajectory_bounds needs j >= 0");
  double theta = 1.0, zeta = 0.0, p = 1.0;
  for (int i = 0; i < j; ++i) {
    zeta += p;
    p *= kb.w1;
  }
  theta = p;
  return {theta, kb.w2 * zeta};
}

struct TrajectoryBoundReport {
  bool pass = false;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::vector<double> witness_state;
};

inline TrajectoryBoundReport check_trajectory_bound(const SystemModel& sys,
                                                    const KBound& kb, int j,
                                                    const CloudConfig& cfg) {
  const auto [theta, zeta] = trajectory_bounds(kb, j);
  const auto xs = state_cloud(sys.n(), kb.norm, cfg);
  TrajectoryBoundReport rep;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double ubound =
        (i % 3 == 0) ? 0.0
                     : Rng(mix_seed(cfg.seed, i)).log_uniform(
                           cfg.radius_min, cfg.radius_max);
    const auto u = make_input_family(sys.m(), kb.norm, ubound,
                                     static_cast<int>(i % 3),
                                     mix_seed(cfg.seed, i * 2 + 1),
                                     static_cast<size_t>(j) + 1);
    const auto tr = simulate(sys, xs[i], u, static_cast<size_t>(j));
    const double lhs = vec_norm(tr.back(), kb.norm);
    const double rhs = theta * vec_norm(xs[i], kb.norm) +
                       zeta * u.sup_norm(static_cast<size_t>(j), kb.norm);
    const double slack = rhs - lhs;
    ++rep.checked;
    if (slack < rep.worst_slack) {
      rep.worst_slack = slack;
      rep.witness_state = xs[i];
    }
    if (slack < 0.0) ++rep.violations;
  }
  rep.pass = rep.violations == 0;
  return rep;
}

// -- norm-preserving change of coordinates -------------------------------------

/**
 * Radial change of coordinates T(x) = phi(|x|) * x / |x| (T(0) = 0) together
 * with the stepper of the transformed system z+ = T(G(T^{-1}(z), u)).
 * |T(x)| = phi(|x|) by construction.
 */
class TransformedStepper {
 public:
  TransformedStepper(const SystemModel& sys, ScalarFn phi, Norm norm)
      : sys_(&sys), phi_(std::move(phi)), phi_inv_(invert(phi_)), norm_(norm) {}

  std::vector<double> to_z(std::span<const double> x) const {
    return radial(x, phi_);
  }
  std::vector<double> to_x(std::span<const double> z) const {
    return radial(z, phi_inv_);
  }

  std::vector<double> step(std::span<const double> z,
                           std::span<const double> u) const {
    const auto x = to_x(z);
    return to_z(sys_->step(x, u));
  }

 private:
  std::vector<double> radial(std::span<const double> v, const ScalarFn& f) const {
    const double r = vec_norm(v, norm_);
    std::vector<double> out(v.size(), 0.0);
    if (r == 0.0) return out;
    const double factor = f(r) / r;
    for (size_t i = 0; i < v.size(); ++i) out[i] = factor * v[i];
    return out;
  }

  const SystemModel* sys_;
  ScalarFn phi_;
  ScalarFn phi_inv_;
  Norm norm_;
};

inline TransformedStepper coordinate_transform(const SystemModel& sys,
                                               const ScalarFn& phi, Norm norm) {
  const auto rep = check_class(phi, FnClass::Kinf);
  if (!rep.pass)
    throw PreconditionError("coordinate change needs a Kinf radial profile");
  return TransformedStepper(sys, phi, norm);
}

}  // namespace fsiss
