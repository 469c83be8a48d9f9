#include <doctest.h>

#include <cmath>

#include "fsiss/certificates.hpp"
#include "fsiss/corpus.hpp"

using namespace fsiss;

namespace {

Certificate reference_certificate() {
  const auto gm = corpus_gains("paper-ex-nonlinear-gains-k3");
  const auto path = OmegaPath::from_components(
      {ScalarFn::linear(0.5), ScalarFn::linear(0.9)});
  return compose_certificate(gm, path, nullptr, 3, {1, 1}, Norm::Inf);
}

}  // namespace

TEST_CASE("candidate-function evaluation") {
  const auto v = VSpec::block_max(Norm::Inf, {2.0, 10.0 / 9.0});
  const std::vector<int> blocks = {1, 1};
  CHECK(eval_v(v, std::vector<double>{100.0, 0.0}, blocks) ==
        doctest::Approx(200.0));
  CHECK(eval_v(v, std::vector<double>{0.0, 0.0}, blocks) == 0.0);
  CHECK(eval_v(v, std::vector<double>{0.0, 90.0}, blocks) ==
        doctest::Approx(100.0).epsilon(1e-12));

  // plain-norm scaling equivariance
  const auto plain = VSpec::plain(Norm::Two);
  const std::vector<double> xi = {3.0, -4.0};
  for (double t : {0.1, 1.0, 7.5, 300.0}) {
    std::vector<double> txi = xi;
    for (auto& x : txi) x *= t;
    CHECK(eval_v(plain, txi, blocks) ==
          doctest::Approx(t * eval_v(plain, xi, blocks)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(VSpec::block_max(Norm::Inf, {1.0, -1.0}), RangeError);
  CHECK_THROWS_AS(eval_v(v, std::vector<double>{1.0, 2.0}, {1, 1, 1}),
                  DimensionError);
}

TEST_CASE("composition reproduces the reference certificate values") {
  const auto cert = reference_certificate();
  REQUIRE(cert.v.kind == VSpec::Kind::WeightedBlockMax);
  CHECK(std::abs(cert.v.weights[0] - 2.0) <= 1e-10);
  CHECK(std::abs(cert.v.weights[1] - 10.0 / 9.0) <= 1e-10);
  CHECK(std::abs(cert.rho.linear_coeff() - 0.9694444444444444) <= 1e-12);
  CHECK(display_rate_4dec(cert.rho.linear_coeff()) == "0.9695");
  CHECK(cert.sigma.linear_coeff() == 5.4);
  CHECK(cert.m_steps == 3);
  CHECK(check_certificate_rate(cert).pass);

  // sandwich bounds hold over the probe cloud
  const auto sand = verify_sandwich(cert, 2, CloudConfig{.samples = 10000});
  CHECK(sand.pass);
}

TEST_CASE("composition edge cases") {
  // single block with a plain contraction
  GainMatrix single = GainMatrix::from_linear({{0.5}});
  const auto path1 = OmegaPath::from_components({ScalarFn::linear(1.0)});
  const auto c1 = compose_certificate(single, path1, nullptr, 1, {2}, Norm::Two);
  CHECK(c1.rho.linear_coeff() == doctest::Approx(0.5));
  CHECK(c1.sigma.is_zero());
  CHECK(c1.v.weights[0] == doctest::Approx(1.0));

  // a path with vanishing margin composes to a non-contracting rate
  GainMatrix tight = GainMatrix::from_linear({{1.0 - 1e-12}});
  CHECK_THROWS_AS(
      compose_certificate(tight, path1, nullptr, 1, {1}, Norm::Inf),
      ConstructionError);

  // nonlinear gains without a diagonal operator are refused
  GainMatrix nl;
  nl.n = 1;
  nl.internal = {{scale(0.5, ScalarFn::sq_over_1p())}};
  nl.input = {GainEntry()};
  CHECK_THROWS_AS(compose_certificate(nl, path1, nullptr, 1, {1}, Norm::Inf),
                  PreconditionError);
}

TEST_CASE("robust composition with a diagonal operator (max form)") {
  GainMatrix gm = GainMatrix::from_linear({{0.5}}, {1.0});
  const auto path = OmegaPath::from_components({ScalarFn::linear(1.0)});
  const auto D = DiagonalOp::uniform(1, ScalarFn::linear(0.5));
  // Gamma(D(s)) = 0.5 * 1.5 s = 0.75 s < s
  const auto cert = compose_certificate(gm, path, &D, 2, {1}, Norm::Inf);
  REQUIRE(cert.v.kind == VSpec::Kind::WeightedBlockMax);
  CHECK(cert.v.weights[0] == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
  REQUIRE(cert.rho.is_linear());
  CHECK(cert.rho.linear_coeff() == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
  REQUIRE(cert.sigma.is_linear());
  CHECK(cert.sigma.linear_coeff() == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
}

TEST_CASE("robust composition certifies a matching system end to end") {
  // x' = 0.4 x + u satisfies |x(1)| <= max{0.8 |xi|, 2 |u|}; the one-step
  // gain 0.8 tolerates the diagonal inflation 1.2 (0.96 < 1)
  const SystemModel sys("scalar", 1, 1, {1}, {"0.4*x1 + u1"});
  GainMatrix gm = GainMatrix::from_linear({{0.8}}, {2.0});
  const auto path = OmegaPath::from_components({ScalarFn::linear(1.0)});
  const auto D = DiagonalOp::uniform(1, ScalarFn::linear(0.2));

  const auto gd = verify_omega_path(gm, path, &D, PathOp::GammaD);
  CHECK(gd.pass);
  CHECK(gd.margin == doctest::Approx(1.0 - 0.96).epsilon(1e-9));
  // the public default checks D(Gamma(s)) < s, same verdict here
  const auto dg = verify_omega_path(gm, path, &D, PathOp::DGamma);
  CHECK(dg.pass);

  const auto cert = compose_certificate(gm, path, &D, 1, {1}, Norm::Inf);
  CloudConfig cfg;
  cfg.samples = 10000;
  CHECK(verify_decrease(sys, cert, cfg).pass);
  CHECK(verify_sandwich(cert, 1, cfg).pass);
}

TEST_CASE("robust composition with a factored operator (sum form)") {
  GainMatrix gm = GainMatrix::from_linear({{0.4}}, {1.0}, GainForm::Sum);
  const auto path = OmegaPath::from_components({ScalarFn::linear(1.0)});
  DiagonalOp D = DiagonalOp::uniform(1, ScalarFn::linear(0.5));
  D.factors = {{GainEntry(ScalarFn::linear(0.2))},
               {GainEntry(ScalarFn::linear(0.25))}};
  REQUIRE(D.validate().pass);
  // d1(Gamma(d2(s))) = 1.2 * 0.4 * 1.25 s = 0.6 s < s
  const auto cert = compose_certificate(gm, path, &D, 2, {1}, Norm::Inf);
  CHECK(cert.v.weights[0] == doctest::Approx(1.0 / 1.25).epsilon(1e-9));
  CHECK(cert.rho.linear_coeff() == doctest::Approx(0.8).epsilon(1e-9));
  // sigma = (id - alphahat) o phi^{-1} with phi = 0.2 * (0.4 * 1.25) id
  CHECK(cert.sigma(1.0) == doctest::Approx(8.0).epsilon(1e-9));

  // sum form without factors is refused
  DiagonalOp plain = DiagonalOp::uniform(1, ScalarFn::linear(0.5));
  CHECK_THROWS_AS(compose_certificate(gm, path, &plain, 2, {1}, Norm::Inf),
                  PreconditionError);

  // the factored operator check: d1(Gamma(d2(sigma(r)))) < sigma(r)
  const auto fct = verify_omega_path(gm, path, &D, PathOp::D1GammaD2);
  CHECK(fct.pass);
  CHECK(fct.margin == doctest::Approx(1.0 - 0.6).epsilon(1e-9));

  // end to end on a matching system: x' = 0.3 x + u obeys the sum-form
  // bound |x(1)| <= 0.4 |xi| + |u| with room for the factored operator
  const SystemModel sys("scalar-sum", 1, 1, {1}, {"0.3*x1 + u1"});
  CloudConfig cfg;
  cfg.samples = 10000;
  CHECK(verify_decrease(sys, cert, cfg).pass);
  CHECK(verify_sandwich(cert, 1, cfg).pass);
}

TEST_CASE("sandwich verification rejects inconsistent bounds") {
  auto cert = reference_certificate();
  cert.alpha1 = ScalarFn::linear(3.0);  // claims V >= 3 |xi|, false
  const auto rep = verify_sandwich(cert, 2, CloudConfig{.samples = 2000});
  CHECK_FALSE(rep.pass);
  CHECK(rep.worst_lower < 0.0);
}

TEST_CASE("norm-candidate search on an input-free system") {
  const SystemModel sys("shrink", 1, 0, {1}, {"0.5*x1"});
  CloudConfig cfg;
  cfg.samples = 2000;
  const auto res = procedure1(sys, Norm::Inf, 2, cfg);
  REQUIRE(res.success);
  CHECK(res.m_steps == 1);
  CHECK(res.certificate->sigma.is_zero());
}

TEST_CASE("decrease falsification of the reference certificate") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  const auto cert = reference_certificate();
  CloudConfig cfg;
  cfg.samples = 20000;

  const auto ok = verify_decrease(sys, cert, cfg);
  CHECK(ok.pass);
  CHECK(ok.worst_slack >= 0.0);

  Certificate forged = cert;
  forged.rho = ScalarFn::linear(0.5);
  const auto bad = verify_decrease(sys, forged, cfg);
  CHECK_FALSE(bad.pass);
  CHECK(bad.witness_ratio >= 0.6);

  // the derived witness: V(x(3)) / V(xi) at (-100, 100) is about 0.61
  const auto tr = simulate(sys, std::vector<double>{-100.0, 100.0},
                           InputSignal::zero(1), 3);
  const double v0 = eval_v(cert.v, std::vector<double>{-100.0, 100.0},
                           cert.blocks);
  const double v3 = eval_v(cert.v, tr.back(), cert.blocks);
  CHECK(v3 / v0 == doctest::Approx(0.61).epsilon(0.01));
  CHECK(v3 <= cert.rho(v0));          // reference rate holds here
  CHECK(v3 > forged.rho(v0));         // forged rate is refuted here

  // the origin satisfies the inequality with equality
  CHECK(eval_v(cert.v, std::vector<double>{0.0, 0.0}, cert.blocks) == 0.0);
  CHECK(cert.rho(0.0) + cert.sigma(0.0) == 0.0);
}

TEST_CASE("norm-candidate search on the linear pair") {
  const auto sys = corpus_system("paper-ex-linear2d");
  CloudConfig cfg;
  cfg.samples = 20000;
  const auto res = procedure1(sys, Norm::Inf, 5, cfg);
  REQUIRE(res.success);
  CHECK(res.m_steps == 3);
  const double c3 = res.certificate->rho.linear_coeff();
  CHECK(c3 >= 0.875);
  CHECK(c3 <= 0.875 * (1.0 + cfg.inflation) * (1.0 + 1e-12));
  // input coefficient approaches |A^2| + |A| + 1 = 6
  CHECK(res.certificate->sigma.linear_coeff() ==
        doctest::Approx(6.0 * (1.0 + cfg.inflation)).epsilon(0.03));
  // the first two horizons do not contract: sups are |A| = 3 and |A^2| = 2
  REQUIRE(res.table.size() == 3);
  CHECK(res.table[0].c_raw == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(res.table[1].c_raw == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(res.refalsification->pass);
}

TEST_CASE("norm-candidate search fails for the nonlinear pair in the 1-norm") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  CloudConfig cfg;
  cfg.samples = 20000;
  const auto res = procedure1(sys, Norm::One, 3, cfg);
  CHECK_FALSE(res.success);
  REQUIRE(res.table.size() == 3);
  CHECK(res.table[2].c_raw >= 1.05);  // witnessed non-contraction at k = 3
  for (const auto& e : res.table) CHECK_FALSE(e.contraction);
}

TEST_CASE("contraction evidence survives reseeding") {
  // the inflated coefficient from one cloud should dominate the raw supremum
  // sampled on any fresh cloud; an exceedance flags an insufficient cloud
  const auto sys = corpus_system("paper-ex-linear2d");
  CloudConfig cfg;
  cfg.samples = 20000;
  const auto base = procedure1(sys, Norm::Inf, 3, cfg);
  REQUIRE(base.success);
  for (std::uint64_t seed : {17u, 91u, 333u}) {
    const auto again = procedure1(sys, Norm::Inf, 3, cfg.with_seed(seed));
    REQUIRE(again.success);
    CHECK(again.table.back().c_raw <= base.certificate->rho.linear_coeff());
  }
}

TEST_CASE("one-step contraction is found immediately") {
  const SystemModel half("half", 1, 1, {1}, {"0.5*x1 + u1"});
  CloudConfig cfg;
  cfg.samples = 5000;
  const auto res = procedure1(half, Norm::Inf, 3, cfg);
  REQUIRE(res.success);
  CHECK(res.m_steps == 1);
  CHECK(res.certificate->rho.linear_coeff() ==
        doctest::Approx(0.5 * (1.0 + cfg.inflation)).epsilon(1e-6));
}

TEST_CASE("exponential-decay constants") {
  Certificate cert;
  cert.v = VSpec::plain(Norm::Inf);
  cert.blocks = {1, 1};
  cert.m_steps = 3;
  cert.rho = ScalarFn::linear(0.875);
  cert.sigma = ScalarFn::linear(6.0);
  cert.alpha1 = ScalarFn::identity();
  cert.alpha2 = ScalarFn::identity();

  KBound kb;
  kb.w1 = 3.0;
  kb.w2 = 1.0;
  kb.norm = Norm::Inf;

  const auto est = expiss_constants(cert, kb, 0.5);
  CHECK(est.kappa == doctest::Approx(std::pow(0.9375, 1.0 / 3.0)).epsilon(1e-12));
  CHECK(std::abs(est.kappa - 0.97872) <= 1e-5);
  CHECK(est.C >= 1.0);

  Certificate flat = cert;
  flat.m_steps = 1;
  flat.rho = ScalarFn::zero();
  const auto est2 = expiss_constants(flat, kb, 0.5);
  CHECK(est2.kappa == doctest::Approx(0.5));

  Certificate badrho = cert;
  badrho.rho = ScalarFn::power(2.0);
  CHECK_THROWS_AS(expiss_constants(badrho, kb, 0.5), PreconditionError);
  CHECK_THROWS_AS(expiss_constants(cert, kb, 1.5), RangeError);
}

TEST_CASE("trajectory estimate holds for the extracted constants") {
  const auto sys = corpus_system("paper-ex-linear2d");
  CloudConfig cfg;
  cfg.samples = 2000;
  const auto p1 = procedure1(sys, Norm::Inf, 5, cfg);
  REQUIRE(p1.success);
  const auto kb = estimate_kbound(sys, Norm::Inf, cfg);
  const auto est = expiss_constants(*p1.certificate, kb, 0.5);

  const auto rep = check_iss_estimate(sys, est, Norm::Inf, cfg, 50);
  CHECK(rep.pass);

  // k = 0 forces C >= 1: a forged C below 1 is refuted immediately
  ExpIssEstimate forged = est;
  forged.C = 0.1;
  const auto bad = check_iss_estimate(sys, forged, Norm::Inf, cfg, 5);
  CHECK_FALSE(bad.pass);
  CHECK(bad.first_violation_step == 0);
}
