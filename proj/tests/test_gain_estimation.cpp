#include <doctest.h>

#include <cmath>

#include "fsiss/corpus.hpp"
#include "fsiss/gain_estimation.hpp"

using namespace fsiss;

TEST_CASE("reference gain table: the quoted input column is falsified") {
  // the second input coefficient of the quoted table is too small: from the
  // origin with u == 1 the third-step response of block 2 is exactly
  // 2 + 0.3 * (1/2) = 2.15 > 2
  const auto sys = corpus_system("paper-ex-nonlinear");
  const auto tr = simulate(sys, std::vector<double>{0.0, 0.0},
                           InputSignal::constant({1.0}), 3);
  CHECK(tr.back()[1] == 2.15);

  const auto fit = GainFit::from_gain_matrix(
      corpus_gains("paper-ex-nonlinear-gains-k3"), 3);
  CloudConfig cfg;
  cfg.samples = 20000;
  const auto rep = falsify_gains(sys, {1, 1}, Norm::Inf, fit, cfg);
  CHECK_FALSE(rep.pass);
  CHECK(rep.worst_max_slack == doctest::Approx(-0.15).epsilon(0.01));
}

TEST_CASE("repaired gain table passes falsification") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  const auto fit = GainFit::from_gain_matrix(
      corpus_gains("paper-ex-nonlinear-gains-k3-repaired"), 3);
  CloudConfig cfg;
  cfg.samples = 20000;
  const auto rep = falsify_gains(sys, {1, 1}, Norm::Inf, fit, cfg);
  CHECK(rep.pass);
  CHECK(rep.worst_sum_slack >= 0.0);
  CHECK(rep.worst_max_slack >= 0.0);
  const auto fresh = falsify_gains(sys, {1, 1}, Norm::Inf, fit,
                                   cfg.with_seed(424242));
  CHECK(fresh.pass);

  // halving every coefficient breaks a tight sample
  auto halved = fit;
  for (auto& row : halved.sum_a)
    for (auto& v : row) v *= 0.5;
  for (auto& v : halved.sum_b) v *= 0.5;
  std::vector<std::vector<double>> hm(2, std::vector<double>(2));
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 2; ++j)
      hm[i][j] = halved.max_form.coeff(i, j) * 0.5;
  halved.max_form = GainMatrix::from_linear(
      hm, {halved.max_form.input_coeff(0) * 0.5,
           halved.max_form.input_coeff(1) * 0.5});
  const auto bad = falsify_gains(sys, {1, 1}, Norm::Inf, halved, cfg);
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(bad.witness.empty());
}

TEST_CASE("zero dynamics fit zero gains") {
  const SystemModel zero_sys("null", 2, 1, {1, 1}, {"0*x1", "0*x2"});
  CloudConfig cfg;
  cfg.samples = 4000;
  const auto fit = fit_gains(zero_sys, {1, 1}, 1, Norm::Inf, cfg);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(fit.sum_b[i] == 0.0);
    for (size_t j = 0; j < 2; ++j) CHECK(fit.sum_a[i][j] == 0.0);
  }
  const auto rep = falsify_gains(zero_sys, {1, 1}, Norm::Inf, fit, cfg);
  CHECK(rep.pass);
}

TEST_CASE("one-step fit reproduces the hand bound") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  CloudConfig cfg;
  cfg.samples = 30000;
  const auto fit = fit_gains(sys, {1, 1}, 1, Norm::Inf, cfg);
  // row 1: |x1 - 0.3 x2 + u| gives the max-form pair (2, 0.6) and input 1
  CHECK(fit.max_form.coeff(0, 0) ==
        doctest::Approx(2.0 * (1.0 + cfg.inflation)).epsilon(0.02));
  CHECK(fit.max_form.coeff(0, 1) ==
        doctest::Approx(0.6 * (1.0 + cfg.inflation)).epsilon(0.02));
  CHECK(fit.max_form.input_coeff(0) ==
        doctest::Approx(1.0 * (1.0 + cfg.inflation)).epsilon(0.02));
  // the one-step self-loop already violates the cycle condition
  CHECK_FALSE(cycle_condition(fit.max_form).pass);
}

TEST_CASE("fitted gains validate on their own and fresh clouds") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  CloudConfig cfg;
  cfg.samples = 20000;
  const auto fit = fit_gains(sys, {1, 1}, 3, Norm::Inf, cfg);
  CHECK(fit.worst_sum_slack >= 0.0);
  CHECK(fit.worst_max_slack >= 0.0);

  const auto same = falsify_gains(sys, {1, 1}, Norm::Inf, fit, cfg);
  CHECK(same.pass);
  const auto fresh = falsify_gains(sys, {1, 1}, Norm::Inf, fit,
                                   cfg.with_seed(4242));
  CHECK(fresh.pass);

  // max-form coefficients dominate sum-form coefficients entrywise
  for (size_t i = 0; i < 2; ++i) {
    for (size_t j = 0; j < 2; ++j)
      CHECK(fit.max_form.coeff(i, j) >= fit.sum_a[i][j]);
    CHECK(fit.worst_max_slack >= fit.worst_sum_slack);
  }

  // three-step gains satisfy the cycle condition
  CHECK(cycle_condition(fit.max_form).pass);
}

TEST_CASE("decoupled blocks drop their cross terms") {
  const SystemModel sys("decoupled", 2, 1, {1, 1},
                        {"0.5*x1 + u1", "0.8*x2"});
  CloudConfig cfg;
  cfg.samples = 10000;
  const auto fit = fit_gains(sys, {1, 1}, 1, Norm::Inf, cfg);
  CHECK(fit.sum_a[0][1] == 0.0);
  CHECK(fit.sum_a[1][0] == 0.0);
  CHECK(fit.max_form.coeff(0, 0) ==
        doctest::Approx(0.5 * (1.0 + cfg.inflation)).epsilon(0.01));
  CHECK(fit.max_form.coeff(1, 1) ==
        doctest::Approx(0.8 * (1.0 + cfg.inflation)).epsilon(0.01));
}

TEST_CASE("gain fitting is deterministic") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  CloudConfig cfg;
  cfg.samples = 8000;
  const auto a = fit_gains(sys, {1, 1}, 2, Norm::Inf, cfg);
  const auto b = fit_gains(sys, {1, 1}, 2, Norm::Inf, cfg);
  CHECK(a.sum_a == b.sum_a);
  CHECK(a.sum_b == b.sum_b);
}

TEST_CASE("full pipeline certifies the nonlinear pair at k = 3") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  CloudConfig cfg;
  cfg.samples = 30000;
  const auto res = procedure2(sys, {1, 1}, 5, Norm::Inf, cfg);
  REQUIRE(res.success);
  CHECK(res.k == 3);
  CHECK(res.verdict == "certified");
  CHECK(res.decrease->pass);
  CHECK(res.certificate->rho.linear_coeff() < 1.0);
  CHECK(res.certificate->evidence.label == "sampled");
  // pipeline soundness: the emitted certificate survives another fresh seed
  const auto again = verify_decrease(sys, *res.certificate,
                                     cfg.with_seed(31337));
  CHECK(again.pass);
}

TEST_CASE("pipeline reports per-horizon diagnostics when capped") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  CloudConfig cfg;
  cfg.samples = 15000;
  const auto res = procedure2(sys, {1, 1}, 1, Norm::Inf, cfg);
  CHECK_FALSE(res.success);
  CHECK(res.verdict == "inconclusive");
  REQUIRE(res.per_k.size() == 1);
  CHECK(res.per_k[0].note == "cycle condition violated");
  // the one-step self-loop coefficient is near 2
  CHECK(res.per_k[0].cycles.worst_value >= 1.5);
}

TEST_CASE("pipeline certifies the linear pair with scalar blocks") {
  const auto sys = corpus_system("paper-ex-linear2d");
  CloudConfig cfg;
  cfg.samples = 15000;
  const auto res = procedure2(sys, {1, 1}, 6, Norm::Inf, cfg);
  REQUIRE(res.success);
  CHECK(res.k <= 6);
  CHECK(res.decrease->pass);
}
