#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fsiss/corpus.hpp"
#include "fsiss/io.hpp"

using namespace fsiss;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::path("cli_work");

int run_cli(const std::string& args) {
  fs::create_directories(kDir);
  const std::string cmd = std::string(FSISS_CLI_PATH) + " " + args +
                          " > " + (kDir / "stdout.txt").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("file-format round trips") {
  const auto sys = corpus_system("paper-ex-nonlinear");
  const auto sys2 = system_from_json(to_json(sys));
  CHECK(sys2.n() == sys.n());
  CHECK(sys2.update_sources() == sys.update_sources());

  const auto gm = corpus_gains("paper-ex-nonlinear-gains-k3");
  const auto gm2 = gains_from_json(to_json(gm));
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 2; ++j)
      CHECK(gm2.coeff(i, j) == gm.coeff(i, j));
  CHECK(gm2.input_coeff(0) == 2.7);

  auto path = OmegaPath::from_components(
      {ScalarFn::linear(0.5), ScalarFn::linear(0.9)});
  path.margin = 0.0305;
  const auto path2 = path_from_json(to_json(path));
  CHECK(path2.components[1].linear_coeff() == 0.9);
  CHECK(path2.margin == 0.0305);

  const auto cert = compose_certificate(
      gm, OmegaPath::from_components({ScalarFn::linear(0.5), ScalarFn::linear(0.9)}),
      nullptr, 3, {1, 1}, Norm::Inf);
  const auto cert2 = certificate_from_json(to_json(cert));
  CHECK(cert2.m_steps == 3);
  CHECK(cert2.rho.linear_coeff() == cert.rho.linear_coeff());
  CHECK(cert2.v.weights == cert.v.weights);

  GainFit fit = GainFit::from_gain_matrix(gm, 3);
  const auto fit2 = gainfit_from_json(to_json(fit));
  CHECK(fit2.k == 3);
  CHECK(fit2.sum_a == fit.sum_a);

  CHECK_THROWS_AS(system_from_json(Json{{"name", "x"}}), ParseError);
  CHECK_THROWS_AS(gains_from_json(Json{{"n", 2}, {"gamma", Json::array()}}),
                  ParseError);
}

TEST_CASE("cli: simulate") {
  const auto out = (kDir / "traj.csv").string();
  REQUIRE(run_cli("simulate --system paper-ex-nonlinear --x0 100,0 "
                  "--input zero --steps 3 --out " + out) == 0);
  const auto rows = read_csv(out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0][0] == 0.0);
  CHECK(std::abs(rows[3][1] - 39.9100) < 1e-3);
  CHECK(std::abs(rows[3][2] - 70.3000) < 1e-3);

  REQUIRE(run_cli("simulate --system paper-ex-nonlinear --x0 1,2 "
                  "--input zero --steps 0 --out " + out) == 0);
  CHECK(read_csv(out).size() == 1);

  REQUIRE(run_cli("simulate --system paper-ex-linear2d --x0 1,0 "
                  "--input zero --steps 1 --out " + out) == 0);
  const auto lin = read_csv(out);
  CHECK(lin[1][1] == doctest::Approx(1.5));
  CHECK(lin[1][2] == doctest::Approx(-2.0));

  // header is part of the contract
  const auto text = slurp(out);
  CHECK(text.rfind("k,x1,x2,u1,u2\n", 0) == 0);
}

TEST_CASE("cli: gains verdicts and exit codes") {
  const auto out = (kDir / "gains.json").string();
  CHECK(run_cli("gains --system paper-ex-nonlinear --k 1 --samples 8000 "
                "--out " + out) == 1);
  auto j = load_json_file(out);
  CHECK_FALSE(j.at("cycle_condition").get<bool>());
  const auto a00 = ScalarFn::parse(
      j.at("fit").at("max_form").at("gamma")[0][0].get<std::string>());
  CHECK(a00.linear_coeff() == doctest::Approx(2.04).epsilon(0.02));

  CHECK(run_cli("gains --system paper-ex-nonlinear --k 3 --samples 20000 "
                "--out " + out) == 0);
  j = load_json_file(out);
  CHECK(j.at("cycle_condition").get<bool>());

  CHECK(run_cli("gains --system paper-ex-nonlinear --k 0 --out " + out) == 2);

  // analytic gains enter at the falsification stage; the quoted table is
  // refuted (its second input coefficient is too small), the repaired
  // variant passes
  CHECK(run_cli("gains --system paper-ex-nonlinear --k 3 "
                "--gains-in paper-ex-nonlinear-gains-k3 --samples 8000 "
                "--out " + out) == 1);
  CHECK(run_cli("gains --system paper-ex-nonlinear --k 3 "
                "--gains-in paper-ex-nonlinear-gains-k3-repaired "
                "--samples 8000 --out " + out) == 0);
}

TEST_CASE("cli: certify end to end") {
  const auto out = (kDir / "cert.json").string();
  REQUIRE(run_cli("certify --system paper-ex-nonlinear --max-k 5 "
                  "--samples 20000 --out " + out) == 0);
  auto j = load_json_file(out);
  CHECK(j.at("k").get<int>() == 3);
  CHECK(j.at("M").get<int>() == 3);
  const auto rho = ScalarFn::parse(j.at("rho").get<std::string>());
  CHECK(rho.linear_coeff() < 1.0);

  CHECK(run_cli("certify --system paper-ex-nonlinear --max-k 1 "
                "--samples 10000 --out " + (kDir / "c1.json").string()) == 2);

  // unstable scalar dynamics: inconclusive with growing per-k diagnostics
  const auto sys_path = (kDir / "double.json").string();
  write_json_file(sys_path, Json{{"name", "double"},
                                 {"n", 1},
                                 {"m", 0},
                                 {"blocks", {1}},
                                 {"update", {"2*x1"}}});
  const auto unst = (kDir / "unstable.json").string();
  CHECK(run_cli("certify --system " + sys_path + " --max-k 3 --samples 4000 "
                "--out " + unst) == 2);
  j = load_json_file(unst);
  const auto& per_k = j.at("per_k");
  REQUIRE(per_k.size() == 3);
  double prev = 0.0;
  for (const auto& e : per_k) {
    const double w = e.at("worst_cycle_value").get<double>();
    CHECK(w > std::max(prev, 1.0));
    prev = w;
  }
}

TEST_CASE("cli: procedure1") {
  const auto out = (kDir / "p1.json").string();
  REQUIRE(run_cli("procedure1 --system paper-ex-linear2d --norm inf "
                  "--max-k 5 --samples 20000 --out " + out) == 0);
  const auto j = load_json_file(out);
  CHECK(j.at("M").get<int>() == 3);
  const auto rho = ScalarFn::parse(j.at("rho").get<std::string>());
  CHECK(rho.linear_coeff() == doctest::Approx(0.875 * 1.02).epsilon(1e-9));

  // its output is itself a loadable certificate
  CHECK(run_cli("verify --certificate " + out +
                " --system paper-ex-linear2d --samples 10000 --out " +
                (kDir / "p1v.json").string()) == 0);

  // the attached decay estimate is validated over the check horizon
  const auto& exp_block = j.at("expiss");
  CHECK(exp_block.at("validated").get<bool>());
  CHECK(exp_block.at("C").get<double>() >= 1.0);
  CHECK(exp_block.at("kappa").get<double>() < 1.0);

  CHECK(run_cli("procedure1 --system paper-ex-nonlinear --norm 1 --max-k 3 "
                "--samples 10000 --out " + (kDir / "p1f.json").string()) == 2);
}

TEST_CASE("cli: omega-path") {
  const auto out = (kDir / "path.json").string();
  REQUIRE(run_cli("omega-path --gains paper-ex-nonlinear-gains-k3 --out " +
                  out) == 0);
  const auto p = path_from_json(load_json_file(out));
  CHECK(p.margin > 0.0);
  const auto rep = verify_omega_path(corpus_gains("paper-ex-nonlinear-gains-k3"),
                                     p, nullptr, PathOp::Gamma);
  CHECK(rep.pass);

  CHECK(run_cli("omega-path --gains paper-ex-nonlinear-gains-k1 --out " +
                (kDir / "pathbad.json").string()) == 2);

  // check mode: the reference path (0.5 r, 0.9 r) verifies with its known
  // margin; a path with a too-small second component is refuted
  const auto ref = (kDir / "refpath.json").string();
  write_json_file(ref, Json{{"components", {"lin 0.5", "lin 0.9"}}});
  const auto chk = (kDir / "refcheck.json").string();
  REQUIRE(run_cli("omega-path --gains paper-ex-nonlinear-gains-k3 --check " +
                  ref + " --out " + chk) == 0);
  const auto jc = load_json_file(chk);
  CHECK(std::abs(jc.at("margin").get<double>() - 0.0306) <= 1e-4);

  write_json_file(ref, Json{{"components", {"lin 0.5", "lin 0.51"}}});
  CHECK(run_cli("omega-path --gains paper-ex-nonlinear-gains-k3 --check " +
                ref + " --out " + chk) == 1);
}

TEST_CASE("cli: smallgain") {
  CHECK(run_cli("smallgain --gains paper-ex-nonlinear-gains-k3 "
                "--samples 20000 --out " + (kDir / "sg.json").string()) == 0);
  const auto bad_gains = (kDir / "badgains.json").string();
  write_json_file(bad_gains,
                  Json{{"n", 1},
                       {"form", "max"},
                       {"gamma", {{"lin 1.01"}}},
                       {"gamma_u", {nullptr}}});
  CHECK(run_cli("smallgain --gains " + bad_gains + " --samples 4000 --out " +
                (kDir / "sgbad.json").string()) == 1);

  // a diagonal operator can robustify a contracting table ...
  const auto diag = (kDir / "diag.json").string();
  write_json_file(diag, Json{{"delta", {"lin 0.5"}}});
  const auto ok_gains = (kDir / "okgains.json").string();
  write_json_file(ok_gains, Json{{"n", 1},
                                 {"form", "max"},
                                 {"gamma", {{"lin 0.5"}}},
                                 {"gamma_u", {nullptr}}});
  CHECK(run_cli("smallgain --gains " + ok_gains + " --diag " + diag +
                " --samples 4000 --out " + (kDir / "sgd.json").string()) == 0);
  // ... but not one it pushes past the identity
  write_json_file(ok_gains, Json{{"n", 1},
                                 {"form", "max"},
                                 {"gamma", {{"lin 0.8"}}},
                                 {"gamma_u", {nullptr}}});
  CHECK(run_cli("smallgain --gains " + ok_gains + " --diag " + diag +
                " --samples 4000 --out " + (kDir / "sgd2.json").string()) == 1);
}

TEST_CASE("cli: forced grid path construction") {
  const auto out = (kDir / "gridpath.json").string();
  REQUIRE(run_cli("omega-path --gains paper-ex-nonlinear-gains-k3 --grid "
                  "--out " + out) == 0);
  const auto p = path_from_json(load_json_file(out));
  CHECK(p.margin > 0.0);
}

TEST_CASE("cli: simulate with constant and random inputs") {
  const auto out = (kDir / "traj2.csv").string();
  REQUIRE(run_cli("simulate --system paper-ex-nonlinear --x0 0,0 "
                  "--input const:1 --steps 3 --out " + out) == 0);
  const auto rows = read_csv(out);
  CHECK(rows[3][2] == doctest::Approx(2.15));  // the exact witness value

  REQUIRE(run_cli("simulate --system paper-ex-nonlinear --x0 1,1 "
                  "--input random --u-bound 0.5 --steps 5 --seed 3 --out " +
                  out) == 0);
  for (const auto& r : read_csv(out)) CHECK(std::abs(r[3]) <= 0.5 + 1e-12);
}

TEST_CASE("cli: verify a produced certificate and a forged one") {
  const auto cert_path = (kDir / "cert_v.json").string();
  REQUIRE(run_cli("certify --system paper-ex-nonlinear --max-k 5 "
                  "--samples 20000 --out " + cert_path) == 0);
  CHECK(run_cli("verify --certificate " + cert_path +
                " --system paper-ex-nonlinear --samples 20000 --out " +
                (kDir / "v.json").string()) == 0);

  auto j = load_json_file(cert_path);
  j["rho"] = "lin 0.5";
  const auto forged = (kDir / "forged.json").string();
  write_json_file(forged, j);
  CHECK(run_cli("verify --certificate " + forged +
                " --system paper-ex-nonlinear --samples 20000 --out " +
                (kDir / "vf.json").string()) == 1);
  const auto rep = load_json_file((kDir / "vf.json").string());
  CHECK_FALSE(rep.at("decrease").at("pass").get<bool>());
  CHECK(rep.at("decrease").at("witness_ratio").get<double>() >= 0.6);
}

TEST_CASE("cli: report shows the spectral radius of linear dynamics") {
  const auto out = (kDir / "report.json").string();
  REQUIRE(run_cli("report --system paper-ex-linear2d --samples 10000 --out " +
                  out) == 0);
  const auto j = load_json_file(out);
  CHECK(j.at("linearization").at("linear").get<bool>());
  CHECK(std::abs(j.at("linearization").at("spectral_radius").get<double>() -
                 0.70711) <= 1e-5);
}

TEST_CASE("cli: identical configurations reproduce identical bytes") {
  const auto a = (kDir / "det_a.json").string();
  const auto b = (kDir / "det_b.json").string();
  REQUIRE(run_cli("certify --system paper-ex-nonlinear --max-k 3 "
                  "--samples 8000 --seed 5 --out " + a) == 0);
  REQUIRE(run_cli("certify --system paper-ex-nonlinear --max-k 3 "
                  "--samples 8000 --seed 5 --out " + b) == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(slurp(a).size() > 0);
}

TEST_CASE("cli: config file supplies defaults, flags win") {
  const auto cfg = (kDir / "cfg.json").string();
  write_json_file(cfg, Json{{"samples", 5000}, {"seed", 77}});
  const auto out = (kDir / "cfged.json").string();
  REQUIRE(run_cli("gains --system paper-ex-nonlinear --k 3 --config " + cfg +
                  " --out " + out) == 0);
  auto j = load_json_file(out);
  CHECK(j.at("config").at("samples").get<std::size_t>() == 5000);
  CHECK(j.at("config").at("seed").get<std::uint64_t>() == 77);

  REQUIRE(run_cli("gains --system paper-ex-nonlinear --k 3 --config " + cfg +
                  " --samples 6000 --out " + out) == 0);
  j = load_json_file(out);
  CHECK(j.at("config").at("samples").get<std::size_t>() == 6000);
  CHECK(j.at("config").at("seed").get<std::uint64_t>() == 77);
}
