// fsiss command-line front end: load/validate files, run the estimation and
// certification pipelines, emit reports (JSON for machines, aligned text for
// humans) and plot-ready CSV. Every output embeds the full run configuration
// and tool version; identical configurations reproduce identical bytes.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fsiss/corpus.hpp"
#include "fsiss/gain_estimation.hpp"
#include "fsiss/io.hpp"
#include "fsiss/linearization.hpp"

namespace {

using namespace fsiss;

struct CommonOpts {
  std::uint64_t seed = 1;
  std::size_t samples = 100000;
  double radius_max = 1e3;
  double inflate = Defaults::inflation;
  double u_bound = 1.0;
  std::string norm = "inf";
  std::string config_path;

  CloudConfig cloud() const {
    CloudConfig c;
    c.seed = seed;
    c.samples = samples;
    c.radius_max = radius_max;
    c.inflation = inflate;
    c.input_bound = u_bound;
    return c;
  }
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--seed", o.seed, "sampling seed");
  cmd->add_option("--samples", o.samples, "cloud size");
  cmd->add_option("--radius-max", o.radius_max, "largest state radius");
  cmd->add_option("--inflate", o.inflate, "inflation factor on fitted bounds");
  cmd->add_option("--u-bound", o.u_bound, "input magnitude bound");
  cmd->add_option("--norm", o.norm, "state norm: inf, 1 or 2");
  cmd->add_option("--config", o.config_path,
                  "JSON file with flag defaults (flags win)");
}

// config file values act as defaults; explicitly passed flags win
void apply_config(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  const Json j = load_json_file(path);
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    CLI::Option* opt = cmd->get_option_no_throw(flag);
    if (!opt || opt->count() > 0) continue;
    std::string text = value.is_string() ? value.get<std::string>()
                                         : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

Json config_echo(const std::string& command, const CommonOpts& o) {
  Json j;
  j["command"] = command;
  j["seed"] = o.seed;
  j["samples"] = o.samples;
  j["radius_max"] = o.radius_max;
  j["inflate"] = o.inflate;
  j["u_bound"] = o.u_bound;
  j["norm"] = o.norm;
  return j;
}

Json with_meta(Json body, const std::string& command, const CommonOpts& o,
               Json extra_cfg = Json::object()) {
  Json out;
  out["version"] = kVersion;
  Json cfg = config_echo(command, o);
  for (auto& [k, v] : extra_cfg.items()) cfg[k] = v;
  out["config"] = std::move(cfg);
  for (auto& [k, v] : body.items()) out[k] = std::move(v);
  return out;
}

SystemModel load_system(const std::string& spec) {
  if (is_corpus_system(spec)) return corpus_system(spec);
  return system_from_json(load_json_file(spec));
}

GainMatrix load_gains(const std::string& spec) {
  if (is_corpus_gains(spec)) return corpus_gains(spec);
  return gains_from_json(load_json_file(spec));
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::vector<int> parse_csv_ints(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_csv_doubles(text)) out.push_back(static_cast<int>(v));
  return out;
}

int finish(const std::string& verdict, int exit_code) {
  std::printf("{\"verdict\":\"%s\",\"exit\":%d}\n", verdict.c_str(), exit_code);
  return exit_code;
}

void print_gain_table(const GainMatrix& gm) {
  std::printf("  internal gains:\n");
  for (int i = 0; i < gm.n; ++i) {
    std::printf("   ");
    for (int j = 0; j < gm.n; ++j) {
      const auto& e = gm.internal[static_cast<size_t>(i)][static_cast<size_t>(j)];
      std::printf(" %-22s", e ? e->to_string().c_str() : "0");
    }
    std::printf("\n");
  }
  std::printf("  input gains:    ");
  for (int i = 0; i < gm.n; ++i) {
    const auto& e = gm.input[static_cast<size_t>(i)];
    std::printf(" %-22s", e ? e->to_string().c_str() : "0");
  }
  std::printf("\n");
}

// -- simulate -------------------------------------------------------------------

int cmd_simulate(const CommonOpts& o, const std::string& system,
                 const std::string& x0_text, const std::string& input_kind,
                 int steps, const std::string& out) {
  const auto sys = load_system(system);
  const auto x0 = parse_csv_doubles(x0_text);
  if (static_cast<int>(x0.size()) != sys.n())
    throw DimensionError("--x0 needs " + std::to_string(sys.n()) + " values");
  if (steps < 0) throw RangeError("--steps must be nonnegative");

  InputSignal u = InputSignal::zero(sys.m());
  if (input_kind == "zero") {
    // default
  } else if (input_kind.rfind("const:", 0) == 0) {
    u = InputSignal::constant(parse_csv_doubles(input_kind.substr(6)));
    if (u.dim() != sys.m()) throw DimensionError("constant input dimension");
  } else if (input_kind == "random") {
    u = InputSignal::random(sys.m(), o.u_bound, parse_norm(o.norm), o.seed,
                            static_cast<size_t>(steps) + 1);
  } else {
    throw ParseError("--input must be zero, const:<csv> or random");
  }

  const auto tr = simulate(sys, x0, u, static_cast<size_t>(steps));
  write_text_file(out, trajectory_csv(sys, tr, u));
  std::printf("simulated %s for %d steps\n", sys.name().c_str(), steps);
  std::printf("  final state:");
  for (double v : tr.back()) std::printf(" %.10g", v);
  std::printf("\n  wrote %s\n", out.c_str());
  return finish("ok", 0);
}

// -- gains ---------------------------------------------------------------------

int cmd_gains(const CommonOpts& o, const std::string& system,
              const std::string& blocks_text, int k,
              const std::string& gains_in, const std::string& out) {
  const auto base = load_system(system);
  const auto sys = blocks_text.empty() ? base
                                       : base.with_blocks(parse_csv_ints(blocks_text));
  const Norm norm = parse_norm(o.norm);
  if (k < 1) throw RangeError("--k must be at least 1");

  GainFit fit;
  if (!gains_in.empty()) {
    fit = GainFit::from_gain_matrix(load_gains(gains_in), k);
    std::printf("loaded analytic gains (k = %d), skipping the fit\n", k);
  } else {
    fit = fit_gains(sys, sys.blocks(), k, norm, o.cloud());
    std::printf("fitted %d-step gains over %zu samples\n", k, fit.samples);
  }

  const auto fal = falsify_gains(sys, sys.blocks(), norm, fit,
                                 o.cloud().with_seed(o.seed + 1));
  const auto cyc = cycle_condition(fit.max_form);

  print_gain_table(fit.max_form);
  std::printf("  falsification: %s (worst sum slack %.6g, max slack %.6g)\n",
              fal.pass ? "no violations" : "VIOLATED", fal.worst_sum_slack,
              fal.worst_max_slack);
  for (const auto& c : cyc.cycles) {
    std::printf("  cycle");
    for (int v : c.nodes) std::printf(" %d", v + 1);
    std::printf(": value %.6f\n", c.value);
  }
  std::printf("  verdict: %s\n", cyc.pass ? "cycle condition holds"
                                          : "small-gain violated");

  Json body;
  body["fit"] = to_json(fit);
  body["falsification"] = Json{{"pass", fal.pass},
                               {"checked", fal.checked},
                               {"worst_sum_slack", fal.worst_sum_slack},
                               {"worst_max_slack", fal.worst_max_slack}};
  Json cycles = Json::array();
  for (const auto& c : cyc.cycles)
    cycles.push_back(Json{{"nodes", c.nodes}, {"value", c.value}});
  body["cycles"] = std::move(cycles);
  body["cycle_condition"] = cyc.pass;
  write_json_file(out, with_meta(std::move(body), "gains", o,
                                 Json{{"system", system}, {"k", k}}));
  std::printf("  wrote %s\n", out.c_str());

  if (!fal.pass) return finish("falsified", 1);
  return cyc.pass ? finish("certified", 0) : finish("falsified", 1);
}

// -- smallgain ------------------------------------------------------------------

int cmd_smallgain(const CommonOpts& o, const std::string& gains_spec,
                  const std::string& diag_path, const std::string& out) {
  const auto gm = load_gains(gains_spec);
  std::optional<DiagonalOp> D;
  if (!diag_path.empty()) D = diag_from_json(load_json_file(diag_path));

  const auto cyc = cycle_condition(gm);
  CloudConfig cfg = o.cloud();
  cfg.radius_min = 1e-4;
  cfg.radius_max = std::max(o.radius_max, 1e4);
  const auto samp = smallgain_sample_check(gm, D ? &*D : nullptr, cfg);

  print_gain_table(gm);
  if (cyc.exhaustive)
    std::printf("  cycle condition: %s (worst cycle value %.6f)\n",
                cyc.pass ? "holds" : "violated", cyc.worst_value);
  std::printf("  sampled condition: %s over %zu points\n",
              samp.pass ? "holds" : "violated", samp.checked);
  if (samp.has_witness) {
    std::printf("  witness:");
    for (double v : samp.witness) std::printf(" %.6g", v);
    std::printf("\n");
  }

  Json body;
  body["cycle_condition"] =
      Json{{"pass", cyc.pass},
           {"exhaustive", cyc.exhaustive},
           {"worst_value", cyc.worst_value}};
  body["sample_check"] = Json{{"pass", samp.pass}, {"checked", samp.checked}};
  if (samp.has_witness) body["sample_check"]["witness"] = samp.witness;
  write_json_file(out, with_meta(std::move(body), "smallgain", o,
                                 Json{{"gains", gains_spec}}));
  std::printf("  wrote %s\n", out.c_str());

  const bool pass = cyc.pass && samp.pass;
  return pass ? finish("certified", 0) : finish("falsified", 1);
}

// -- omega-path -----------------------------------------------------------------

int cmd_omega_path(const CommonOpts& o, const std::string& gains_spec,
                   double lambda, bool grid, const std::string& check_path,
                   const std::string& out) {
  const auto gm = load_gains(gains_spec);

  if (!check_path.empty()) {
    // verification mode: test a user-supplied path instead of constructing
    auto path = path_from_json(load_json_file(check_path));
    const auto rep = verify_omega_path(gm, path, nullptr, PathOp::Gamma);
    std::printf("path check: %s (margin %.8f at r = %.6g, component %d)\n",
                rep.pass ? "decreasing" : "NOT decreasing", rep.margin,
                rep.worst_r, rep.worst_component + 1);
    path.margin = rep.margin;
    Json body = to_json(path);
    body["pass"] = rep.pass;
    write_json_file(out, with_meta(std::move(body), "omega-path", o,
                                   Json{{"gains", gains_spec},
                                        {"check", check_path}}));
    std::printf("wrote %s\n", out.c_str());
    return rep.pass ? finish("certified", 0) : finish("falsified", 1);
  }

  OmegaPath path;
  try {
    if (grid || !gm.internal_linear())
      path = omega_path_grid(gm);
    else
      path = omega_path_linear(
          gm, lambda > 0 ? std::optional<double>(lambda) : std::nullopt);
  } catch (const InfeasibleError& e) {
    std::printf("infeasible: %s\n", e.what());
    return finish("inconclusive", 2);
  } catch (const PreconditionError& e) {
    std::printf("infeasible: %s\n", e.what());
    return finish("inconclusive", 2);
  } catch (const ConstructionError& e) {
    std::printf("construction failed: %s\n", e.what());
    return finish("inconclusive", 2);
  }

  std::printf("path components:\n");
  for (const auto& c : path.components)
    std::printf("  %s\n", c.to_string().c_str());
  std::printf("verified margin: %.8f\n", path.margin);
  write_json_file(out, with_meta(to_json(path), "omega-path", o,
                                 Json{{"gains", gains_spec}}));
  std::printf("wrote %s\n", out.c_str());
  return finish("certified", 0);
}

// -- procedure1 -----------------------------------------------------------------

int cmd_procedure1(const CommonOpts& o, const std::string& system, int max_k,
                   double h, const std::string& out) {
  const auto sys = load_system(system);
  const Norm norm = parse_norm(o.norm);
  const auto res = procedure1(sys, norm, max_k, o.cloud());

  std::printf("   k   sampled sup      coefficient\n");
  for (const auto& e : res.table)
    std::printf("  %2d   %-14.6f   %-14.6f %s\n", e.k, e.c_raw, e.c,
                e.contraction ? "< 1" : "");
  Json table = Json::array();
  for (const auto& e : res.table)
    table.push_back(Json{{"k", e.k},
                         {"c_raw", e.c_raw},
                         {"c", e.c},
                         {"d", e.d},
                         {"contraction", e.contraction}});

  if (!res.success) {
    std::printf("no contraction up to k = %d\n", max_k);
    Json body;
    body["success"] = false;
    body["table"] = std::move(table);
    write_json_file(out, with_meta(std::move(body), "procedure1", o,
                                   Json{{"system", system}, {"max_k", max_k}}));
    std::printf("wrote %s\n", out.c_str());
    return finish("inconclusive", 2);
  }

  const auto& cert = *res.certificate;
  std::printf("contraction at M = %d: rho %s, sigma %s\n", res.m_steps,
              display_rate_4dec(cert.rho.linear_coeff()).c_str(),
              cert.sigma.is_zero() ? "0"
                                   : fmt_g17(cert.sigma.linear_coeff()).c_str());
  Json body = to_json(cert);
  body["success"] = true;
  body["table"] = std::move(table);

  // a norm certificate plus a linear growth envelope yields explicit
  // exponential trajectory-estimate constants; attach them when they check
  try {
    const auto kb = estimate_kbound(sys, norm, o.cloud());
    const auto est = expiss_constants(cert, kb, h);
    const auto iss = check_iss_estimate(
        sys, est, norm, o.cloud().with_samples(std::min<std::size_t>(
                            o.samples, 5000)), 50);
    std::printf("decay estimate: |x(k)| <= %.6g * %.6g^k |x(0)| + gamma(|u|),"
                " gamma = %s (%s over horizon 50)\n",
                est.C, est.kappa, est.gamma.to_string().c_str(),
                iss.pass ? "validated" : "VIOLATED");
    body["expiss"] = Json{{"C", est.C},
                          {"kappa", est.kappa},
                          {"gamma", est.gamma.to_string()},
                          {"h", h},
                          {"validated", iss.pass}};
  } catch (const Error& e) {
    std::printf("decay estimate unavailable: %s\n", e.what());
  }

  write_json_file(out, with_meta(std::move(body), "procedure1", o,
                                 Json{{"system", system},
                                      {"max_k", max_k},
                                      {"h", h}}));
  std::printf("wrote %s\n", out.c_str());
  return finish("certified", 0);
}

// -- certify --------------------------------------------------------------------

int cmd_certify(const CommonOpts& o, const std::string& system,
                const std::string& blocks_text, int max_k,
                const std::string& out, const std::string& gains_out,
                const std::string& path_out) {
  const auto base = load_system(system);
  const auto sys = blocks_text.empty() ? base
                                       : base.with_blocks(parse_csv_ints(blocks_text));
  const Norm norm = parse_norm(o.norm);
  const auto res = procedure2(sys, sys.blocks(), max_k, norm, o.cloud());

  for (const auto& pk : res.per_k) {
    if (pk.note.empty()) continue;
    std::printf("  k = %d: %s", pk.k, pk.note.c_str());
    if (pk.cycles.worst())
      std::printf(" (worst cycle value %.6f)", pk.cycles.worst_value);
    std::printf("\n");
  }

  Json per_k = Json::array();
  for (const auto& pk : res.per_k) {
    Json e;
    e["k"] = pk.k;
    e["note"] = pk.note;
    if (!pk.cycles.cycles.empty()) e["worst_cycle_value"] = pk.cycles.worst_value;
    per_k.push_back(std::move(e));
  }

  if (!res.success) {
    std::printf("inconclusive after k = %d\n", max_k);
    Json body;
    body["success"] = false;
    body["per_k"] = std::move(per_k);
    write_json_file(out, with_meta(std::move(body), "certify", o,
                                   Json{{"system", system}, {"max_k", max_k}}));
    std::printf("wrote %s\n", out.c_str());
    return finish("inconclusive", 2);
  }

  const auto& cert = *res.certificate;
  std::printf("certified at k = %d\n", res.k);
  print_gain_table(res.fit->max_form);
  std::printf("  path:");
  for (const auto& c : res.path->components)
    std::printf(" %s;", c.to_string().c_str());
  std::printf("  margin %.6f\n", res.path->margin);
  if (cert.v.kind == VSpec::Kind::WeightedBlockMax) {
    std::printf("  V weights:");
    for (double w : cert.v.weights) std::printf(" %.10g", w);
    std::printf("\n");
  }
  std::printf("  M = %d, rho = %s (displayed %s), sigma = %s\n", cert.m_steps,
              fmt_g17(cert.rho.linear_coeff()).c_str(),
              display_rate_4dec(cert.rho.linear_coeff()).c_str(),
              cert.sigma.is_zero() ? "0" : fmt_g17(cert.sigma.linear_coeff()).c_str());
  std::printf("  decrease falsification: %zu samples, worst slack %.6g\n",
              res.decrease->checked, res.decrease->worst_slack);

  // the output is a loadable certificate file with the pipeline evidence
  // attached alongside
  Json body = to_json(cert);
  body["success"] = true;
  body["k"] = res.k;
  body["per_k"] = std::move(per_k);
  body["gain_fit"] = to_json(*res.fit);
  body["path"] = to_json(*res.path);
  write_json_file(out, with_meta(std::move(body), "certify", o,
                                 Json{{"system", system}, {"max_k", max_k}}));
  std::printf("wrote %s\n", out.c_str());
  if (!gains_out.empty())
    write_json_file(gains_out, with_meta(to_json(res.fit->max_form), "certify",
                                         o, Json{{"system", system}}));
  if (!path_out.empty())
    write_json_file(path_out, with_meta(to_json(*res.path), "certify", o,
                                        Json{{"system", system}}));
  return finish("certified", 0);
}

// -- verify ---------------------------------------------------------------------

int cmd_verify(const CommonOpts& o, bool seed_given,
               const std::string& cert_path, const std::string& system,
               const std::string& out) {
  const auto sys = load_system(system);
  auto cert = certificate_from_json(load_json_file(cert_path));

  CloudConfig cfg = o.cloud();
  if (!seed_given) cfg.seed = cert.evidence.seed + 1;  // fresh by default

  const auto rate = check_certificate_rate(cert);
  const auto dec = verify_decrease(sys, cert, cfg);
  const auto sand = verify_sandwich(cert, sys.n(), cfg);

  std::printf("certificate: M = %d, provenance %s\n", cert.m_steps,
              cert.provenance.c_str());
  std::printf("  rate check (id - rho in Kinf): %s\n",
              rate.pass ? "pass" : "FAIL");
  std::printf("  sandwich bounds: %s\n", sand.pass ? "pass" : "FAIL");
  std::printf("  decrease: %s over %zu samples (worst slack %.6g)\n",
              dec.pass ? "no violations" : "VIOLATED", dec.checked,
              dec.worst_slack);
  if (!dec.pass) {
    std::printf("  witness state:");
    for (double v : dec.witness_state) std::printf(" %.6g", v);
    std::printf("  (input %s, V-ratio %.4f)\n", dec.witness_input.c_str(),
                dec.witness_ratio);
  }

  Json body;
  body["rate_check"] = rate.pass;
  body["sandwich"] = sand.pass;
  body["decrease"] = Json{{"pass", dec.pass},
                          {"checked", dec.checked},
                          {"violations", dec.violations},
                          {"worst_slack", dec.worst_slack}};
  if (!dec.pass) {
    body["decrease"]["witness_state"] = dec.witness_state;
    body["decrease"]["witness_ratio"] = dec.witness_ratio;
  }
  write_json_file(out, with_meta(std::move(body), "verify", o,
                                 Json{{"system", system},
                                      {"certificate", cert_path},
                                      {"fresh_seed", cfg.seed}}));
  std::printf("wrote %s\n", out.c_str());

  const bool pass = rate.pass && sand.pass && dec.pass;
  return pass ? finish("certified", 0) : finish("falsified", 1);
}

// -- report ---------------------------------------------------------------------

int cmd_report(const CommonOpts& o, const std::string& system,
               const std::string& out) {
  const auto sys = load_system(system);
  const Norm norm = parse_norm(o.norm);
  const auto kb = estimate_kbound(sys, norm, o.cloud());
  const auto lin = linearize_at_origin(sys, o.cloud());

  std::printf("system %s: n = %d, m = %d, blocks (", sys.name().c_str(),
              sys.n(), sys.m());
  for (size_t i = 0; i < sys.blocks().size(); ++i)
    std::printf("%s%d", i ? ", " : "", sys.blocks()[i]);
  std::printf(")\n");
  std::printf("  growth envelope (|.|_%s): |G(x,u)| <= %.6f |x| + %.6f |u|%s\n",
              to_string(norm).c_str(), kb.w1, kb.w2,
              kb.growth_warning ? "  [WARNING: ratios grow with radius]" : "");
  std::printf("  linearity: %s (residual %.3g)\n",
              lin.linear ? "linear" : "nonlinear", lin.max_residual);
  if (lin.linear)
    std::printf("  spectral radius at the origin: %.6f\n", lin.spectral_radius);

  Json body;
  body["system"] = to_json(sys);
  body["kbound"] = Json{{"w1", kb.w1},
                        {"w2", kb.w2},
                        {"norm", to_string(kb.norm)},
                        {"samples", kb.samples},
                        {"worst_slack", kb.worst_slack},
                        {"growth_warning", kb.growth_warning}};
  body["linearization"] = Json{{"linear", lin.linear},
                               {"max_residual", lin.max_residual},
                               {"spectral_radius", lin.spectral_radius}};
  write_json_file(out, with_meta(std::move(body), "report", o,
                                 Json{{"system", system}}));
  std::printf("wrote %s\n", out.c_str());
  return finish("ok", 0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-step small-gain stability toolkit"};
  app.require_subcommand(1);

  CommonOpts o;

  // simulate
  std::string sim_system, sim_x0 = "0", sim_input = "zero",
              sim_out = "trajectory.csv";
  int sim_steps = 10;
  auto* sim = app.add_subcommand("simulate", "integrate a system and emit CSV");
  add_common(sim, o);
  sim->add_option("--system", sim_system)->required();
  sim->add_option("--x0", sim_x0, "initial state, comma-separated");
  sim->add_option("--input", sim_input, "zero | const:<csv> | random");
  sim->add_option("--steps", sim_steps);
  sim->add_option("--out", sim_out);

  // gains
  std::string g_system, g_blocks, g_in, g_out = "gains.json";
  int g_k = 1;
  auto* gains = app.add_subcommand("gains", "fit and falsify finite-step gains");
  add_common(gains, o);
  gains->add_option("--system", g_system)->required();
  gains->add_option("--blocks", g_blocks, "block sizes, comma-separated");
  gains->add_option("--k", g_k, "horizon");
  gains->add_option("--gains-in", g_in, "analytic gains (skip the fit)");
  gains->add_option("--out", g_out);

  // smallgain
  std::string sg_gains, sg_diag, sg_out = "smallgain.json";
  auto* sg = app.add_subcommand("smallgain", "check the small-gain condition");
  add_common(sg, o);
  sg->add_option("--gains", sg_gains)->required();
  sg->add_option("--diag", sg_diag, "diagonal operator file");
  sg->add_option("--out", sg_out);

  // omega-path
  std::string op_gains, op_check, op_out = "path.json";
  double op_lambda = 0.0;
  bool op_grid = false;
  auto* op = app.add_subcommand("omega-path", "construct or check a decreasing path");
  add_common(op, o);
  op->add_option("--gains", op_gains)->required();
  op->add_option("--lambda", op_lambda, "decrease rate target in (radius, 1)");
  op->add_flag("--grid", op_grid, "force the grid construction");
  op->add_option("--check", op_check, "verify this path file instead");
  op->add_option("--out", op_out);

  // procedure1
  std::string p1_system, p1_out = "certificate.json";
  int p1_maxk = 10;
  double p1_h = 0.5;
  auto* p1 = app.add_subcommand("procedure1", "norm-candidate contraction search");
  add_common(p1, o);
  p1->add_option("--system", p1_system)->required();
  p1->add_option("--max-k", p1_maxk);
  p1->add_option("--decay-h", p1_h, "decay-estimate design parameter in (0,1)");
  p1->add_option("--out", p1_out);

  // certify
  std::string c_system, c_blocks, c_out = "certificate.json", c_gains_out,
              c_path_out;
  int c_maxk = 10;
  auto* cert = app.add_subcommand("certify", "full estimation pipeline");
  add_common(cert, o);
  cert->add_option("--system", c_system)->required();
  cert->add_option("--blocks", c_blocks);
  cert->add_option("--max-k", c_maxk);
  cert->add_option("--out", c_out);
  cert->add_option("--gains-out", c_gains_out);
  cert->add_option("--path-out", c_path_out);

  // verify
  std::string v_cert, v_system, v_out = "verify.json";
  auto* ver = app.add_subcommand("verify", "re-falsify a certificate file");
  add_common(ver, o);
  ver->add_option("--certificate", v_cert)->required();
  ver->add_option("--system", v_system)->required();
  ver->add_option("--out", v_out);

  // report
  std::string r_system, r_out = "report.json";
  auto* rep = app.add_subcommand("report", "system summary and growth envelope");
  add_common(rep, o);
  rep->add_option("--system", r_system)->required();
  rep->add_option("--out", r_out);

  try {
    app.parse(argc, argv);
    for (auto* sub : {sim, gains, sg, op, p1, cert, ver, rep})
      if (sub->parsed()) apply_config(sub, o.config_path);

    if (sim->parsed())
      return cmd_simulate(o, sim_system, sim_x0, sim_input, sim_steps, sim_out);
    if (gains->parsed())
      return cmd_gains(o, g_system, g_blocks, g_k, g_in, g_out);
    if (sg->parsed()) return cmd_smallgain(o, sg_gains, sg_diag, sg_out);
    if (op->parsed())
      return cmd_omega_path(o, op_gains, op_lambda, op_grid, op_check, op_out);
    if (p1->parsed())
      return cmd_procedure1(o, p1_system, p1_maxk, p1_h, p1_out);
    if (cert->parsed())
      return cmd_certify(o, c_system, c_blocks, c_maxk, c_out, c_gains_out,
                         c_path_out);
    if (ver->parsed()) {
      const bool seed_given = ver->get_option("--seed")->count() > 0;
      return cmd_verify(o, seed_given, v_cert, v_system, v_out);
    }
    if (rep->parsed()) return cmd_report(o, r_system, r_out);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;  // --help
    return finish("error", 2);
  } catch (const fsiss::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return finish("error", 2);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return finish("error", 2);
  }
  return finish("error", 2);
}
