#pragma once

/**
 * @file io.hpp
 * @brief File formats: system / gain / path / certificate / gain-fit JSON and
 *        trajectory CSV. Schemas are documented in docs/formats.md.
 *
 * Writers never emit timestamps, so identical inputs reproduce identical
 * bytes; callers may attach a "config" echo and the tool version.
 */

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fsiss/certificates.hpp"
#include "fsiss/common.hpp"
#include "fsiss/gain_estimation.hpp"
#include "fsiss/gain_network.hpp"
#include "fsiss/system_model.hpp"

namespace fsiss {

using Json = nlohmann::ordered_json;

// -- helpers -------------------------------------------------------------------

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("bad JSON in '" + path + "': " + e.what());
  }
  return j;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << body;
}

inline void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// -- systems --------------------------------------------------------------------

inline Json to_json(const SystemModel& sys) {
  Json j;
  j["name"] = sys.name();
  j["n"] = sys.n();
  j["m"] = sys.m();
  j["blocks"] = sys.blocks();
  j["update"] = sys.update_sources();
  if (!sys.description().empty()) j["description"] = sys.description();
  return j;
}

inline SystemModel system_from_json(const Json& j) {
  try {
    return SystemModel(j.at("name").get<std::string>(), j.at("n").get<int>(),
                       j.at("m").get<int>(),
                       j.at("blocks").get<std::vector<int>>(),
                       j.at("update").get<std::vector<std::string>>(),
                       j.value("description", std::string{}));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("system file: ") + e.what());
  }
}

// -- gains ----------------------------------------------------------------------

inline Json to_json(const GainMatrix& gm) {
  Json j;
  j["n"] = gm.n;
  j["form"] = to_string(gm.form);
  Json rows = Json::array();
  for (const auto& row : gm.internal) {
    Json r = Json::array();
    for (const auto& e : row)
      r.push_back(e ? Json(e->to_string()) : Json(nullptr));
    rows.push_back(std::move(r));
  }
  j["gamma"] = std::move(rows);
  Json u = Json::array();
  for (const auto& e : gm.input)
    u.push_back(e ? Json(e->to_string()) : Json(nullptr));
  j["gamma_u"] = std::move(u);
  return j;
}

inline GainMatrix gains_from_json(const Json& j) {
  GainMatrix gm;
  try {
    gm.n = j.at("n").get<int>();
    const std::string form = j.value("form", "max");
    gm.form = form == "sum" ? GainForm::Sum : GainForm::Max;
    for (const auto& row : j.at("gamma")) {
      std::vector<GainEntry> r;
      for (const auto& e : row)
        r.push_back(e.is_null() ? GainEntry()
                                : GainEntry(ScalarFn::parse(
                                      e.get<std::string>())));
      gm.internal.push_back(std::move(r));
    }
    if (j.contains("gamma_u")) {
      for (const auto& e : j.at("gamma_u"))
        gm.input.push_back(e.is_null() ? GainEntry()
                                       : GainEntry(ScalarFn::parse(
                                             e.get<std::string>())));
    } else {
      gm.input.assign(static_cast<size_t>(gm.n), GainEntry());
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("gain file: ") + e.what());
  }
  if (static_cast<int>(gm.internal.size()) != gm.n ||
      static_cast<int>(gm.input.size()) != gm.n)
    throw ParseError("gain file: dimension mismatch");
  for (const auto& row : gm.internal)
    if (static_cast<int>(row.size()) != gm.n)
      throw ParseError("gain file: gamma must be square");
  const auto v = validate(gm);
  if (!v.pass) throw ParseError("gain file: " + v.errors.front());
  return gm;
}

// -- diagonal operators ------------------------------------------------------------

inline Json to_json(const DiagonalOp& d) {
  Json j;
  Json del = Json::array();
  for (const auto& e : d.delta)
    del.push_back(e ? Json(e->to_string()) : Json(nullptr));
  j["delta"] = std::move(del);
  if (d.factors) {
    Json f1 = Json::array(), f2 = Json::array();
    for (const auto& e : d.factors->first)
      f1.push_back(e ? Json(e->to_string()) : Json(nullptr));
    for (const auto& e : d.factors->second)
      f2.push_back(e ? Json(e->to_string()) : Json(nullptr));
    j["factor1"] = std::move(f1);
    j["factor2"] = std::move(f2);
  }
  return j;
}

inline DiagonalOp diag_from_json(const Json& j) {
  DiagonalOp d;
  auto read_col = [](const Json& arr) {
    std::vector<GainEntry> out;
    for (const auto& e : arr)
      out.push_back(e.is_null() ? GainEntry()
                                : GainEntry(ScalarFn::parse(
                                      e.get<std::string>())));
    return out;
  };
  try {
    d.delta = read_col(j.at("delta"));
    if (j.contains("factor1") != j.contains("factor2"))
      throw ParseError("diagonal file: factor pair must be complete");
    if (j.contains("factor1"))
      d.factors = {read_col(j.at("factor1")), read_col(j.at("factor2"))};
  } catch (const Json::exception& e) {
    throw ParseError(std::string("diagonal file: ") + e.what());
  }
  return d;
}

// -- Omega-paths --------------------------------------------------------------------

inline Json to_json(const OmegaPath& p) {
  Json j;
  Json comps = Json::array();
  for (const auto& c : p.components) comps.push_back(c.to_string());
  j["components"] = std::move(comps);
  j["margin"] = p.margin;
  return j;
}

inline OmegaPath path_from_json(const Json& j) {
  try {
    std::vector<ScalarFn> comps;
    for (const auto& e : j.at("components"))
      comps.push_back(ScalarFn::parse(e.get<std::string>()));
    OmegaPath p = OmegaPath::from_components(std::move(comps));
    p.margin = j.value("margin", -1.0);
    return p;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("path file: ") + e.what());
  }
}

// -- certificates --------------------------------------------------------------------

inline Json to_json(const VSpec& v) {
  Json j;
  switch (v.kind) {
    case VSpec::Kind::PlainNorm: j["kind"] = "plain-norm"; break;
    case VSpec::Kind::WeightedBlockMax: j["kind"] = "weighted-block-max"; break;
    case VSpec::Kind::ComposedBlockMax: j["kind"] = "composed-block-max"; break;
  }
  j["norm"] = to_string(v.norm);
  if (v.kind == VSpec::Kind::WeightedBlockMax) j["weights"] = v.weights;
  if (v.kind == VSpec::Kind::ComposedBlockMax) {
    Json w = Json::array();
    for (const auto& f : v.wrappers) w.push_back(f.to_string());
    j["wrappers"] = std::move(w);
  }
  j["lambda"] = v.lambda;
  return j;
}

inline VSpec vspec_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const Norm norm = parse_norm(j.at("norm").get<std::string>());
  const double lambda = j.value("lambda", 1.0);
  if (kind == "plain-norm") return VSpec::plain(norm, lambda);
  if (kind == "weighted-block-max")
    return VSpec::block_max(norm, j.at("weights").get<std::vector<double>>(),
                            lambda);
  if (kind == "composed-block-max") {
    std::vector<ScalarFn> fs;
    for (const auto& e : j.at("wrappers"))
      fs.push_back(ScalarFn::parse(e.get<std::string>()));
    return VSpec::composed_block_max(norm, std::move(fs));
  }
  throw ParseError("certificate file: unknown V kind '" + kind + "'");
}

inline Json to_json(const Evidence& e) {
  Json j;
  j["samples"] = e.samples;
  j["seed"] = e.seed;
  j["radius"] = e.radius;
  j["input_bound"] = e.input_bound;
  j["worst_slack"] = e.worst_slack;
  j["label"] = e.label;
  return j;
}

inline Json to_json(const Certificate& c) {
  Json j;
  j["v"] = to_json(c.v);
  j["blocks"] = c.blocks;
  j["M"] = c.m_steps;
  j["rho"] = c.rho.to_string();
  j["sigma"] = c.sigma.to_string();
  j["alpha1"] = c.alpha1.to_string();
  j["alpha2"] = c.alpha2.to_string();
  j["evidence"] = to_json(c.evidence);
  j["provenance"] = c.provenance;
  return j;
}

inline Certificate certificate_from_json(const Json& j) {
  try {
    Certificate c;
    c.v = vspec_from_json(j.at("v"));
    c.blocks = j.at("blocks").get<std::vector<int>>();
    c.m_steps = j.at("M").get<int>();
    c.rho = ScalarFn::parse(j.at("rho").get<std::string>());
    c.sigma = ScalarFn::parse(j.at("sigma").get<std::string>());
    c.alpha1 = ScalarFn::parse(j.at("alpha1").get<std::string>());
    c.alpha2 = ScalarFn::parse(j.at("alpha2").get<std::string>());
    if (j.contains("evidence")) {
      const auto& e = j.at("evidence");
      c.evidence.samples = e.value("samples", std::size_t{0});
      c.evidence.seed = e.value("seed", std::uint64_t{0});
      c.evidence.radius = e.value("radius", 0.0);
      c.evidence.input_bound = e.value("input_bound", 0.0);
      c.evidence.worst_slack = e.value("worst_slack", 0.0);
      c.evidence.label = e.value("label", std::string{"unsampled"});
    }
    c.provenance = j.value("provenance", std::string{"user"});
    return c;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("certificate file: ") + e.what());
  }
}

// -- gain fits -----------------------------------------------------------------------

inline Json to_json(const GainFit& f) {
  Json j;
  j["k"] = f.k;
  j["sum_form"] = Json{{"a", f.sum_a}, {"b", f.sum_b}};
  j["max_form"] = to_json(f.max_form);
  j["residuals"] = Json{{"worst_sum_slack", f.worst_sum_slack},
                        {"worst_max_slack", f.worst_max_slack}};
  j["cloud"] =
      Json{{"samples", f.samples}, {"seed", f.seed}, {"radius", f.radius}};
  return j;
}

inline GainFit gainfit_from_json(const Json& j) {
  try {
    GainFit f;
    f.k = j.at("k").get<int>();
    f.sum_a = j.at("sum_form").at("a").get<std::vector<std::vector<double>>>();
    f.sum_b = j.at("sum_form").at("b").get<std::vector<double>>();
    f.max_form = gains_from_json(j.at("max_form"));
    f.worst_sum_slack = j.at("residuals").value("worst_sum_slack", 0.0);
    f.worst_max_slack = j.at("residuals").value("worst_max_slack", 0.0);
    f.samples = j.at("cloud").value("samples", std::size_t{0});
    f.seed = j.at("cloud").value("seed", std::uint64_t{0});
    f.radius = j.at("cloud").value("radius", 0.0);
    return f;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("gain-fit file: ") + e.what());
  }
}

// -- trajectories ---------------------------------------------------------------------

/// CSV with header k,x1,...,xn,u1,...,um; row k carries x(k) and the input
/// u(k) that the signal supplies at step k.
inline std::string trajectory_csv(const SystemModel& sys, const Trajectory& tr,
                                  const InputSignal& u) {
  std::ostringstream os;
  os << "k";
  for (int i = 1; i <= sys.n(); ++i) os << ",x" << i;
  for (int i = 1; i <= sys.m(); ++i) os << ",u" << i;
  os << "\n";
  for (size_t k = 0; k < tr.states.size(); ++k) {
    os << k;
    for (double v : tr.states[k]) os << ',' << fmt_g17(v);
    if (sys.m() > 0) {
      const bool have = k < u.horizon();
      for (int i = 0; i < sys.m(); ++i)
        os << ',' << (have ? fmt_g17(u.at(k)[static_cast<size_t>(i)]) : "0");
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace fsiss
