#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "asymreg/errors.hpp"
#include "asymreg/experiments.hpp"
#include "asymreg/oracle_vamp.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/state_evolution.hpp"

namespace asymreg {

using json = nlohmann::json;

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

// JSON has no NaN or infinity; they are written as null / strings.
inline json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double to_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParameterError("json: expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

inline json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline std::vector<double> to_nums(const json& j) {
  std::vector<double> v;
  for (const auto& e : j) v.push_back(to_num(e));
  return v;
}

}  // namespace detail

// SpectralLaw schema:
// {"atoms": [[loc, w], ...],
//  "density": {"kind": "marchenko_pastur"|"uniform_singular",
//              "params": {"alpha": a, "shift": p}, "support": [lo, hi], "weight": w}}
// "density" is null for purely atomic laws.
inline json to_json(const SpectralLaw& law) {
  json j;
  j["atoms"] = json::array();
  for (const auto& a : law.atoms()) j["atoms"].push_back({a.loc, a.weight});
  if (law.continuous()) {
    const auto& c = *law.continuous();
    j["density"] = {{"kind", to_string(c.kind)},
                    {"params", {{"alpha", c.alpha}, {"shift", c.shift}}},
                    {"support", {c.lo, c.hi}},
                    {"weight", c.weight}};
  } else {
    j["density"] = nullptr;
  }
  return j;
}

inline SpectralLaw spectral_law_from_json(const json& j) {
  std::vector<Atom> atoms;
  for (const auto& a : j.at("atoms")) atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
  std::optional<ContinuousPart> cont;
  if (j.contains("density") && !j["density"].is_null()) {
    const auto& d = j["density"];
    const std::string kind = d.at("kind").get<std::string>();
    const double alpha = d.at("params").at("alpha").get<double>();
    SpectralLaw base = kind == "marchenko_pastur" ? SpectralLaw::marchenko_pastur(alpha)
                       : kind == "uniform_singular"
                           ? SpectralLaw::uniform_singular(alpha, d.at("params").at("shift").get<double>())
                           : throw ParameterError("spectral law json: unknown density kind '" + kind + "'");
    cont = *base.continuous();
    const double w = d.at("weight").get<double>();
    if (std::abs(w - cont->weight) > 1e-12)
      throw InvariantError("spectral law json: density weight does not match its parameters");
  }
  return SpectralLaw(std::move(atoms), std::move(cont));
}

inline json to_json(const FixedPointReport& r) {
  return {{"E", detail::num(r.E)},       {"V", detail::num(r.V)},
          {"a1", detail::num(r.a1)},     {"a2", detail::num(r.a2)},
          {"tau1", detail::num(r.tau1)}, {"tau2", detail::num(r.tau2)},
          {"converged", r.converged},    {"residual", detail::num(r.residual)},
          {"iterations", r.iterations}};
}

inline FixedPointReport fixed_point_report_from_json(const json& j) {
  FixedPointReport r;
  r.E = detail::to_num(j.at("E"));
  r.V = detail::to_num(j.at("V"));
  r.a1 = detail::to_num(j.at("a1"));
  r.a2 = detail::to_num(j.at("a2"));
  r.tau1 = detail::to_num(j.at("tau1"));
  r.tau2 = detail::to_num(j.at("tau2"));
  r.converged = j.at("converged").get<bool>();
  r.residual = detail::to_num(j.at("residual"));
  r.iterations = j.at("iterations").get<int>();
  return r;
}

inline bool operator==(const FixedPointReport& a, const FixedPointReport& b) {
  auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return eq(a.E, b.E) && eq(a.V, b.V) && eq(a.a1, b.a1) && eq(a.a2, b.a2) && eq(a.tau1, b.tau1) &&
         eq(a.tau2, b.tau2) && a.converged == b.converged && eq(a.residual, b.residual) &&
         a.iterations == b.iterations;
}

inline json to_json(const SweepResult& s) {
  return {{"label", s.label},
          {"grid", detail::nums(s.grid)},
          {"predicted_mse", detail::nums(s.predicted_mse)},
          {"empirical_mse_mean", detail::nums(s.empirical_mse_mean)},
          {"empirical_mse_stderr", detail::nums(s.empirical_mse_stderr)},
          {"n_realizations", s.n_realizations},
          {"seeds", s.seeds},
          {"nonconverged", s.nonconverged}};
}

inline SweepResult sweep_result_from_json(const json& j) {
  SweepResult s;
  s.label = j.at("label").get<std::string>();
  s.grid = detail::to_nums(j.at("grid"));
  s.predicted_mse = detail::to_nums(j.at("predicted_mse"));
  s.empirical_mse_mean = detail::to_nums(j.at("empirical_mse_mean"));
  s.empirical_mse_stderr = detail::to_nums(j.at("empirical_mse_stderr"));
  s.n_realizations = j.at("n_realizations").get<int>();
  s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  s.nonconverged = j.at("nonconverged").get<std::vector<int>>();
  return s;
}

inline json to_json(const ConvergenceTrace& t) { return {{"d", detail::nums(t.d)}, {"mse", detail::nums(t.mse)}}; }

inline ConvergenceTrace convergence_trace_from_json(const json& j) {
  ConvergenceTrace t;
  t.d = detail::to_nums(j.at("d"));
  t.mse = detail::to_nums(j.at("mse"));
  return t;
}

/// CSV columns: grid, predicted_mse, empirical_mse_mean, empirical_mse_stderr, nonconverged.
inline std::string sweep_csv(const SweepResult& s, const std::string& grid_name = "grid") {
  std::ostringstream os;
  os << grid_name << ",predicted_mse,empirical_mse_mean,empirical_mse_stderr,nonconverged\n";
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    os << fmt17(s.grid[i]) << ',' << fmt17(s.predicted_mse[i]) << ',' << fmt17(s.empirical_mse_mean[i]) << ','
       << fmt17(s.empirical_mse_stderr[i]) << ',' << (i < s.nonconverged.size() ? s.nonconverged[i] : 0) << '\n';
  return os.str();
}

/// CSV columns: k, d_k, mse_k (mse empty when x0 was not supplied).
inline std::string trace_csv(const ConvergenceTrace& t) {
  std::ostringstream os;
  os << "k,d_k,mse_k\n";
  for (std::size_t k = 0; k < t.d.size(); ++k) {
    os << (k + 1) << ',' << fmt17(t.d[k]) << ',';
    // d_k compares iterations k and k+1; mse is reported at iteration k+1
    if (k + 1 < t.mse.size()) os << fmt17(t.mse[k + 1]);
    os << '\n';
  }
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParameterError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw ParameterError("failed writing '" + path + "'");
}

}  // namespace asymreg
