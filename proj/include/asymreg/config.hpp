#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "asymreg/errors.hpp"
#include "asymreg/experiments.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/state_evolution.hpp"

namespace asymreg {

/// Raised by parse_config with every problem found, one message per entry.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> errors) : Error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& e) {
    std::string s;
    for (const auto& x : e) s += (s.empty() ? "" : "\n") + x;
    return s;
  }
  std::vector<std::string> errors_;
};

enum class Subcommand { predict, replica, vamp, experiment, spectrum };
enum class ExperimentKind { lambda_sweep, alpha_sweep, convergence };

inline std::string to_string(Subcommand s) {
  switch (s) {
    case Subcommand::predict: return "predict";
    case Subcommand::replica: return "replica";
    case Subcommand::vamp: return "vamp";
    case Subcommand::experiment: return "experiment";
    case Subcommand::spectrum: return "spectrum";
  }
  return "unknown";
}

inline std::string to_string(ExperimentKind e) {
  switch (e) {
    case ExperimentKind::lambda_sweep: return "lambda_sweep";
    case ExperimentKind::alpha_sweep: return "alpha_sweep";
    case ExperimentKind::convergence: return "convergence";
  }
  return "unknown";
}

inline std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i)
    v.push_back(n == 1 ? a : std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (n - 1)));
  return v;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

/// Everything a run needs. Defaults give a LASSO on a Gaussian matrix at
/// alpha = 2 with rho = 0.3 and delta0 = 0.01.
struct RunConfig {
  Subcommand subcommand = Subcommand::predict;

  // matrix ensemble
  EnsembleKind ensemble = EnsembleKind::gaussian_iid;
  std::vector<EnsembleKind> ensembles;  // lambda_sweep compares these when non-empty
  double alpha = 2.0;
  int n = 100;
  double shift = 1.0;
  std::vector<double> singular_values;

  // prior, noise, penalty
  double rho = 0.3;
  double delta0 = 0.01;
  double lambda1 = 0.1;
  double lambda2 = 0.0;
  LossScaling loss_scaling = LossScaling::sum;

  // state evolution
  double damping = 0.5;
  double tol = 1e-11;
  int max_iters = 5000;
  BackendKind backend = BackendKind::closed_form;
  long mc_samples = 1000000;
  int hermite_nodes = 96;

  // oracle-VAMP
  VampMode vamp_mode = VampMode::oracle;
  int vamp_max_iters = 500;
  double vamp_tol = 1e-8;

  // experiments
  ExperimentKind experiment = ExperimentKind::lambda_sweep;
  std::vector<double> lambda1_grid = logspace(1e-3, 1.0, 10);
  std::vector<double> lambda2_grid = {0.1, 0.2, 0.3};
  std::vector<double> alpha_grid = {0.1, 0.2, 0.5, 1.0, 2.0};
  int realizations = 20;
  double cd_tol = 1e-10;
  int cd_max_passes = 200000;

  // spectrum
  std::vector<double> z_grid = {-0.1, -0.5, -1.0, -2.0, -5.0};

  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out;

  MatrixEnsemble matrix_ensemble() const {
    MatrixEnsemble e;
    e.kind = ensemble;
    e.alpha = alpha;
    e.n = n;
    e.shift = shift;
    e.singular_values = singular_values;
    return e;
  }

  /// Penalty on the unscaled objective 1/2 ||y - Fx||^2.
  Penalty penalty() const { return effective_penalty(Penalty(lambda1, lambda2), loss_scaling, matrix_ensemble().m()); }

  SEParams se_params() const {
    SEParams p;
    p.prior = Prior(rho);
    p.penalty = penalty();
    p.delta0 = delta0;
    p.law = law_for_ensemble(matrix_ensemble());
    p.damping = damping;
    p.tol = tol;
    p.max_iters = max_iters;
    switch (backend) {
      case BackendKind::closed_form: p.backend = MomentBackend{}; break;
      case BackendKind::quadrature: p.backend = MomentBackend::quadrature(hermite_nodes); break;
      case BackendKind::monte_carlo: p.backend = MomentBackend::monte_carlo(mc_samples, seed); break;
    }
    return p;
  }

  SweepOptions sweep_options() const {
    SweepOptions o;
    o.lambda2 = lambda2;
    o.scaling = loss_scaling;
    o.cd_tol = cd_tol;
    o.cd_max_passes = cd_max_passes;
    o.jobs = jobs;
    o.se = se_params();
    return o;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [p, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && p == t.data() + t.size();
}

inline bool parse_int(const std::string& s, long long& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec == std::errc() && p == t.data() + t.size()) return true;
  // accept integral scientific notation such as 1e6
  double d;
  if (!parse_double(t, d) || d != std::floor(d) || std::abs(d) > 9e18) return false;
  out = static_cast<long long>(d);
  return true;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

// "logspace(a, b, n)", "linspace(a, b, n)" or an explicit list.
inline bool parse_list(const std::string& s, std::vector<double>& out) {
  const std::string t = trim(s);
  for (const char* fn : {"logspace", "linspace"}) {
    const std::string f = fn;
    if (t.rfind(f + "(", 0) == 0 && t.back() == ')') {
      const auto args = split_list(t.substr(f.size() + 1, t.size() - f.size() - 2));
      double a, b;
      long long n;
      if (args.size() != 3 || !parse_double(args[0], a) || !parse_double(args[1], b) || !parse_int(args[2], n) ||
          n < 1 || n > 100000)
        return false;
      if (f == "logspace" && !(a > 0.0 && b > 0.0)) return false;
      out = f == "logspace" ? logspace(a, b, static_cast<int>(n)) : linspace(a, b, static_cast<int>(n));
      return true;
    }
  }
  std::vector<double> v;
  for (const auto& p : split_list(t)) {
    double d;
    if (!parse_double(p, d)) return false;
    v.push_back(d);
  }
  out = std::move(v);
  return true;
}

struct Entry {
  std::string value;
  std::string where;
};

}  // namespace detail

/// Keys accepted by parse_config, in documentation order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "subcommand",  "ensemble",     "ensembles",      "alpha",         "n",          "shift",
      "singular_values", "rho",      "delta0",         "lambda1",       "lambda2",    "loss_scaling",
      "damping",     "tol",          "max_iters",      "backend",       "mc_samples", "hermite_nodes",
      "vamp_mode",   "vamp_max_iters", "vamp_tol",     "experiment",    "lambda1_grid", "lambda2_grid",
      "alpha_grid",  "realizations", "cd_tol",         "cd_max_passes", "z_grid",     "seed",
      "jobs",        "out"};
  return keys;
}

/// Parses `key = value` lines ('#' and ';' start comments), then applies the
/// `key=value` overrides in order. All problems are collected before throwing.
inline RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {}) {
  std::vector<std::string> errors;
  std::map<std::string, detail::Entry> entries;
  std::vector<std::pair<std::string, std::string>> order;

  auto take = [&](const std::string& raw, const std::string& where) {
    std::string line = raw;
    const auto c = line.find_first_of("#;");
    if (c != std::string::npos) line = line.substr(0, c);
    line = detail::trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected 'key = value', got '" + line + "'");
      return;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      errors.push_back(where + ": unknown key '" + key + "'");
      return;
    }
    entries[key] = {value, where};
  };

  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) take(raw, "line " + std::to_string(++lineno));
  for (const auto& o : overrides) take(o, "--set " + o);

  RunConfig c;
  auto bad = [&](const std::string& key, const std::string& msg) {
    errors.push_back(entries[key].where + ": " + key + " " + msg);
  };
  auto get_double = [&](const std::string& key, double& dst, double lo, double hi, bool lo_open = false) {
    if (!entries.count(key)) return;
    double v;
    if (!detail::parse_double(entries[key].value, v)) return bad(key, "expects a number, got '" + entries[key].value + "'");
    if (!(lo_open ? v > lo : v >= lo) || !(v <= hi)) {
      std::ostringstream os;
      os << "= " << entries[key].value << " is out of range " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
      return bad(key, os.str());
    }
    dst = v;
  };
  auto get_int = [&](const std::string& key, auto& dst, long long lo, long long hi) {
    if (!entries.count(key)) return;
    long long v;
    if (!detail::parse_int(entries[key].value, v)) return bad(key, "expects an integer, got '" + entries[key].value + "'");
    if (v < lo || v > hi)
      return bad(key, "= " + entries[key].value + " is out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    dst = static_cast<std::remove_reference_t<decltype(dst)>>(v);
  };
  auto get_list = [&](const std::string& key, std::vector<double>& dst, const std::function<bool(double)>& ok,
                      const std::string& what) {
    if (!entries.count(key)) return;
    std::vector<double> v;
    if (!detail::parse_list(entries[key].value, v)) return bad(key, "expects a list of numbers, got '" + entries[key].value + "'");
    for (double x : v)
      if (!ok(x)) return bad(key, "entries must be " + what);
    dst = std::move(v);
  };
  auto get_enum = [&](const std::string& key, auto& dst, const auto& table) {
    if (!entries.count(key)) return;
    const std::string v = entries[key].value;
    for (const auto& [name, val] : table)
      if (name == v) {
        dst = val;
        return;
      }
    std::string names;
    for (const auto& [name, val] : table) names += (names.empty() ? "" : ", ") + std::string(name);
    bad(key, "must be one of {" + names + "}, got '" + v + "'");
  };

  using P = std::pair<const char*, EnsembleKind>;
  const std::vector<P> ens_table = {{"gaussian", EnsembleKind::gaussian_iid},
                                    {"row_orthogonal", EnsembleKind::row_orthogonal},
                                    {"uniform_singular", EnsembleKind::uniform_singular},
                                    {"explicit", EnsembleKind::explicit_singular_values}};
  get_enum("subcommand", c.subcommand,
           std::vector<std::pair<const char*, Subcommand>>{{"predict", Subcommand::predict},
                                                           {"replica", Subcommand::replica},
                                                           {"vamp", Subcommand::vamp},
                                                           {"experiment", Subcommand::experiment},
                                                           {"spectrum", Subcommand::spectrum}});
  get_enum("ensemble", c.ensemble, ens_table);
  if (entries.count("ensembles")) {
    c.ensembles.clear();
    for (const auto& name : detail::split_list(entries["ensembles"].value)) {
      try {
        c.ensembles.push_back(ensemble_kind_from_string(name));
      } catch (const Error&) {
        bad("ensembles", "has unknown ensemble '" + name + "'");
      }
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  get_double("alpha", c.alpha, 0.0, inf, true);
  get_int("n", c.n, 1, 100000);
  get_double("shift", c.shift, 0.0, inf);
  get_list("singular_values", c.singular_values, [](double x) { return x >= 0.0 && std::isfinite(x); },
           "finite and nonnegative");
  get_double("rho", c.rho, 0.0, 1.0);
  get_double("delta0", c.delta0, 0.0, inf);
  get_double("lambda1", c.lambda1, 0.0, inf);
  get_double("lambda2", c.lambda2, 0.0, inf);
  get_enum("loss_scaling", c.loss_scaling,
           std::vector<std::pair<const char*, LossScaling>>{{"sum", LossScaling::sum}, {"mean", LossScaling::mean}});
  get_double("damping", c.damping, 0.0, 1.0, true);
  get_double("tol", c.tol, 0.0, 1.0, true);
  get_int("max_iters", c.max_iters, 1, 100000000);
  get_enum("backend", c.backend,
           std::vector<std::pair<const char*, BackendKind>>{{"closed_form", BackendKind::closed_form},
                                                            {"quadrature", BackendKind::quadrature},
                                                            {"monte_carlo", BackendKind::monte_carlo}});
  get_int("mc_samples", c.mc_samples, 2, 1000000000);
  get_int("hermite_nodes", c.hermite_nodes, 2, 400);
  get_enum("vamp_mode", c.vamp_mode,
           std::vector<std::pair<const char*, VampMode>>{{"oracle", VampMode::oracle}, {"adaptive", VampMode::adaptive}});
  get_int("vamp_max_iters", c.vamp_max_iters, 1, 100000000);
  get_double("vamp_tol", c.vamp_tol, 0.0, 1.0, true);
  get_enum("experiment", c.experiment,
           std::vector<std::pair<const char*, ExperimentKind>>{{"lambda_sweep", ExperimentKind::lambda_sweep},
                                                               {"alpha_sweep", ExperimentKind::alpha_sweep},
                                                               {"convergence", ExperimentKind::convergence}});
  auto nonneg = [](double x) { return x >= 0.0 && std::isfinite(x); };
  auto pos = [](double x) { return x > 0.0 && std::isfinite(x); };
  get_list("lambda1_grid", c.lambda1_grid, nonneg, "finite and nonnegative");
  get_list("lambda2_grid", c.lambda2_grid, nonneg, "finite and nonnegative");
  get_list("alpha_grid", c.alpha_grid, pos, "positive");
  get_list("z_grid", c.z_grid, [](double x) { return std::isfinite(x); }, "finite");
  get_int("realizations", c.realizations, 1, 10000000);
  get_double("cd_tol", c.cd_tol, 0.0, 1.0, true);
  get_int("cd_max_passes", c.cd_max_passes, 1, 1000000000);
  get_int("seed", c.seed, 0, std::numeric_limits<long long>::max());
  get_int("jobs", c.jobs, 1, 1024);
  if (entries.count("out")) c.out = entries["out"].value;

  if (errors.empty()) {
    try {
      c.matrix_ensemble().validate();
      if (c.ensemble == EnsembleKind::explicit_singular_values || c.subcommand != Subcommand::experiment)
        (void)law_for_ensemble(c.matrix_ensemble());
    } catch (const Error& e) {
      errors.push_back(std::string("ensemble: ") + e.what());
    }
    if (c.subcommand == Subcommand::experiment && c.experiment == ExperimentKind::lambda_sweep &&
        c.lambda1_grid.empty())
      errors.push_back("lambda1_grid: must not be empty for lambda_sweep");
    if (c.subcommand == Subcommand::experiment && c.experiment != ExperimentKind::lambda_sweep && c.alpha_grid.empty())
      errors.push_back("alpha_grid: must not be empty");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

}  // namespace asymreg
