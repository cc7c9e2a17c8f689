#pragma once

#include <cmath>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "asymreg/config.hpp"
#include "asymreg/experiments.hpp"
#include "asymreg/io.hpp"
#include "asymreg/oracle_vamp.hpp"
#include "asymreg/replica.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/state_evolution.hpp"

namespace asymreg {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNonConvergence = 2 };

/// Files produced by one dispatch. `json` is always filled; `csv` only for
/// tabular outputs.
struct Artifacts {
  json summary;
  std::string csv;
  int exit_code = kExitOk;
};

inline json config_summary(const RunConfig& c) {
  json j = {{"subcommand", to_string(c.subcommand)},
            {"ensemble", to_string(c.ensemble)},
            {"alpha", c.alpha},
            {"n", c.n},
            {"rho", c.rho},
            {"delta0", c.delta0},
            {"lambda1", c.lambda1},
            {"lambda2", c.lambda2},
            {"loss_scaling", c.loss_scaling == LossScaling::sum ? "sum" : "mean"},
            {"seed", c.seed}};
  if (c.ensemble == EnsembleKind::uniform_singular) j["shift"] = c.shift;
  if (c.subcommand == Subcommand::experiment) {
    j["experiment"] = to_string(c.experiment);
    j["realizations"] = c.realizations;
  }
  return j;
}

namespace detail {

inline Artifacts run_predict(const RunConfig& c) {
  const FixedPointReport r = solve_se(c.se_params());
  Artifacts a;
  a.summary = {{"config", config_summary(c)}, {"report", to_json(r)}};
  a.exit_code = r.converged ? kExitOk : kExitNonConvergence;
  return a;
}

inline Artifacts run_replica(const RunConfig& c) {
  const SEParams p = c.se_params();
  const FixedPointReport se = solve_se(p);
  const FixedPointReport rp = solve_replica(p);
  const double gap = std::max(std::abs(se.E - rp.E) / (1.0 + std::abs(se.E)), std::abs(se.V - rp.V) / (1.0 + std::abs(se.V)));
  Artifacts a;
  a.summary = {{"config", config_summary(c)},
               {"state_evolution", to_json(se)},
               {"replica", to_json(rp)},
               {"gap", num(gap)}};
  a.exit_code = se.converged && rp.converged ? kExitOk : kExitNonConvergence;
  return a;
}

inline Artifacts run_vamp_cmd(const RunConfig& c) {
  const SEParams p = c.se_params();
  const FixedPointReport fp = solve_se(p);
  Artifacts a;
  if (!fp.converged) {
    a.summary = {{"config", config_summary(c)}, {"fixed_point", to_json(fp)}, {"status", "no_fixed_point"}};
    a.exit_code = kExitNonConvergence;
    return a;
  }
  const ProblemInstance inst = generate_instance(c.matrix_ensemble(), c.rho, c.delta0, c.seed);
  VampConfig vc = VampConfig::from_fixed_point(fp, p.law, c.rho + c.delta0);
  vc.mode = c.vamp_mode;
  vc.max_iters = c.vamp_max_iters;
  vc.tol = c.vamp_tol;
  const VampResult res = run_vamp(vc, p.penalty, inst, substream_seed(c.seed, 7));
  a.summary = {{"config", config_summary(c)},
               {"fixed_point", to_json(fp)},
               {"vamp", {{"a1", vc.a1}, {"a2", vc.a2}, {"v", vc.v}}},
               {"status", to_string(res.status)},
               {"iterations", res.iterations},
               {"kkt_residual", num(res.checks.kkt_residual)},
               {"contraction_ratio", num(res.checks.contraction_ratio)},
               {"final_mse", num(res.trace.mse.empty() ? std::nan("") : res.trace.mse.back())},
               {"trace", to_json(res.trace)}};
  a.csv = trace_csv(res.trace);
  a.exit_code = res.status == VampStatus::converged ? kExitOk : kExitNonConvergence;
  return a;
}

inline bool sweep_ok(const SweepResult& s) {
  for (double v : s.predicted_mse)
    if (!std::isfinite(v)) return false;
  for (int b : s.nonconverged)
    if (b > 0) return false;
  return true;
}

inline std::string sweeps_csv(const std::vector<SweepResult>& sweeps, const std::string& grid_name) {
  std::string out;
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    std::string block = sweep_csv(sweeps[i], grid_name);
    // prefix a label column so several sweeps share one table
    std::istringstream is(block);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
      if (header) {
        if (i == 0) out += "label," + line + "\n";
        header = false;
      } else {
        out += sweeps[i].label + "," + line + "\n";
      }
    }
  }
  return out;
}

inline Artifacts run_experiment(const RunConfig& c) {
  Artifacts a;
  const SweepOptions opt = c.sweep_options();
  switch (c.experiment) {
    case ExperimentKind::lambda_sweep: {
      std::vector<MatrixEnsemble> ens;
      const std::vector<EnsembleKind> kinds = c.ensembles.empty() ? std::vector<EnsembleKind>{c.ensemble} : c.ensembles;
      for (EnsembleKind k : kinds) {
        RunConfig ck = c;
        ck.ensemble = k;
        ens.push_back(ck.matrix_ensemble());
      }
      const auto sweeps = sweep_lambda(ens, c.rho, c.delta0, c.lambda1_grid, c.realizations, c.seed, opt);
      a.summary = {{"config", config_summary(c)}, {"sweeps", json::array()}};
      for (const auto& s : sweeps) {
        a.summary["sweeps"].push_back(to_json(s));
        if (!sweep_ok(s)) a.exit_code = kExitNonConvergence;
      }
      a.csv = sweeps_csv(sweeps, "lambda1");
      break;
    }
    case ExperimentKind::alpha_sweep: {
      const std::vector<double> l1s = c.lambda1_grid;
      const auto sweeps = sweep_alpha(c.matrix_ensemble(), c.rho, c.delta0, c.alpha_grid, l1s, c.realizations, c.seed, opt);
      a.summary = {{"config", config_summary(c)}, {"sweeps", json::array()}};
      for (const auto& s : sweeps) {
        a.summary["sweeps"].push_back(to_json(s));
        if (!sweep_ok(s)) a.exit_code = kExitNonConvergence;
      }
      a.csv = sweeps_csv(sweeps, "alpha");
      break;
    }
    case ExperimentKind::convergence: {
      ConvergenceStudyOptions o;
      o.tol = c.vamp_tol;
      o.max_iters = c.vamp_max_iters;
      o.se = c.se_params();
      o.family = c.matrix_ensemble();
      const auto cells = convergence_study(c.alpha_grid, c.lambda1, c.lambda2_grid, c.n, c.rho, c.delta0, c.seed, o);
      a.summary = {{"config", config_summary(c)}, {"cells", json::array()}};
      std::ostringstream os;
      os << "alpha,lambda2,k,d_k,mse_k\n";
      for (const auto& cell : cells) {
        a.summary["cells"].push_back({{"alpha", cell.alpha},
                                      {"lambda2", cell.lambda2},
                                      {"status", to_string(cell.status)},
                                      {"first_below_tol", cell.first_below_tol},
                                      {"contraction_ratio", num(cell.contraction_ratio)},
                                      {"bound_o1", num(cell.bound_o1)},
                                      {"bound_o2", num(cell.bound_o2)},
                                      {"kkt_residual", num(cell.kkt_residual)}});
        std::istringstream is(trace_csv(cell.trace));
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) os << fmt17(cell.alpha) << ',' << fmt17(cell.lambda2) << ',' << line << '\n';
      }
      a.csv = os.str();
      break;
    }
  }
  return a;
}

inline Artifacts run_spectrum(const RunConfig& c) {
  const MatrixEnsemble ens = c.matrix_ensemble();
  const SpectralLaw law = law_for_ensemble(ens);
  Artifacts a;
  json tr = json::array();
  for (double z : c.z_grid) {
    json row = {{"z", z}};
    if (z < law.support_min()) {
      const double s = law.stieltjes(z);
      row["S"] = s;
      row["dS"] = law.stieltjes_derivative(z);
      // R at x = -S(z) exercises the inverse
      row["x"] = -s;
      try {
        row["R"] = num(law.r_transform(-s));
        row["dR"] = num(law.r_transform_derivative(-s));
      } catch (const Error&) {
        row["R"] = nullptr;
        row["dR"] = nullptr;
      }
    }
    tr.push_back(row);
  }
  const Eigen::MatrixXd f = sample_matrix(ens, substream_seed(c.seed, 0));
  const Eigen::MatrixXd cmat = f.transpose() * f;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cmat, Eigen::EigenvaluesOnly);
  std::vector<double> eig(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  a.summary = {{"config", config_summary(c)},
               {"law", to_json(law)},
               {"mean", law.mean()},
               {"support", {law.support_min(), law.support_max()}},
               {"transforms", tr},
               {"eigenvalues", nums(eig)}};
  std::ostringstream os;
  os << "lambda,law_cdf\n";
  for (double l : eig) os << fmt17(l) << ',' << fmt17(law.cdf(l)) << '\n';
  a.csv = os.str();
  return a;
}

}  // namespace detail

/// Runs the configured subcommand. Errors thrown by the numerics are mapped to
/// exit code 1 when they are parameter problems and 2 otherwise.
inline Artifacts run(const RunConfig& c) {
  switch (c.subcommand) {
    case Subcommand::predict: return detail::run_predict(c);
    case Subcommand::replica: return detail::run_replica(c);
    case Subcommand::vamp: return detail::run_vamp_cmd(c);
    case Subcommand::experiment: return detail::run_experiment(c);
    case Subcommand::spectrum: return detail::run_spectrum(c);
  }
  throw ParameterError("unknown subcommand");
}

/// Writes `<out>.json` (and `<out>.csv` for tables); with an empty `out` the
/// JSON goes to `stdout_`.
inline int dispatch(const RunConfig& c, std::ostream& stdout_ = std::cout, std::ostream& stderr_ = std::cerr) {
  Artifacts a;
  try {
    a = run(c);
  } catch (const ParameterError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RangeError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvariantError& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    stderr_ << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  }
  const std::string text = a.summary.dump(2) + "\n";
  if (c.out.empty()) {
    stdout_ << text;
  } else {
    write_text(c.out + ".json", text);
    if (!a.csv.empty()) write_text(c.out + ".csv", a.csv);
  }
  if (a.exit_code == kExitNonConvergence) stderr_ << "warning: solver did not converge\n";
  return a.exit_code;
}

}  // namespace asymreg
