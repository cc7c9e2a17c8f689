#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "asymreg/errors.hpp"
#include "asymreg/instance.hpp"
#include "asymreg/oracle_vamp.hpp"
#include "asymreg/proximal.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/state_evolution.hpp"

namespace asymreg {

/// How the data term is scaled in the baseline objective. `sum` is
/// 1/2 ||y - Fx||^2; `mean` is 1/(2M) ||y - Fx||^2, equivalent to multiplying
/// both penalty weights by M.
enum class LossScaling { sum, mean };

inline Penalty effective_penalty(const Penalty& p, LossScaling s, int m) {
  if (s == LossScaling::sum) return p;
  return Penalty(p.lambda1 * m, p.lambda2 * m);
}

struct CDResult {
  Eigen::VectorXd x;
  bool converged = false;
  int passes = 0;
  double gap = std::numeric_limits<double>::infinity();
};

inline double elastic_net_objective(const Eigen::MatrixXd& f, const Eigen::VectorXd& y, const Penalty& pen,
                                    const Eigen::VectorXd& x) {
  return 0.5 * (y - f * x).squaredNorm() + pen.value(x);
}

namespace detail {

/// Duality gap of the elastic net written as a LASSO on [F; sqrt(l2) I].
inline double duality_gap(const Eigen::VectorXd& y, const Eigen::VectorXd& r, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& corr, const Penalty& pen) {
  const double rr = r.squaredNorm() + pen.lambda2 * x.squaredNorm();
  const double primal = 0.5 * r.squaredNorm() + pen.value(x);
  double s = 1.0;
  if (pen.lambda1 > 0.0) {
    const double cmax = corr.lpNorm<Eigen::Infinity>();
    if (cmax > pen.lambda1) s = pen.lambda1 / cmax;
  }
  const double dual = s * y.dot(r) - 0.5 * s * s * rr;
  return primal - dual;
}

/// Feature-sign active-set search started from x: repeatedly solves the
/// quadratic on the active set with fixed signs, line-searches the true
/// objective over the sign-change points, and activates the worst KKT
/// violator once the active set is optimal. Returns true when the KKT
/// conditions hold to `kkt_tol`. The objective never increases.
inline bool feature_sign_polish(const Eigen::MatrixXd& f, const Eigen::VectorXd& y, const Penalty& pen,
                                Eigen::VectorXd& x, Eigen::VectorXd& r, int max_steps, double kkt_tol) {
  const Eigen::Index n = x.size();
  auto objective = [&](const Eigen::VectorXd& v) { return 0.5 * (y - f * v).squaredNorm() + pen.value(v); };
  double obj = objective(x);
  for (int step = 0; step < max_steps; ++step) {
    const Eigen::VectorXd g = f.transpose() * r - pen.lambda2 * x;
    double viol_active = 0.0;
    Eigen::Index j0 = -1;
    double gmax = 0.0;
    std::vector<int> act;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (x[j] != 0.0) {
        act.push_back(static_cast<int>(j));
        viol_active = std::max(viol_active, std::abs(g[j] - pen.lambda1 * (x[j] > 0.0 ? 1.0 : -1.0)));
      } else if (std::abs(g[j]) > gmax) {
        gmax = std::abs(g[j]);
        j0 = j;
      }
    }
    const bool zeros_ok = gmax <= pen.lambda1 + kkt_tol;
    if (viol_active <= kkt_tol && zeros_ok) return true;
    Eigen::VectorXd theta(static_cast<Eigen::Index>(act.size()) + 1);
    for (std::size_t i = 0; i < act.size(); ++i) theta[i] = x[act[i]] > 0.0 ? 1.0 : -1.0;
    if (viol_active <= kkt_tol) {
      act.push_back(static_cast<int>(j0));
      theta[static_cast<Eigen::Index>(act.size()) - 1] = g[j0] > 0.0 ? 1.0 : -1.0;
    }
    const Eigen::Index k = static_cast<Eigen::Index>(act.size());
    theta.conservativeResize(k);
    Eigen::MatrixXd fa(f.rows(), k);
    Eigen::VectorXd xa(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      fa.col(i) = f.col(act[i]);
      xa[i] = x[act[i]];
    }
    Eigen::MatrixXd h = fa.transpose() * fa;
    h.diagonal().array() += pen.lambda2;
    const Eigen::VectorXd rhs = fa.transpose() * y - pen.lambda1 * theta;
    Eigen::VectorXd z;
    if (pen.lambda2 > 0.0 || k <= f.rows()) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success) z = ldlt.solve(rhs);
    }
    if (z.size() != k || !z.allFinite() || (h * z - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm())) {
      // rank-deficient active set: the loss is flat along null(F_A), so move
      // along the null-space projection of -theta until a coordinate vanishes
      Eigen::BDCSVD<Eigen::MatrixXd> svd(fa, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      Eigen::Index rank = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > 1e-10 * sv[0]) ++rank;
      const Eigen::MatrixXd nb = svd.matrixV().rightCols(k - rank);
      const Eigen::VectorXd d = -(nb * (nb.transpose() * theta));
      if (k == rank || d.norm() <= 1e-12 * theta.norm()) return false;
      double tstar = std::numeric_limits<double>::infinity();
      Eigen::Index hit = -1;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (xa[i] == 0.0 && d[i] * theta[i] < 0.0) return false;
        if (xa[i] * d[i] < 0.0 && -xa[i] / d[i] < tstar) {
          tstar = -xa[i] / d[i];
          hit = i;
        }
      }
      if (hit < 0) return false;
      Eigen::VectorXd cand = x;
      for (Eigen::Index i = 0; i < k; ++i) cand[act[i]] = xa[i] + tstar * d[i];
      cand[act[hit]] = 0.0;
      const double o = objective(cand);
      if (!(o <= obj + 1e-14 * std::max(1.0, std::abs(obj)))) return false;
      x = cand;
      r = y - f * x;
      obj = o;
      continue;
    }
    // candidate points: the full step and every sign change along the segment
    std::vector<double> ts{1.0};
    for (Eigen::Index i = 0; i < k; ++i)
      if (xa[i] != 0.0 && xa[i] * z[i] < 0.0) ts.push_back(xa[i] / (xa[i] - z[i]));
    // ties within roundoff are accepted so that a vanishing coordinate leaves the active set
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x;
    for (double t : ts) {
      Eigen::VectorXd cand = x;
      for (Eigen::Index i = 0; i < k; ++i) {
        double v = xa[i] + t * (z[i] - xa[i]);
        if (t != 1.0 && xa[i] != 0.0 && xa[i] / (xa[i] - z[i]) == t) v = 0.0;
        cand[act[i]] = v;
      }
      const double o = objective(cand);
      if (o < best) {
        best = o;
        best_x = std::move(cand);
      }
    }
    if (!(best <= obj + 1e-14 * std::max(1.0, std::abs(obj)))) return false;
    x = best_x;
    r = y - f * x;
    obj = best;
  }
  return false;
}

}  // namespace detail

/// Cyclic coordinate descent on 1/2||y - Fx||^2 + l1||x||_1 + (l2/2)||x||^2.
/// Stops when the duality gap is at most tol * ||y||^2 (for l1 = 0, when the
/// gradient sup-norm is at most tol * max(1, ||F^T y||_inf)).
inline CDResult coordinate_descent_solve(const Eigen::MatrixXd& f, const Eigen::VectorXd& y, const Penalty& pen,
                                         double tol = 1e-12, int max_passes = 100000,
                                         const Eigen::VectorXd* warm = nullptr) {
  if (!(tol > 0.0)) throw ParameterError("coordinate_descent_solve: tol must be positive");
  if (y.size() != f.rows()) throw ParameterError("coordinate_descent_solve: y has the wrong length");
  const Eigen::Index n = f.cols();
  CDResult out;
  out.x = warm ? *warm : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = y - f * out.x;
  const Eigen::VectorXd colsq = f.colwise().squaredNorm().transpose();
  const double ynorm2 = std::max(y.squaredNorm(), 1e-300);
  const double gscale = std::max(1.0, (f.transpose() * y).lpNorm<Eigen::Infinity>());
  auto converged = [&](double& gap) {
    const Eigen::VectorXd corr = f.transpose() * r - pen.lambda2 * out.x;
    if (pen.lambda1 == 0.0) {
      gap = corr.lpNorm<Eigen::Infinity>();
      return gap <= tol * gscale;
    }
    gap = detail::duality_gap(y, r, out.x, corr, pen);
    return gap <= tol * ynorm2;
  };
  for (int pass = 1; pass <= max_passes; ++pass) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double den = colsq[j] + pen.lambda2;
      if (den == 0.0) continue;
      const double old = out.x[j];
      const double z = f.col(j).dot(r) + colsq[j] * old;
      const double nw = soft_threshold(z, pen.lambda1) / den;
      if (nw != old) {
        r.noalias() -= (nw - old) * f.col(j);
        out.x[j] = nw;
      }
    }
    out.passes = pass;
    if (pass % 5 == 0 || pass == max_passes) {
      if (converged(out.gap)) {
        out.converged = true;
        break;
      }
      if (pass % 10 == 0 && pen.lambda1 > 0.0) {
        const double kkt_tol = 1e-13 * gscale;
        detail::feature_sign_polish(f, y, pen, out.x, r, 4 * static_cast<int>(n), kkt_tol);
        if (converged(out.gap)) {
          out.converged = true;
          break;
        }
      }
    }
  }
  // a final accurate residual guards against drift in the running update
  r = y - f * out.x;
  if (!out.converged) out.converged = converged(out.gap);
  return out;
}

inline CDResult coordinate_descent_solve(const ProblemInstance& inst, const Penalty& pen, double tol = 1e-12,
                                         int max_passes = 100000) {
  return coordinate_descent_solve(inst.f, inst.y, pen, tol, max_passes);
}

inline double empirical_mse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& x0) {
  if (estimate.size() != x0.size()) throw ParameterError("empirical_mse: length mismatch");
  return (x0 - estimate).squaredNorm() / static_cast<double>(x0.size());
}

struct SweepResult {
  std::string label;
  std::vector<double> grid;
  std::vector<double> predicted_mse;
  std::vector<double> empirical_mse_mean;
  std::vector<double> empirical_mse_stderr;
  int n_realizations = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<int> nonconverged;
};

/// Run `fn(r)` for r in [0, count) on `jobs` threads. Order of completion does
/// not matter; callers write into index r.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int r = 0; r < count; ++r) fn(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(jobs);
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int r = next++; r < count; r = next++) fn(r);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

struct SweepOptions {
  double lambda2 = 0.0;
  LossScaling scaling = LossScaling::sum;
  double cd_tol = 1e-10;
  int cd_max_passes = 200000;
  int jobs = 1;
  SEParams se;  // prior, penalty, delta0 and law are overwritten per grid point
};

namespace detail {

inline void reduce(const std::vector<std::vector<double>>& mse, SweepResult& out) {
  const std::size_t g = out.grid.size();
  const double n = static_cast<double>(mse.size());
  out.empirical_mse_mean.assign(g, 0.0);
  out.empirical_mse_stderr.assign(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    double m = 0.0;
    for (const auto& row : mse) m += row[i];
    m /= n;
    double q = 0.0;
    for (const auto& row : mse) q += (row[i] - m) * (row[i] - m);
    out.empirical_mse_mean[i] = m;
    out.empirical_mse_stderr[i] = n > 1.0 ? std::sqrt(q / (n - 1.0) / n) : 0.0;
  }
}

inline double predict(const SweepOptions& opt, const SpectralLaw& law, double rho, double delta0, const Penalty& pen) {
  SEParams p = opt.se;
  p.prior = Prior(rho);
  p.delta0 = delta0;
  p.law = law;
  p.penalty = pen;
  const FixedPointReport rep = solve_se(p);
  return rep.converged ? rep.E : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Predicted and empirical MSE over a grid of lambda1 for one ensemble.
/// Realization r uses seed base_seed + r for every grid point, and the grid is
/// solved from the largest lambda1 down with warm starts.
inline SweepResult sweep_lambda(const MatrixEnsemble& ens, double rho, double delta0,
                                const std::vector<double>& lambda_grid, int n_realizations,
                                std::uint64_t base_seed, const SweepOptions& opt = {}) {
  if (lambda_grid.empty()) throw ParameterError("sweep_lambda: empty grid");
  if (n_realizations < 1) throw ParameterError("sweep_lambda: need at least one realization");
  SweepResult out;
  out.label = to_string(ens.kind);
  out.grid = lambda_grid;
  out.n_realizations = n_realizations;
  const SpectralLaw law = law_for_ensemble(ens);
  const int m = ens.m();
  for (double l1 : lambda_grid)
    out.predicted_mse.push_back(
        detail::predict(opt, law, rho, delta0, effective_penalty(Penalty(l1, opt.lambda2), opt.scaling, m)));
  std::vector<std::size_t> order(lambda_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lambda_grid[a] > lambda_grid[b]; });
  std::vector<std::vector<double>> mse(n_realizations, std::vector<double>(lambda_grid.size()));
  std::vector<std::vector<int>> bad(n_realizations, std::vector<int>(lambda_grid.size(), 0));
  for (int r = 0; r < n_realizations; ++r) out.seeds.push_back(base_seed + r);
  parallel_for(n_realizations, opt.jobs, [&](int r) {
    const ProblemInstance inst = generate_instance(ens, rho, delta0, base_seed + r);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(ens.n);
    for (std::size_t i : order) {
      const Penalty pen = effective_penalty(Penalty(lambda_grid[i], opt.lambda2), opt.scaling, m);
      const CDResult cd = coordinate_descent_solve(inst.f, inst.y, pen, opt.cd_tol, opt.cd_max_passes, &warm);
      warm = cd.x;
      mse[r][i] = empirical_mse(cd.x, inst.x0);
      bad[r][i] = cd.converged ? 0 : 1;
    }
  });
  detail::reduce(mse, out);
  out.nonconverged.assign(lambda_grid.size(), 0);
  for (const auto& row : bad)
    for (std::size_t i = 0; i < row.size(); ++i) out.nonconverged[i] += row[i];
  return out;
}

/// Paired comparison of several ensembles with common random numbers.
inline std::vector<SweepResult> sweep_lambda(const std::vector<MatrixEnsemble>& ensembles, double rho, double delta0,
                                             const std::vector<double>& lambda_grid, int n_realizations,
                                             std::uint64_t base_seed, const SweepOptions& opt = {}) {
  std::vector<SweepResult> out;
  for (const auto& e : ensembles) out.push_back(sweep_lambda(e, rho, delta0, lambda_grid, n_realizations, base_seed, opt));
  return out;
}

/// One SweepResult per lambda1 over a grid of aspect ratios; `family` fixes the
/// ensemble kind, n and shift.
inline std::vector<SweepResult> sweep_alpha(const MatrixEnsemble& family, double rho, double delta0,
                                            const std::vector<double>& alpha_grid,
                                            const std::vector<double>& lambda1_values, int n_realizations,
                                            std::uint64_t base_seed, const SweepOptions& opt = {}) {
  if (alpha_grid.empty()) throw ParameterError("sweep_alpha: empty grid");
  for (double a : alpha_grid)
    if (!(a > 0.0)) throw ParameterError("sweep_alpha: alpha values must be positive");
  if (n_realizations < 1) throw ParameterError("sweep_alpha: need at least one realization");
  const std::size_t na = alpha_grid.size(), nl = lambda1_values.size();
  std::vector<SweepResult> out(nl);
  for (std::size_t j = 0; j < nl; ++j) {
    out[j].label = "lambda1=" + std::to_string(lambda1_values[j]);
    out[j].grid = alpha_grid;
    out[j].n_realizations = n_realizations;
    for (int r = 0; r < n_realizations; ++r) out[j].seeds.push_back(base_seed + r);
    out[j].nonconverged.assign(na, 0);
  }
  std::vector<MatrixEnsemble> ens(na, family);
  for (std::size_t i = 0; i < na; ++i) {
    ens[i].alpha = alpha_grid[i];
    const SpectralLaw law = law_for_ensemble(ens[i]);
    for (std::size_t j = 0; j < nl; ++j)
      out[j].predicted_mse.push_back(detail::predict(
          opt, law, rho, delta0, effective_penalty(Penalty(lambda1_values[j], opt.lambda2), opt.scaling, ens[i].m())));
  }
  // job index = alpha index * n_realizations + realization
  std::vector<std::vector<std::vector<double>>> mse(nl, std::vector<std::vector<double>>(n_realizations, std::vector<double>(na)));
  std::vector<std::vector<std::vector<int>>> bad(nl, std::vector<std::vector<int>>(n_realizations, std::vector<int>(na)));
  std::vector<std::size_t> order(nl);
  for (std::size_t j = 0; j < nl; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lambda1_values[a] > lambda1_values[b]; });
  parallel_for(static_cast<int>(na) * n_realizations, opt.jobs, [&](int job) {
    const int i = job / n_realizations, r = job % n_realizations;
    const ProblemInstance inst = generate_instance(ens[i], rho, delta0, base_seed + r);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(ens[i].n);
    for (std::size_t j : order) {
      const Penalty pen = effective_penalty(Penalty(lambda1_values[j], opt.lambda2), opt.scaling, ens[i].m());
      const CDResult cd = coordinate_descent_solve(inst.f, inst.y, pen, opt.cd_tol, opt.cd_max_passes, &warm);
      warm = cd.x;
      mse[j][r][i] = empirical_mse(cd.x, inst.x0);
      bad[j][r][i] = cd.converged ? 0 : 1;
    }
  });
  for (std::size_t j = 0; j < nl; ++j) {
    detail::reduce(mse[j], out[j]);
    for (const auto& row : bad[j])
      for (std::size_t i = 0; i < na; ++i) out[j].nonconverged[i] += row[i];
  }
  return out;
}

struct ConvergenceCell {
  double alpha = 0.0;
  double lambda2 = 0.0;
  VampStatus status = VampStatus::stalled;
  // first iteration with d_k <= tol, or -1
  int first_below_tol = -1;
  VampConfig config;
  ConvergenceTrace trace;
  double contraction_ratio = 0.0;
  double bound_o1 = 0.0;
  double bound_o2 = 0.0;
  double kkt_residual = 0.0;
};

struct ConvergenceStudyOptions {
  double tol = 1e-8;
  int max_iters = 2000;
  SEParams se;
  MatrixEnsemble family;  // kind and n; alpha is set per cell
};

/// Oracle-VAMP on one instance per (alpha, lambda2) cell. Cells with the same
/// alpha share the matrix, signal and noise.
inline std::vector<ConvergenceCell> convergence_study(const std::vector<double>& alpha_values, double lambda1,
                                                      const std::vector<double>& lambda2_values, int n, double rho,
                                                      double delta0, std::uint64_t seed,
                                                      const ConvergenceStudyOptions& opt = {}) {
  std::vector<ConvergenceCell> cells;
  for (double l2 : lambda2_values) {
    for (double a : alpha_values) {
      MatrixEnsemble ens = opt.family;
      ens.alpha = a;
      ens.n = n;
      const SpectralLaw law = law_for_ensemble(ens);
      const ProblemInstance inst = generate_instance(ens, rho, delta0, seed);
      const Penalty pen(lambda1, l2);
      SEParams p = opt.se;
      p.prior = Prior(rho);
      p.delta0 = delta0;
      p.law = law;
      p.penalty = pen;
      const FixedPointReport fp = solve_se(p);
      ConvergenceCell cell;
      cell.alpha = a;
      cell.lambda2 = l2;
      cell.config = VampConfig::from_fixed_point(fp, law, rho + delta0);
      cell.config.tol = opt.tol;
      cell.config.max_iters = opt.max_iters;
      const QuadraticLossOracle loss(inst.f, inst.y);
      const VampResult res = run_vamp(cell.config, pen, loss, substream_seed(seed, 7), &inst.x0, &inst.f, &inst.y);
      cell.status = res.status;
      cell.trace = res.trace;
      for (std::size_t k = 0; k < res.trace.d.size(); ++k)
        if (res.trace.d[k] <= opt.tol) {
          cell.first_below_tol = static_cast<int>(k) + 1;
          break;
        }
      cell.contraction_ratio = res.checks.contraction_ratio;
      const Eigen::VectorXd lam = loss.eigenvalues();
      cell.bound_o1 = lipschitz_bound_o1(pen.sigma(), pen.beta(), cell.config.a1, cell.config.a2);
      cell.bound_o2 = lipschitz_bound_o2(lam.minCoeff(), lam.maxCoeff(), cell.config.a1, cell.config.a2);
      cell.kkt_residual = res.checks.kkt_residual;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace asymreg
