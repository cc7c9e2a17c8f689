#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymreg/errors.hpp"
#include "asymreg/instance.hpp"
#include "asymreg/proximal.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/state_evolution.hpp"

namespace asymreg {

enum class VampMode { oracle, adaptive };

struct VampConfig {
  double a1 = 1.0;
  double a2 = 1.0;
  double v = 0.5;
  VampMode mode = VampMode::oracle;
  int max_iters = 500;
  double tol = 1e-8;
  // variance of B1 at initialization is a1^2 * init_tau
  double init_tau = 0.31;

  void validate() const {
    if (!(a1 > 0.0) || !(a2 > 0.0) || !(v > 0.0)) throw InvariantError("VampConfig: a1, a2, v must be positive");
    if (std::abs(a1 + a2 - 1.0 / v) > 1e-10 * std::max(1.0, 1.0 / v))
      throw InvariantError("VampConfig: a1 + a2 must equal 1/v");
    if (max_iters < 1) throw ParameterError("VampConfig: max_iters must be positive");
    if (!(tol > 0.0)) throw ParameterError("VampConfig: tol must be positive");
    if (!(init_tau > 0.0)) throw ParameterError("VampConfig: init_tau must be positive");
  }

  /// Oracle coefficients from a state-evolution fixed point: a2 from the report,
  /// v = S(-a2), a1 = 1/v - a2.
  static VampConfig from_fixed_point(const FixedPointReport& fp, const SpectralLaw& law, double init_tau) {
    VampConfig c;
    c.a2 = fp.a2;
    c.v = law.stieltjes(-fp.a2);
    c.a1 = 1.0 / c.v - c.a2;
    c.init_tau = init_tau;
    c.validate();
    return c;
  }

  /// Peaceman-Rachford configuration a1 = a2 = 1/(2v).
  static VampConfig peaceman_rachford(double a) {
    VampConfig c;
    c.a1 = a;
    c.a2 = a;
    c.v = 1.0 / (2.0 * a);
    return c;
  }
};

struct VampState {
  Eigen::VectorXd b1, b2, x1, x2;
  int k = 0;
  // per-iteration coefficients (adaptive mode)
  double a1 = 0.0, a2 = 0.0, v1 = 0.0, v2 = 0.0;
  int clip_count = 0;
};

struct ConvergenceTrace {
  std::vector<double> d;
  std::vector<double> mse;
};

enum class VampStatus { converged, diverged, stalled };

inline std::string to_string(VampStatus s) {
  switch (s) {
    case VampStatus::converged: return "converged";
    case VampStatus::diverged: return "diverged";
    case VampStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct FixedPointChecks {
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  // asymptotic per-iteration contraction of ||B2_{k+1} - B2_k||
  double contraction_ratio = std::numeric_limits<double>::quiet_NaN();
  double max_step_ratio = std::numeric_limits<double>::quiet_NaN();
};

struct VampResult {
  Eigen::VectorXd estimate;
  ConvergenceTrace trace;
  FixedPointChecks checks;
  VampStatus status = VampStatus::stalled;
  int iterations = 0;
};

inline VampState vamp_init(int n, const VampConfig& c, std::uint64_t seed) {
  if (n < 1) throw ParameterError("vamp_init: n must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  VampState s;
  s.b1.resize(n);
  for (int i = 0; i < n; ++i) s.b1[i] = nd(rng);
  const double ms = s.b1.squaredNorm() / n;
  if (ms > 0.0) s.b1 *= std::sqrt(c.a1 * c.a1 * c.init_tau / ms);
  s.b2 = Eigen::VectorXd::Zero(n);
  s.x1 = Eigen::VectorXd::Zero(n);
  s.x2 = Eigen::VectorXd::Zero(n);
  s.a1 = c.a1;
  return s;
}

/// One pass of the oracle iteration with frozen (a1, a2, v).
inline VampState vamp_step_oracle(const VampState& s, const VampConfig& c, const Penalty& pen,
                                  const QuadraticLossOracle& loss) {
  VampState nx = s;
  nx.x1 = prox_vector(pen, 1.0 / c.a1, s.b1 / c.a1);
  nx.b2 = nx.x1 / c.v - s.b1;
  nx.x2 = loss.solve(c.a2, nx.b2);
  nx.b1 = nx.x2 / c.v - nx.b2;
  nx.k = s.k + 1;
  nx.a1 = c.a1;
  nx.a2 = c.a2;
  nx.v1 = nx.v2 = c.v;
  if (!nx.b1.allFinite() || !nx.b2.allFinite()) throw IterationError("vamp_step_oracle: non-finite iterate");
  return nx;
}

/// One pass of the adaptive iteration; the state carries a1 for the next pass.
inline VampState vamp_step_adaptive(const VampState& s, const VampConfig& c, const Penalty& pen,
                                    const QuadraticLossOracle& loss) {
  (void)c;
  VampState nx = s;
  const double a1 = s.a1;
  nx.x1 = prox_vector(pen, 1.0 / a1, s.b1 / a1);
  nx.v1 = jacobian_trace_average(pen, 1.0 / a1, s.b1 / a1) / a1;
  if (!(nx.v1 > 0.0)) throw IterationError("vamp_step_adaptive: V1 vanished (all coordinates thresholded)");
  double a2 = 1.0 / nx.v1 - a1;
  if (!(a2 > kClipLow)) {
    a2 = kClipLow;
    ++nx.clip_count;
  }
  nx.a2 = std::min(a2, kClipHigh);
  nx.b2 = nx.x1 / nx.v1 - s.b1;
  nx.x2 = loss.solve(nx.a2, nx.b2);
  nx.v2 = loss.trace_average(nx.a2);
  double a1n = 1.0 / nx.v2 - nx.a2;
  if (!(a1n > kClipLow)) {
    a1n = kClipLow;
    ++nx.clip_count;
  }
  nx.a1 = std::min(a1n, kClipHigh);
  nx.b1 = nx.x2 / nx.v2 - nx.b2;
  nx.k = s.k + 1;
  if (!nx.b1.allFinite() || !nx.b2.allFinite()) throw IterationError("vamp_step_adaptive: non-finite iterate");
  return nx;
}

/// Bound on the Lipschitz constant of the penalty half-step.
/// Cases: 0 < sigma < beta, 0 < sigma = beta, and no smoothness (beta infinite or
/// sigma = beta = 0). In the last case firm nonexpansiveness of the prox gives
/// max(1, a2/a1).
inline double lipschitz_bound_o1(double sigma, double beta, double a1, double a2) {
  if (!(sigma >= 0.0) || !(beta >= sigma)) throw ParameterError("lipschitz_bound_o1: need 0 <= sigma <= beta");
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw ParameterError("lipschitz_bound_o1: a1, a2 must be positive");
  if (std::isinf(beta) || beta == 0.0) return std::max(1.0, a2 / a1);
  if (sigma < beta)
    return std::max(std::abs(a2 - sigma) / (a1 + sigma), std::abs(beta - a2) / (a1 + beta));
  const double q = (a2 * a2 - a1 * a1) / ((a1 + sigma) * (a1 + sigma)) + 1.0;
  return std::sqrt(std::max(0.0, q));
}

/// Spectral norm of (1/v)(C + a2 I)^{-1} - I for spectrum in [lmin, lmax].
inline double lipschitz_bound_o2(double lmin, double lmax, double a1, double a2) {
  if (!(lmin >= 0.0) || !(lmax >= lmin) || !(lmax > 0.0))
    throw ParameterError("lipschitz_bound_o2: need 0 <= lmin <= lmax, lmax > 0");
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw ParameterError("lipschitz_bound_o2: a1, a2 must be positive");
  return std::max(std::abs(a1 - lmin) / (a2 + lmin), std::abs(lmax - a1) / (a2 + lmax));
}

/// Ridge weight above which the oracle iteration is a contraction, given a cap
/// `c` on the penalty-side Lipschitz constant.
inline double lambda2_threshold(double lmin, double lmax, double sigma1_tilde, double c) {
  return c * (lmax - lmin) - sigma1_tilde - lmin;
}

/// Max over coordinates of the violation of F^T(y - F x) in the subdifferential of f at x.
inline double optimality_residual(const Eigen::VectorXd& x, const Eigen::MatrixXd& f, const Eigen::VectorXd& y,
                                  const Penalty& pen) {
  const Eigen::VectorXd g = f.transpose() * (y - f * x);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double r;
    if (x[i] != 0.0) {
      r = std::abs(g[i] - pen.lambda2 * x[i] - pen.lambda1 * (x[i] > 0.0 ? 1.0 : -1.0));
    } else {
      r = std::max(0.0, std::abs(g[i]) - pen.lambda1);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

inline double optimality_residual(const Eigen::VectorXd& x, const ProblemInstance& inst, const Penalty& pen) {
  return optimality_residual(x, inst.f, inst.y, pen);
}

namespace detail {

inline constexpr double kRatioFloor = 1e-22;

/// Geometric-mean distance ratio over the second half of the trace above the
/// roundoff floor, plus the largest single-step ratio there.
inline std::pair<double, double> contraction_ratios(const std::vector<double>& d) {
  std::size_t end = 0;
  while (end < d.size() && d[end] >= kRatioFloor) ++end;
  if (end < 3) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const std::size_t begin = end / 2;
  const std::size_t last = end - 1;
  if (last <= begin) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double gm = std::pow(d[last] / d[begin], 0.5 / static_cast<double>(last - begin));
  double mx = 0.0;
  for (std::size_t k = begin; k < last; ++k)
    if (d[k] > 0.0) mx = std::max(mx, std::sqrt(d[k + 1] / d[k]));
  return {gm, mx};
}

}  // namespace detail

inline constexpr double kBlowUp = 1e6;
inline constexpr int kBlowUpStreak = 20;

/// Iterate until d_k <= tol or the budget is spent. A run is diverged when it
/// produces non-finite values, grows for 20 steps past 1e6, or ends without
/// contracting; it is stalled when it was still contracting at the budget.
inline VampResult run_vamp(const VampConfig& c, const Penalty& pen, const QuadraticLossOracle& loss,
                           std::uint64_t seed, const Eigen::VectorXd* x0 = nullptr,
                           const Eigen::MatrixXd* f = nullptr, const Eigen::VectorXd* y = nullptr) {
  if (c.mode == VampMode::oracle) c.validate();
  const int n = static_cast<int>(loss.cols());
  VampState s = vamp_init(n, c, seed);
  VampResult res;
  int streak = 0;
  bool blew_up = false;
  std::optional<Eigen::VectorXd> prev_b2;
  for (int it = 0; it < c.max_iters; ++it) {
    try {
      s = c.mode == VampMode::oracle ? vamp_step_oracle(s, c, pen, loss) : vamp_step_adaptive(s, c, pen, loss);
    } catch (const IterationError&) {
      blew_up = true;
      res.iterations = it + 1;
      break;
    }
    res.iterations = it + 1;
    if (x0) res.trace.mse.push_back((s.x1 - *x0).squaredNorm() / n);
    if (prev_b2) {
      const double d = (s.b2 - *prev_b2).squaredNorm() / n;
      const double last = res.trace.d.empty() ? 0.0 : res.trace.d.back();
      res.trace.d.push_back(d);
      streak = (d > last && d > kBlowUp) ? streak + 1 : 0;
      if (!std::isfinite(d) || streak >= kBlowUpStreak) {
        blew_up = true;
        break;
      }
      if (d <= c.tol) {
        res.status = VampStatus::converged;
        break;
      }
    }
    prev_b2 = s.b2;
  }
  res.estimate = s.x1;
  auto [gm, mx] = detail::contraction_ratios(res.trace.d);
  res.checks.contraction_ratio = gm;
  res.checks.max_step_ratio = mx;
  if (blew_up) {
    res.status = VampStatus::diverged;
  } else if (res.status != VampStatus::converged) {
    res.status = (std::isfinite(gm) && gm < 0.999) ? VampStatus::stalled : VampStatus::diverged;
  }
  if (f && y && res.estimate.allFinite()) res.checks.kkt_residual = optimality_residual(res.estimate, *f, *y, pen);
  return res;
}

inline VampResult run_vamp(const VampConfig& c, const Penalty& pen, const ProblemInstance& inst,
                           std::uint64_t seed) {
  const QuadraticLossOracle loss(inst.f, inst.y);
  return run_vamp(c, pen, loss, seed, &inst.x0, &inst.f, &inst.y);
}

}  // namespace asymreg
