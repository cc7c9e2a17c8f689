#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "asymreg/errors.hpp"
#include "asymreg/proximal.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/state_evolution.hpp"

namespace asymreg {

struct ReplicaState {
  double E = 0.0;
  double V = 0.0;
};

/// Effective noise variance of the scalar channel:
/// [(E - delta0 V) R'(-V) + delta0 R(-V)] / R(-V)^2.
inline double tau_effective(const ReplicaState& s, double delta0, const SpectralLaw& law) {
  const double r = law.r_transform(-s.V);
  const double rp = law.r_transform_derivative(-s.V);
  return ((s.E - delta0 * s.V) * rp + delta0 * r) / (r * r);
}

/// Right-hand side of the replica fixed-point system: the scalar prox of f/R(-V)
/// at noise level tau_effective gives (E', V').
inline ReplicaState replica_rhs(const ReplicaState& s, const SEParams& p) {
  const double r = p.law.r_transform(-s.V);
  const double tau = std::max(0.0, tau_effective(s, p.delta0, p.law));
  const E1Moments m = e1_moments(r, tau, p.prior, p.penalty, p.backend);
  return {m.e, m.alpha / r};
}

namespace detail {

/// Largest V for which R(-V) is defined (supremum of the Stieltjes transform
/// below the support).
inline double replica_v_cap(const SpectralLaw& law) {
  const double m = law.support_min();
  for (const auto& a : law.atoms())
    if (a.loc == m && a.weight > 0.0) return std::numeric_limits<double>::infinity();
  const double z = m - std::max(1e-13 * std::abs(m), 1e-280);
  return law.stieltjes(z);
}

}  // namespace detail

/// Damped iteration of replica_rhs; same tolerance contract as solve_se.
inline FixedPointReport solve_replica(const SEParams& p, ReplicaState* final_state = nullptr) {
  p.validate();
  const double cap = detail::replica_v_cap(p.law);
  const double v_max = std::isfinite(cap) ? cap * (1.0 - 1e-9) : std::numeric_limits<double>::infinity();
  ReplicaState s{p.prior.second_moment() + p.delta0, 0.0};
  s.V = std::min(0.5 * s.E, v_max);
  FixedPointReport rep;
  const double d = p.damping;
  for (int it = 0; it < p.max_iters; ++it) {
    const ReplicaState nx = replica_rhs(s, p);
    if (!std::isfinite(nx.E) || !std::isfinite(nx.V)) {
      rep.converged = false;
      rep.residual = std::numeric_limits<double>::infinity();
      rep.iterations = it + 1;
      break;
    }
    const double r = std::max(std::abs(nx.E - s.E), std::abs(nx.V - s.V)) / (1.0 + std::abs(nx.E));
    rep.residual = r;
    rep.iterations = it + 1;
    if (r <= p.tol) {
      s = nx;
      rep.converged = true;
      break;
    }
    s.E = d * nx.E + (1.0 - d) * s.E;
    s.V = std::min(d * nx.V + (1.0 - d) * s.V, v_max);
    if (!(s.V > 0.0)) s.V = std::numeric_limits<double>::min();
  }
  rep.E = s.E;
  rep.V = s.V;
  if (s.V > 0.0 && s.V < cap) {
    rep.a1 = p.law.r_transform(-s.V);
    rep.a2 = 1.0 / s.V - rep.a1;
    rep.tau1 = tau_effective(s, p.delta0, p.law);
  }
  if (final_state) *final_state = s;
  return rep;
}

/// max(|E_se - E_rep|/(1 + E_se), |V_se - V_rep|/(1 + V_se)).
inline double check_se_replica_equivalence(const SEParams& p) {
  const FixedPointReport se = solve_se(p);
  const FixedPointReport rp = solve_replica(p);
  if (!se.converged) throw DiagnosticError("check_se_replica_equivalence: state evolution did not converge");
  if (!rp.converged) throw DiagnosticError("check_se_replica_equivalence: replica iteration did not converge");
  return std::max(std::abs(se.E - rp.E) / (1.0 + se.E), std::abs(se.V - rp.V) / (1.0 + se.V));
}

/// Predicted elementwise law of the estimator: prox_{f/a}(x0 + sqrt(tau) z).
class EstimatorSampler {
 public:
  EstimatorSampler(Prior prior, Penalty pen, double a, double tau)
      : prior_(prior), pen_(pen), a_(a), tau_(tau) {}

  template <class Rng>
  double operator()(Rng& rng) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    const double x0 = prior_.sample(rng);
    return prox_scalar(pen_, 1.0 / a_, x0 + std::sqrt(tau_) * nd(rng));
  }

  template <class Rng>
  std::vector<double> draw(std::size_t n, Rng& rng) const {
    std::vector<double> out(n);
    for (auto& v : out) v = (*this)(rng);
    return out;
  }

  double a() const { return a_; }
  double tau() const { return tau_; }

 private:
  Prior prior_;
  Penalty pen_;
  double a_;
  double tau_;
};

inline EstimatorSampler predicted_estimator_law(const SEParams& p, const FixedPointReport& fp) {
  if (!fp.converged) throw DiagnosticError("predicted_estimator_law: fixed point not converged");
  const ReplicaState s{fp.E, fp.V};
  const double a = p.law.r_transform(-fp.V);
  const double tau = std::max(0.0, tau_effective(s, p.delta0, p.law));
  return EstimatorSampler(p.prior, p.penalty, a, tau);
}

}  // namespace asymreg
