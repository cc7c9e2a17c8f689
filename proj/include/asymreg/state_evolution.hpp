#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "asymreg/errors.hpp"
#include "asymreg/proximal.hpp"
#include "asymreg/quadrature.hpp"
#include "asymreg/spectral.hpp"

namespace asymreg {

/// Gauss-Bernoulli prior (1 - rho) delta_0 + rho N(0, 1).
struct Prior {
  double rho = 0.3;

  Prior() = default;
  explicit Prior(double r) : rho(r) { validate(); }

  void validate() const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("Prior: rho must lie in [0,1]");
  }
  double second_moment() const { return rho; }

  template <class Rng>
  double sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double g = nd(rng);
    return u(rng) < rho ? g : 0.0;
  }
};

enum class BackendKind { closed_form, quadrature, monte_carlo };

inline std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::closed_form: return "closed_form";
    case BackendKind::quadrature: return "quadrature";
    case BackendKind::monte_carlo: return "monte_carlo";
  }
  return "unknown";
}

struct MomentBackend {
  BackendKind kind = BackendKind::closed_form;
  long samples = 1000000;
  std::uint64_t seed = 1;
  int hermite_nodes = 96;

  static MomentBackend closed_form() { return {}; }
  static MomentBackend quadrature(int nodes = 96) {
    MomentBackend b;
    b.kind = BackendKind::quadrature;
    b.hermite_nodes = nodes;
    return b;
  }
  static MomentBackend monte_carlo(long samples, std::uint64_t seed) {
    MomentBackend b;
    b.kind = BackendKind::monte_carlo;
    b.samples = samples;
    b.seed = seed;
    return b;
  }
};

/// alpha = E[prox'], e = E[(prox - x0)^2]; standard errors are set by the
/// Monte-Carlo backend only.
struct E1Moments {
  double alpha = 0.0;
  double e = 0.0;
  double alpha_stderr = 0.0;
  double e_stderr = 0.0;
};

namespace detail {

inline double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }
inline double upper_tail(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }

/// Truncated moments E[u^k ; u > theta] for u ~ N(m, sigma^2), k = 0, 1, 2.
struct TailMoments {
  double t0, t1, t2;
};

inline TailMoments tail_moments(double m, double sigma, double theta) {
  if (sigma == 0.0) {
    const double ind = m > theta ? 1.0 : 0.0;
    return {ind, ind * m, ind * m * m};
  }
  const double t = (theta - m) / sigma;
  const double q = upper_tail(t), p = normal_pdf(t);
  return {q, m * q + sigma * p, (m * m + sigma * sigma) * q + sigma * p * (m + theta)};
}

/// E[(s soft(u, theta) - x0)^2] and P(|u| > theta) for u ~ N(x0, tau).
inline std::pair<double, double> conditional_moments(double x0, double tau, double s, double theta) {
  const double sd = std::sqrt(tau);
  const TailMoments r = tail_moments(x0, sd, theta);
  const TailMoments l = tail_moments(-x0, sd, theta);
  const double cr = s * theta + x0, cl = s * theta - x0;
  const double right = s * s * r.t2 - 2.0 * s * cr * r.t1 + cr * cr * r.t0;
  const double left = s * s * l.t2 - 2.0 * s * cl * l.t1 + cl * cl * l.t0;
  const double inside = std::max(0.0, 1.0 - r.t0 - l.t0);
  return {right + left + x0 * x0 * inside, r.t0 + l.t0};
}

inline E1Moments e1_closed_form(double a1, double tau1, const Prior& prior, const Penalty& pen) {
  const double s = 1.0 / (1.0 + pen.lambda2 / a1);
  const double th = pen.lambda1 / a1;
  const double rho = prior.rho;
  double spike_alpha, spike_e;
  if (tau1 > 0.0) {
    const double c = std::erfc(th / std::sqrt(2.0 * tau1));
    spike_alpha = s * c;
    spike_e = s * s *
              (c * (th * th + tau1) -
               std::exp(-th * th / (2.0 * tau1)) * std::sqrt(2.0 * tau1 / std::numbers::pi) * th);
  } else {
    spike_alpha = th == 0.0 ? s : 0.0;
    spike_e = 0.0;
  }
  // slab: u = x0 + sqrt(tau) z ~ N(0, 1 + tau), E[x0 | u] = kappa u
  const double sig2 = 1.0 + tau1, sig = std::sqrt(sig2), kappa = 1.0 / sig2;
  const TailMoments tm = tail_moments(0.0, sig, th);
  const double right = (s - kappa) * (s - kappa) * tm.t2 - 2.0 * (s - kappa) * s * th * tm.t1 +
                       s * s * th * th * tm.t0;
  const double mid = kappa * kappa * (sig2 - 2.0 * tm.t2);
  const double slab_e = 2.0 * right + mid + tau1 / sig2;
  const double slab_alpha = s * std::erfc(th / std::sqrt(2.0 * sig2));
  E1Moments out;
  out.alpha = (1.0 - rho) * spike_alpha + rho * slab_alpha;
  out.e = (1.0 - rho) * spike_e + rho * slab_e;
  return out;
}

inline E1Moments e1_quadrature(double a1, double tau1, const Prior& prior, const Penalty& pen, int nodes) {
  const double s = 1.0 / (1.0 + pen.lambda2 / a1);
  const double th = pen.lambda1 / a1;
  const QuadratureRule gh = gauss_hermite_normal(nodes);
  auto at = [&](double x0) {
    if (tau1 > 0.0) {
      auto [err, out] = conditional_moments(x0, tau1, s, th);
      return std::pair<double, double>{s * out, err};
    }
    const double p = prox_scalar(pen, 1.0 / a1, x0);
    return std::pair<double, double>{prox_derivative(pen, 1.0 / a1, x0), (p - x0) * (p - x0)};
  };
  const auto spike = at(0.0);
  double sa = 0.0, se = 0.0;
  for (std::size_t i = 0; i < gh.size(); ++i) {
    const auto v = at(gh.nodes[i]);
    sa += gh.weights[i] * v.first;
    se += gh.weights[i] * v.second;
  }
  E1Moments out;
  out.alpha = (1.0 - prior.rho) * spike.first + prior.rho * sa;
  out.e = (1.0 - prior.rho) * spike.second + prior.rho * se;
  return out;
}

inline E1Moments e1_monte_carlo(double a1, double tau1, const Prior& prior, const Penalty& pen,
                                long samples, std::uint64_t seed) {
  if (samples < 2) throw ParameterError("e1_moments: Monte-Carlo backend needs at least 2 samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double sd = std::sqrt(tau1), gamma = 1.0 / a1;
  double ma = 0.0, qa = 0.0, me = 0.0, qe = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double x0 = prior.sample(rng);
    const double y = x0 + sd * nd(rng);
    const double p = prox_scalar(pen, gamma, y);
    const double d = prox_derivative(pen, gamma, y);
    const double e = (p - x0) * (p - x0);
    // Welford updates
    const double n = static_cast<double>(i + 1);
    const double da = d - ma;
    ma += da / n;
    qa += da * (d - ma);
    const double de = e - me;
    me += de / n;
    qe += de * (e - me);
  }
  const double n = static_cast<double>(samples);
  E1Moments out;
  out.alpha = ma;
  out.e = me;
  out.alpha_stderr = std::sqrt(qa / (n - 1.0) / n);
  out.e_stderr = std::sqrt(qe / (n - 1.0) / n);
  return out;
}

}  // namespace detail

/// Moments of the penalty-side denoiser: prox of f/a1 applied to x0 + N(0, tau1).
inline E1Moments e1_moments(double a1, double tau1, const Prior& prior, const Penalty& pen,
                            const MomentBackend& backend = {}) {
  if (!(a1 > 0.0) || !std::isfinite(a1)) throw ParameterError("e1_moments: a1 must be positive");
  if (!(tau1 >= 0.0) || !std::isfinite(tau1)) throw ParameterError("e1_moments: tau1 must be nonnegative");
  switch (backend.kind) {
    case BackendKind::closed_form: return detail::e1_closed_form(a1, tau1, prior, pen);
    case BackendKind::quadrature: return detail::e1_quadrature(a1, tau1, prior, pen, backend.hermite_nodes);
    case BackendKind::monte_carlo:
      return detail::e1_monte_carlo(a1, tau1, prior, pen, backend.samples, backend.seed);
  }
  throw CapabilityError("e1_moments: unsupported backend");
}

struct E2Moments {
  double alpha = 0.0;
  double e = 0.0;
};

/// Moments of the loss-side denoiser: alpha2 = a2 S(-a2),
/// e2 = E[(delta0 lambda + tau2 a2^2) / (lambda + a2)^2].
inline E2Moments e2_moments(double a2, double tau2, double delta0, const SpectralLaw& law) {
  if (!(a2 > 0.0) || !std::isfinite(a2)) throw ParameterError("e2_moments: a2 must be positive");
  if (!(tau2 >= 0.0)) throw ParameterError("e2_moments: tau2 must be nonnegative");
  E2Moments out;
  out.alpha = a2 * law.stieltjes(-a2);
  const double c = tau2 * a2 * a2;
  out.e = law.expect([&](double l) {
    const double d = l + a2;
    return (delta0 * l + c) / (d * d);
  });
  return out;
}

struct SEParams {
  Prior prior;
  Penalty penalty;
  double delta0 = 0.01;
  SpectralLaw law = SpectralLaw::point_mass(1.0);
  double damping = 0.5;
  double tol = 1e-11;
  int max_iters = 5000;
  double init_a1 = 1.0;
  std::optional<double> init_tau1;  // defaults to rho + delta0
  MomentBackend backend;

  void validate() const {
    prior.validate();
    penalty.validate();
    if (!(delta0 >= 0.0)) throw ParameterError("SEParams: delta0 must be nonnegative");
    if (!(damping > 0.0 && damping <= 1.0)) throw ParameterError("SEParams: damping must lie in (0,1]");
    if (!(tol > 0.0)) throw ParameterError("SEParams: tol must be positive");
    if (max_iters < 1) throw ParameterError("SEParams: max_iters must be positive");
    if (!(init_a1 > 0.0)) throw ParameterError("SEParams: init_a1 must be positive");
    if (init_tau1 && !(*init_tau1 > 0.0)) throw ParameterError("SEParams: init_tau1 must be positive");
  }

  double initial_tau1() const { return init_tau1 ? *init_tau1 : prior.second_moment() + delta0; }
};

struct SEState {
  double a1 = 1.0, a2 = 1.0;
  double v1 = 0.0, v2 = 0.0;
  double alpha1 = 0.0, alpha2 = 0.0;
  double tau1 = 0.0, tau2 = 0.0;
  double e1 = 0.0, e2 = 0.0;
  int k = 0;
};

struct FixedPointReport {
  double E = 0.0, V = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double tau1 = 0.0, tau2 = 0.0;
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
};

inline constexpr double kClipLow = 1e-9;
inline constexpr double kClipHigh = 1e9;

inline double clip_onsager(double a) {
  if (!std::isfinite(a)) return a > 0.0 ? kClipHigh : kClipLow;
  return std::clamp(a, kClipLow, kClipHigh);
}

/// tau_out = (e - alpha^2 tau) / (1 - alpha)^2. At alpha = 1 the numerator must
/// vanish too (identity denoiser); that limit is taken as 0.
inline double onsager_variance(double e, double alpha, double tau) {
  const double num = e - alpha * alpha * tau;
  if (alpha == 1.0) {
    if (std::abs(num) <= 1e-12 * (1.0 + std::abs(e))) return 0.0;
    throw IterationError("state evolution: alpha = 1 with nonzero variance numerator");
  }
  const double den = (1.0 - alpha) * (1.0 - alpha);
  return std::max(0.0, num / den);
}

inline SEState se_initial_state(const SEParams& p) {
  SEState s;
  s.a1 = p.init_a1;
  s.tau1 = p.initial_tau1();
  return s;
}

/// One full sweep of the recursion, penalty side then loss side, with damping
/// of (a1, tau1).
inline SEState se_step(const SEState& st, const SEParams& p) {
  SEState nx = st;
  const E1Moments m1 = e1_moments(st.a1, st.tau1, p.prior, p.penalty, p.backend);
  nx.alpha1 = std::clamp(m1.alpha, 0.0, 1.0);
  nx.e1 = std::max(0.0, m1.e);
  nx.v1 = nx.alpha1 / st.a1;
  nx.a2 = nx.v1 > 0.0 ? clip_onsager(1.0 / nx.v1 - st.a1) : kClipHigh;
  nx.tau2 = onsager_variance(nx.e1, nx.alpha1, st.tau1);

  const E2Moments m2 = e2_moments(nx.a2, nx.tau2, p.delta0, p.law);
  nx.alpha2 = m2.alpha;
  nx.e2 = std::max(0.0, m2.e);
  nx.v2 = nx.alpha2 / nx.a2;
  const double a1_new = nx.v2 > 0.0 ? clip_onsager(1.0 / nx.v2 - nx.a2) : kClipHigh;
  const double tau1_new = onsager_variance(nx.e2, nx.alpha2, nx.tau2);

  const double d = p.damping;
  nx.a1 = clip_onsager(d * a1_new + (1.0 - d) * st.a1);
  nx.tau1 = d * tau1_new + (1.0 - d) * st.tau1;
  nx.k = st.k + 1;
  return nx;
}

/// Iterate se_step to a fixed point. Non-convergence is reported, not thrown.
inline FixedPointReport solve_se(const SEParams& p, SEState* final_state = nullptr) {
  p.validate();
  SEState st = se_initial_state(p);
  FixedPointReport rep;
  double e_prev = std::numeric_limits<double>::quiet_NaN(), v_prev = e_prev;
  for (int it = 0; it < p.max_iters; ++it) {
    st = se_step(st, p);
    if (!std::isfinite(st.e1) || !std::isfinite(st.v2) || !std::isfinite(st.tau1)) {
      rep.converged = false;
      rep.residual = std::numeric_limits<double>::infinity();
      rep.iterations = it + 1;
      break;
    }
    double r = std::numeric_limits<double>::infinity();
    if (it > 0) {
      // a clipped A2 perturbs both channel-2 moments by O(clip); the degenerate
      // limit (A2 -> 0 for a zero penalty) is still a fixed point
      const bool clipped = st.a2 <= kClipLow || st.a2 >= kClipHigh;
      const double gap = clipped ? 0.0 : std::max(std::abs(st.e1 - st.e2), std::abs(st.v1 - st.v2));
      r = std::max({std::abs(st.e1 - e_prev), std::abs(st.v2 - v_prev), gap}) /
          (1.0 + std::abs(st.e1));
    }
    e_prev = st.e1;
    v_prev = st.v2;
    rep.residual = r;
    rep.iterations = it + 1;
    if (r <= p.tol) {
      rep.converged = true;
      break;
    }
  }
  rep.E = st.e1;
  rep.V = st.v2;
  rep.a2 = st.a2;
  rep.a1 = st.v2 > 0.0 ? 1.0 / st.v2 - st.a2 : st.a1;
  rep.tau1 = st.tau1;
  rep.tau2 = st.tau2;
  if (final_state) *final_state = st;
  return rep;
}

}  // namespace asymreg
