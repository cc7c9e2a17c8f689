#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "asymreg/errors.hpp"
#include "asymreg/quadrature.hpp"

namespace asymreg {

struct Atom {
  double loc;
  double weight;
};

enum class DensityKind { marchenko_pastur, uniform_singular };

inline std::string to_string(DensityKind k) {
  return k == DensityKind::marchenko_pastur ? "marchenko_pastur" : "uniform_singular";
}

/// Absolutely continuous component of a spectral law. The density is normalized
/// to 1 on [lo, hi]; `weight` is its share of the total mass.
struct ContinuousPart {
  DensityKind kind;
  double alpha;
  double shift;
  double weight;
  double lo;
  double hi;
  // lambda nodes and weights against the normalized density
  QuadratureRule rule;

  double density(double lam) const {
    if (lam < lo || lam > hi) return 0.0;
    if (kind == DensityKind::marchenko_pastur) {
      if (lam <= 0.0) return 0.0;
      const double v = std::max(0.0, (hi - lam) * (lam - lo));
      return std::sqrt(v) / (2.0 * std::numbers::pi * lam * std::min(1.0, alpha));
    }
    const double as = std::sqrt(lo), bs = std::sqrt(hi);
    if (lam <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / ((bs - as) * 2.0 * std::sqrt(lam));
  }

  /// Probability (under the normalized density) of [lo, x].
  double cdf(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    if (kind == DensityKind::uniform_singular) {
      const double as = std::sqrt(lo), bs = std::sqrt(hi);
      return (std::sqrt(x) - as) / (bs - as);
    }
    // lambda = c + r cos(theta); lambda <= x  <=>  theta >= acos((x - c)/r)
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    const double t0 = std::acos(std::clamp((x - c) / r, -1.0, 1.0));
    QuadratureRule q = composite_gauss_legendre(t0, std::numbers::pi, 40);
    const double norm = 2.0 * std::numbers::pi * std::min(1.0, alpha);
    return q.apply([&](double t) {
      const double lam = c + r * std::cos(t);
      const double s = r * std::sin(t);
      return lam > 0.0 ? s * s / (norm * lam) : 0.0;
    });
  }
};

inline constexpr int kSpectralPanels = 200;
inline constexpr int kSpectralGrading = 40;

/// Probability law of the eigenvalues of C = F^T F: weighted atoms plus an
/// optional continuous density.
class SpectralLaw {
 public:
  SpectralLaw(std::vector<Atom> atoms, std::optional<ContinuousPart> continuous)
      : atoms_(std::move(atoms)), continuous_(std::move(continuous)) {
    validate();
  }

  static SpectralLaw point_mass(double loc) { return SpectralLaw({{loc, 1.0}}, std::nullopt); }

  static SpectralLaw from_atoms(std::vector<Atom> atoms) {
    return SpectralLaw(std::move(atoms), std::nullopt);
  }

  /// Marchenko-Pastur law of F^T F for F with i.i.d. N(0, 1/N) entries and M/N = alpha.
  static SpectralLaw marchenko_pastur(double alpha) {
    if (!(alpha > 0.0)) throw ParameterError("marchenko_pastur: alpha must be positive");
    ContinuousPart cp;
    cp.kind = DensityKind::marchenko_pastur;
    cp.alpha = alpha;
    cp.shift = 0.0;
    cp.weight = std::min(1.0, alpha);
    const double sa = std::sqrt(alpha);
    cp.lo = (1.0 - sa) * (1.0 - sa);
    cp.hi = (1.0 + sa) * (1.0 + sa);
    const double c = 0.5 * (cp.lo + cp.hi), r = 0.5 * (cp.hi - cp.lo);
    // theta = pi maps to the lower edge, where the integrands peak
    QuadratureRule t = graded_gauss_legendre(0.0, std::numbers::pi, kSpectralPanels,
                                             kSpectralGrading, false, true);
    const double norm = 2.0 * std::numbers::pi * cp.weight;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double th = t.nodes[i];
      const double lam = c + r * std::cos(th);
      const double s = r * std::sin(th);
      if (lam <= 0.0) continue;
      cp.rule.nodes.push_back(lam);
      cp.rule.weights.push_back(t.weights[i] * s * s / (norm * lam));
    }
    std::vector<Atom> atoms;
    if (alpha < 1.0) atoms.push_back({0.0, 1.0 - alpha});
    return SpectralLaw(std::move(atoms), std::move(cp));
  }

  /// Law of F^T F when the singular values of F are uniform on
  /// [(shift - alpha)^2, (shift + alpha)^2].
  static SpectralLaw uniform_singular(double alpha, double shift = 1.0) {
    if (!(alpha > 0.0)) throw ParameterError("uniform_singular: alpha must be positive");
    if (!(shift > 0.0)) throw ParameterError("uniform_singular: shift must be positive");
    ContinuousPart cp;
    cp.kind = DensityKind::uniform_singular;
    cp.alpha = alpha;
    cp.shift = shift;
    cp.weight = std::min(1.0, alpha);
    const double as = (shift - alpha) * (shift - alpha);
    const double bs = (shift + alpha) * (shift + alpha);
    cp.lo = as * as;
    cp.hi = bs * bs;
    QuadratureRule s = graded_gauss_legendre(as, bs, kSpectralPanels, kSpectralGrading, true, false);
    for (std::size_t i = 0; i < s.size(); ++i) {
      cp.rule.nodes.push_back(s.nodes[i] * s.nodes[i]);
      cp.rule.weights.push_back(s.weights[i] / (bs - as));
    }
    std::vector<Atom> atoms;
    if (alpha < 1.0) atoms.push_back({0.0, 1.0 - alpha});
    return SpectralLaw(std::move(atoms), std::move(cp));
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::optional<ContinuousPart>& continuous() const { return continuous_; }

  double support_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& a : atoms_)
      if (a.weight > 0.0) m = std::min(m, a.loc);
    if (continuous_ && continuous_->weight > 0.0) m = std::min(m, continuous_->lo);
    return m;
  }

  double support_max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& a : atoms_)
      if (a.weight > 0.0) m = std::max(m, a.loc);
    if (continuous_ && continuous_->weight > 0.0) m = std::max(m, continuous_->hi);
    return m;
  }

  /// E[g(lambda)]. Atoms exact; continuous part by the stored composite rule.
  template <class G>
  double expect(G&& g) const {
    double acc = 0.0;
    for (const auto& a : atoms_)
      if (a.weight > 0.0) acc += a.weight * g(a.loc);
    if (continuous_ && continuous_->weight > 0.0)
      acc += continuous_->weight * continuous_->rule.apply(g);
    if (!std::isfinite(acc)) throw EvaluationError("expect: integrand is not finite on the support");
    return acc;
  }

  double mean() const {
    return expect([](double l) { return l; });
  }

  double cdf(double x) const {
    double acc = 0.0;
    for (const auto& a : atoms_)
      if (a.loc <= x) acc += a.weight;
    if (continuous_) acc += continuous_->weight * continuous_->cdf(x);
    return std::min(1.0, acc);
  }

  /// P(lambda < x).
  double cdf_left(double x) const {
    double acc = 0.0;
    for (const auto& a : atoms_)
      if (a.loc < x) acc += a.weight;
    if (continuous_) acc += continuous_->weight * continuous_->cdf(x);
    return std::min(1.0, acc);
  }

  /// S(z) = E[1/(lambda - z)] for z below the support.
  double stieltjes(double z) const {
    check_domain(z, "stieltjes");
    return expect([z](double l) { return 1.0 / (l - z); });
  }

  /// S'(z) = E[1/(lambda - z)^2].
  double stieltjes_derivative(double z) const {
    check_domain(z, "stieltjes_derivative");
    return expect([z](double l) {
      const double d = l - z;
      return 1.0 / (d * d);
    });
  }

  /// z below the support with S(z) = y. Throws RangeError with the attainable
  /// interval when y is out of reach.
  double stieltjes_inverse(double y) const {
    const double m = support_min();
    if (!(y > 0.0) || !std::isfinite(y))
      throw RangeError("stieltjes_inverse: target must be positive and finite", 0.0,
                       std::numeric_limits<double>::infinity());
    double lo = std::min(-1.0, m - 1.0);
    while (stieltjes(lo) > y) {
      lo = m - 2.0 * (m - lo);
      if (!std::isfinite(lo)) throw RangeError("stieltjes_inverse: target too small", 0.0, 0.0);
    }
    double gap = m - lo;
    double hi = lo;
    double s_hi = stieltjes(hi);
    const double min_gap = std::max(1e-15 * std::abs(m), 1e-290);
    while (s_hi < y) {
      gap *= 0.5;
      if (gap < min_gap)
        throw RangeError("stieltjes_inverse: target above the attainable range (0, " +
                             std::to_string(s_hi) + ")",
                         0.0, s_hi);
      lo = hi;
      hi = m - gap;
      s_hi = stieltjes(hi);
    }
    // S(lo) <= y <= S(hi)
    for (int it = 0; it < 400 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (stieltjes(mid) < y) lo = mid; else hi = mid;
    }
    double z = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
      const double step = (stieltjes(z) - y) / stieltjes_derivative(z);
      const double zn = z - step;
      if (!(zn < m) || !std::isfinite(zn)) break;
      z = zn;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
    }
    return z;
  }

  /// R(x) = S^{-1}(-x) - 1/x for x < 0.
  double r_transform(double x) const {
    if (!(x < 0.0)) throw DomainError("r_transform: argument must be strictly negative");
    return stieltjes_inverse(-x) - 1.0 / x;
  }

  /// R'(x) = -1/S'(S^{-1}(-x)) + 1/x^2.
  double r_transform_derivative(double x) const {
    if (!(x < 0.0)) throw DomainError("r_transform_derivative: argument must be strictly negative");
    const double z = stieltjes_inverse(-x);
    return -1.0 / stieltjes_derivative(z) + 1.0 / (x * x);
  }

 private:
  void check_domain(double z, const char* who) const {
    if (!std::isfinite(z) || !(z < support_min()))
      throw DomainError(std::string(who) + ": argument must lie strictly below the support");
  }

  void validate() const {
    double total = 0.0;
    for (const auto& a : atoms_) {
      if (!(a.loc >= 0.0) || !std::isfinite(a.loc))
        throw InvariantError("SpectralLaw: atom locations must be finite and nonnegative");
      if (!(a.weight >= 0.0 && a.weight <= 1.0))
        throw InvariantError("SpectralLaw: atom weights must lie in [0,1]");
      total += a.weight;
    }
    if (continuous_) {
      const auto& c = *continuous_;
      if (!(c.lo >= 0.0 && c.lo <= c.hi) || !std::isfinite(c.hi))
        throw InvariantError("SpectralLaw: support must be an interval in [0, inf)");
      if (!(c.weight >= 0.0 && c.weight <= 1.0))
        throw InvariantError("SpectralLaw: continuous weight must lie in [0,1]");
      double mass = 0.0;
      for (double w : c.rule.weights) mass += w;
      if (std::abs(mass - 1.0) > 1e-8)
        throw InvariantError("SpectralLaw: continuous density does not integrate to 1");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw InvariantError("SpectralLaw: weights sum to " + std::to_string(total) + ", not 1");
    if (!(support_max() > 0.0))
      throw InvariantError("SpectralLaw: all mass at zero");
  }

  std::vector<Atom> atoms_;
  std::optional<ContinuousPart> continuous_;
};

enum class EnsembleKind { gaussian_iid, row_orthogonal, uniform_singular, explicit_singular_values };

inline std::string to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::gaussian_iid: return "gaussian";
    case EnsembleKind::row_orthogonal: return "row_orthogonal";
    case EnsembleKind::uniform_singular: return "uniform_singular";
    case EnsembleKind::explicit_singular_values: return "explicit";
  }
  return "unknown";
}

inline EnsembleKind ensemble_kind_from_string(const std::string& s) {
  if (s == "gaussian" || s == "gaussian_iid") return EnsembleKind::gaussian_iid;
  if (s == "row_orthogonal") return EnsembleKind::row_orthogonal;
  if (s == "uniform_singular") return EnsembleKind::uniform_singular;
  if (s == "explicit") return EnsembleKind::explicit_singular_values;
  throw ParameterError("unknown ensemble kind '" + s + "'");
}

struct MatrixEnsemble {
  EnsembleKind kind = EnsembleKind::gaussian_iid;
  double alpha = 2.0;
  int n = 100;
  double shift = 1.0;
  std::vector<double> singular_values;

  int m() const { return static_cast<int>(std::floor(alpha * n + 1e-9)); }

  void validate() const {
    if (!(alpha > 0.0)) throw InvariantError("MatrixEnsemble: alpha must be positive");
    if (n < 1) throw InvariantError("MatrixEnsemble: n must be at least 1");
    if (m() < 1) throw InvariantError("MatrixEnsemble: floor(alpha*n) must be at least 1");
    if (kind == EnsembleKind::uniform_singular && !(shift > 0.0))
      throw InvariantError("MatrixEnsemble: shift must be positive");
    if (kind == EnsembleKind::explicit_singular_values) {
      if (static_cast<int>(singular_values.size()) != std::min(m(), n))
        throw InvariantError("MatrixEnsemble: explicit ensemble needs min(M,N) singular values");
      for (double s : singular_values)
        if (!(s >= 0.0) || !std::isfinite(s))
          throw InvariantError("MatrixEnsemble: singular values must be nonnegative");
    }
  }
};

inline SpectralLaw law_for_ensemble(const MatrixEnsemble& e) {
  e.validate();
  switch (e.kind) {
    case EnsembleKind::gaussian_iid:
      return SpectralLaw::marchenko_pastur(e.alpha);
    case EnsembleKind::row_orthogonal: {
      std::vector<Atom> atoms;
      if (e.alpha < 1.0) atoms.push_back({0.0, 1.0 - e.alpha});
      atoms.push_back({1.0, std::min(1.0, e.alpha)});
      return SpectralLaw::from_atoms(std::move(atoms));
    }
    case EnsembleKind::uniform_singular:
      return SpectralLaw::uniform_singular(e.alpha, e.shift);
    case EnsembleKind::explicit_singular_values: {
      std::vector<Atom> atoms;
      const double w = 1.0 / e.n;
      const int r = static_cast<int>(e.singular_values.size());
      if (r < e.n) atoms.push_back({0.0, static_cast<double>(e.n - r) / e.n});
      for (double s : e.singular_values) atoms.push_back({s * s, w});
      return SpectralLaw::from_atoms(std::move(atoms));
    }
  }
  throw ParameterError("law_for_ensemble: unknown kind");
}

/// Haar-distributed orthogonal n x n matrix.
inline Eigen::MatrixXd haar_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd g(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Singular values of a draw from the ensemble (length min(M,N)).
inline std::vector<double> sample_singular_values(const MatrixEnsemble& e, std::mt19937_64& rng) {
  const int r = std::min(e.m(), e.n);
  switch (e.kind) {
    case EnsembleKind::row_orthogonal:
      return std::vector<double>(r, 1.0);
    case EnsembleKind::uniform_singular: {
      const double a = (e.shift - e.alpha) * (e.shift - e.alpha);
      const double b = (e.shift + e.alpha) * (e.shift + e.alpha);
      std::uniform_real_distribution<double> u(a, b);
      std::vector<double> s(r);
      for (auto& v : s) v = u(rng);
      return s;
    }
    case EnsembleKind::explicit_singular_values:
      return e.singular_values;
    case EnsembleKind::gaussian_iid:
      break;
  }
  throw ParameterError("sample_singular_values: not defined for the Gaussian ensemble");
}

/// Draw F (M x N). Gaussian entries are i.i.d. N(0, 1/N); other kinds use U D V^T
/// with Haar U, V.
inline Eigen::MatrixXd sample_matrix(const MatrixEnsemble& e, std::uint64_t seed) {
  e.validate();
  std::mt19937_64 rng(seed);
  const int m = e.m(), n = e.n;
  if (e.kind == EnsembleKind::gaussian_iid) {
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
    Eigen::MatrixXd f(m, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) f(i, j) = nd(rng);
    return f;
  }
  const std::vector<double> s = sample_singular_values(e, rng);
  const Eigen::MatrixXd u = haar_orthogonal(m, rng);
  const Eigen::MatrixXd v = haar_orthogonal(n, rng);
  const int r = static_cast<int>(s.size());
  Eigen::MatrixXd us = u.leftCols(r);
  for (int k = 0; k < r; ++k) us.col(k) *= s[k];
  return us * v.leftCols(r).transpose();
}

}  // namespace asymreg
