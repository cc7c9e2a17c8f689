#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

namespace asymreg {

/// Nodes and weights of a quadrature rule.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  template <class G>
  double apply(G&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * g(nodes[i]);
    return acc;
  }
};

/// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels of 10 nodes each.
inline QuadratureRule composite_gauss_legendre(double a, double b, int panels) {
  using gl = boost::math::quadrature::gauss<double, 10>;
  const auto& x = gl::abscissa();
  const auto& w = gl::weights();
  // boost stores the nonnegative half of the symmetric rule
  std::vector<double> xs, ws;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      xs.push_back(0.0);
      ws.push_back(w[i]);
    } else {
      xs.push_back(x[i]);
      ws.push_back(w[i]);
      xs.push_back(-x[i]);
      ws.push_back(w[i]);
    }
  }
  QuadratureRule rule;
  rule.nodes.reserve(xs.size() * panels);
  rule.weights.reserve(xs.size() * panels);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      rule.nodes.push_back(mid + 0.5 * h * xs[i]);
      rule.weights.push_back(0.5 * h * ws[i]);
    }
  }
  return rule;
}

/// Composite rule on [a, b] whose end panels are split geometrically (ratio 1/2,
/// `levels` times) toward the flagged endpoints. Resolves integrands with a sharp
/// feature at an endpoint, e.g. 1/(s^2 + eps) near s = 0.
inline QuadratureRule graded_gauss_legendre(double a, double b, int panels, int levels,
                                            bool grade_low, bool grade_high) {
  const double h = (b - a) / panels;
  std::vector<double> cuts;
  if (grade_low) {
    cuts.push_back(a);
    for (int k = levels; k >= 1; --k) cuts.push_back(a + h * std::ldexp(1.0, -k));
  }
  for (int p = grade_low ? 1 : 0; p <= (grade_high ? panels - 1 : panels); ++p)
    cuts.push_back(a + p * h);
  if (grade_high) {
    for (int k = 1; k <= levels; ++k) cuts.push_back(b - h * std::ldexp(1.0, -k));
    cuts.push_back(b);
  }
  QuadratureRule rule;
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    QuadratureRule piece = composite_gauss_legendre(cuts[j], cuts[j + 1], 1);
    rule.nodes.insert(rule.nodes.end(), piece.nodes.begin(), piece.nodes.end());
    rule.weights.insert(rule.weights.end(), piece.weights.begin(), piece.weights.end());
  }
  return rule;
}

/// Gauss-Hermite rule for E[g(Z)], Z ~ N(0,1) (probabilists' weight), via Golub-Welsch.
inline QuadratureRule gauss_hermite_normal(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    J(i, i - 1) = std::sqrt(static_cast<double>(i));
    J(i - 1, i) = J(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    rule.weights[i] = v * v;
  }
  return rule;
}

}  // namespace asymreg
