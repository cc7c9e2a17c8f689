#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "asymreg/errors.hpp"

namespace asymreg {

/// Elastic-net penalty f(x) = lambda1 |x| + (lambda2/2) x^2, applied coordinatewise.
struct Penalty {
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  Penalty() = default;
  Penalty(double l1, double l2) : lambda1(l1), lambda2(l2) { validate(); }

  void validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
      throw ParameterError("Penalty: lambda1 and lambda2 must be finite and nonnegative");
  }

  /// Strong convexity constant.
  double sigma() const { return lambda2; }
  /// Smoothness constant (infinite when the l1 part is active).
  double beta() const {
    return lambda1 > 0.0 ? std::numeric_limits<double>::infinity() : lambda2;
  }

  double value(double x) const { return lambda1 * std::abs(x) + 0.5 * lambda2 * x * x; }

  double value(const Eigen::VectorXd& x) const {
    return lambda1 * x.lpNorm<1>() + 0.5 * lambda2 * x.squaredNorm();
  }
};

inline double soft_threshold(double y, double t) {
  if (y > t) return y - t;
  if (y < -t) return y + t;
  return 0.0;
}

inline void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ParameterError("prox: gamma must be positive and finite");
}

/// argmin_x gamma f(x) + (x - y)^2 / 2.
inline double prox_scalar(const Penalty& p, double gamma, double y) {
  check_gamma(gamma);
  return soft_threshold(y, gamma * p.lambda1) / (1.0 + gamma * p.lambda2);
}

/// d prox / dy. At |y| = gamma lambda1 the outside-branch value is returned.
inline double prox_derivative(const Penalty& p, double gamma, double y) {
  check_gamma(gamma);
  if (std::abs(y) < gamma * p.lambda1) return 0.0;
  return 1.0 / (1.0 + gamma * p.lambda2);
}

inline Eigen::VectorXd prox_vector(const Penalty& p, double gamma, const Eigen::VectorXd& y) {
  check_gamma(gamma);
  if (y.size() == 0) throw ParameterError("prox_vector: empty input");
  const double t = gamma * p.lambda1, s = 1.0 / (1.0 + gamma * p.lambda2);
  return y.unaryExpr([t, s](double v) { return s * soft_threshold(v, t); });
}

/// (1/N) sum_i prox'(y_i).
inline double jacobian_trace_average(const Penalty& p, double gamma, const Eigen::VectorXd& y) {
  check_gamma(gamma);
  if (y.size() == 0) throw ParameterError("jacobian_trace_average: empty input");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) acc += prox_derivative(p, gamma, y[i]);
  return acc / static_cast<double>(y.size());
}

/// Resolvent of the least-squares term through a cached thin SVD of F:
/// solve(a, b) = (F^T F + a I)^{-1} (F^T y + b).
class QuadraticLossOracle {
 public:
  QuadraticLossOracle(const Eigen::MatrixXd& f, const Eigen::VectorXd& y) : m_(f.rows()), n_(f.cols()) {
    if (y.size() != f.rows()) throw ParameterError("QuadraticLossOracle: y has the wrong length");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_ = svd.matrixU();
    d_ = svd.singularValues();
    v_ = svd.matrixV();
    fty_ = f.transpose() * y;
    const double fn = f.norm();
    const double err = (u_ * d_.asDiagonal() * v_.transpose() - f).norm();
    if (err > 1e-10 * std::max(fn, 1e-300) && fn > 0.0)
      throw InvariantError("QuadraticLossOracle: SVD reconstruction error " + std::to_string(err));
  }

  Eigen::Index rows() const { return m_; }
  Eigen::Index cols() const { return n_; }
  const Eigen::VectorXd& singular_values() const { return d_; }
  const Eigen::MatrixXd& right_vectors() const { return v_; }
  const Eigen::VectorXd& fty() const { return fty_; }

  /// Eigenvalues of F^T F, length N, including the zeros of the null space.
  Eigen::VectorXd eigenvalues() const {
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index k = 0; k < d_.size(); ++k) lam[k] = d_[k] * d_[k];
    return lam;
  }

  Eigen::VectorXd solve(double a, const Eigen::VectorXd& b) const {
    if (!(a > 0.0)) throw ParameterError("QuadraticLossOracle: a must be positive");
    if (b.size() != n_) throw ParameterError("QuadraticLossOracle: b has the wrong length");
    const Eigen::VectorXd v = fty_ + b;
    const Eigen::VectorXd c = v_.transpose() * v;
    Eigen::VectorXd scaled(c.size());
    for (Eigen::Index k = 0; k < c.size(); ++k) scaled[k] = c[k] / (d_[k] * d_[k] + a);
    Eigen::VectorXd x = v_ * scaled;
    // null-space component, divided by a alone; F^T y has none
    if (d_.size() < n_) x += (b - v_ * (v_.transpose() * b)) / a;
    return x;
  }

  /// (1/N) Tr[(F^T F + a I)^{-1}].
  double trace_average(double a) const {
    if (!(a > 0.0)) throw ParameterError("QuadraticLossOracle: a must be positive");
    double acc = 0.0;
    for (Eigen::Index k = 0; k < d_.size(); ++k) acc += 1.0 / (d_[k] * d_[k] + a);
    acc += static_cast<double>(n_ - d_.size()) / a;
    return acc / static_cast<double>(n_);
  }

 private:
  Eigen::Index m_, n_;
  Eigen::MatrixXd u_;
  Eigen::VectorXd d_;
  Eigen::MatrixXd v_;
  Eigen::VectorXd fty_;
};

inline Eigen::VectorXd prox_quadratic_loss(const QuadraticLossOracle& o, double a2,
                                           const Eigen::VectorXd& b2) {
  return o.solve(a2, b2);
}

}  // namespace asymreg
