#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "asymreg/errors.hpp"

namespace asymreg {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw ParameterError("mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Standard error of the mean (unbiased variance).
inline double stderr_of_mean(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double q = 0.0;
  for (double x : v) q += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(q / (n - 1.0) / n);
}

/// sup |F_n - F| against a distribution given by its right-continuous cdf and
/// left limit cdf_left (they differ at atoms). Ties in the sample are handled.
inline double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf,
                            const std::function<double(double)>& cdf_left) {
  if (x.empty()) throw ParameterError("ks_one_sample: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double below = static_cast<double>(i) / n, upto = static_cast<double>(j) / n;
    d = std::max({d, std::abs(upto - cdf(x[i])), std::abs(below - cdf_left(x[i]))});
    i = j;
  }
  return d;
}

/// Two-sample statistic sup |F_a - F_b| with ties handled.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) v = a[i];
    else v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace asymreg
