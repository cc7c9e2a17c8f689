#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "asymreg/errors.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/state_evolution.hpp"

namespace asymreg {

/// One realization of y = F x0 + w.
struct ProblemInstance {
  Eigen::MatrixXd f;
  Eigen::VectorXd x0;
  Eigen::VectorXd w;
  Eigen::VectorXd y;
  double delta0 = 0.0;
};

/// Independent 64-bit seed for sub-stream `stream` of `seed`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                    0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Deterministic per seed; the matrix, the signal and the noise use separate
/// streams so that changing rho or delta0 leaves F unchanged.
inline ProblemInstance generate_instance(const MatrixEnsemble& ens, double rho, double delta0,
                                         std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("generate_instance: rho must lie in [0,1]");
  if (!(delta0 >= 0.0)) throw ParameterError("generate_instance: delta0 must be nonnegative");
  ProblemInstance inst;
  inst.delta0 = delta0;
  inst.f = sample_matrix(ens, substream_seed(seed, 0));
  const int n = ens.n, m = ens.m();
  std::mt19937_64 rx(substream_seed(seed, 1));
  const Prior prior(rho);
  inst.x0.resize(n);
  for (int i = 0; i < n; ++i) inst.x0[i] = prior.sample(rx);
  std::mt19937_64 rw(substream_seed(seed, 2));
  std::normal_distribution<double> nd(0.0, std::sqrt(delta0));
  inst.w.resize(m);
  for (int i = 0; i < m; ++i) inst.w[i] = delta0 > 0.0 ? nd(rw) : 0.0;
  inst.y = inst.f * inst.x0 + inst.w;
  return inst;
}

}  // namespace asymreg
