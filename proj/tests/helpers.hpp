#ifndef SPFIT_TEST_HELPERS_HPP
#define SPFIT_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <cmath>

#include "spfit/harness.hpp"
#include "spfit/posterior.hpp"
#include "spfit/rng.hpp"

namespace spfit::testutil {

// Largest relative error between the analytic gradient and central finite
// differences, coordinate by coordinate.  The denominator floors at 1 so
// near-zero coordinates are judged on absolute error.
inline double max_grad_rel_error(const Posterior& post, const Eigen::VectorXd& x) {
  Eigen::VectorXd grad;
  post.logp_grad(x, grad);
  double worst = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double h = 6e-6 * (1.0 + std::abs(x[i]));
    Eigen::VectorXd up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    const double fd = (post.logp(up) - post.logp(dn)) / (2.0 * h);
    const double err = std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

// A plausible point in the unconstrained space: small spread around zero,
// scale-like parameters near their typical magnitudes.
inline Eigen::VectorXd jitter_point(const Posterior& post, std::uint64_t seed,
                                    double spread = 0.3) {
  Rng rng(seed);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(post.dim());
  for (int i = 0; i < post.dim(); ++i) x[i] = spread * rng.normal();
  if (auto i = post.index_of("log_sigma")) x[*i] += std::log(0.5);
  if (auto i = post.index_of("log_phi")) x[*i] += std::log(4.0);
  return x;
}

inline Dataset small_sim_dataset(int n, std::uint64_t seed) {
  SimulationConfig cfg;
  cfg.n_locations = n;
  cfg.seed = seed;
  return simulate(cfg).data;
}

inline CpueData small_cpue(std::uint64_t seed = 4242) {
  CpueConfig cfg;
  cfg.obs_per_cell = 1;
  cfg.keep_prob = 0.8;
  cfg.seed = seed;
  return synth_cpue(cfg);
}

}  // namespace spfit::testutil

#endif
