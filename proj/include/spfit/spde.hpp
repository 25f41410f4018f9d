#ifndef SPFIT_SPDE_HPP
#define SPFIT_SPDE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <utility>

#include "spfit/mesh.hpp"

namespace spfit {

struct SpdeHyperparams {
  double log_tau = 0.0;
  double log_kappa = 0.0;
};

struct PrecisionMatrix {
  Eigen::SparseMatrix<double> q;
  double chol_logdet = 0.0;
  int dim() const { return static_cast<int>(q.rows()); }
};

struct MaternParams {
  double sigma2 = 1.0;
  double kappa = 1.0;
  double nu = 1.0;
};

// Q = tau^2 (kappa^4 C + 2 kappa^2 G1 + G2), log|Q| via sparse Cholesky.
PrecisionMatrix assemble_q(const FemMatrices& fem, const SpdeHyperparams& h);

// value = -(n/2) log 2pi + 1/2 log|Q| - 1/2 u'Qu ; grad_u = -Qu
std::pair<double, Eigen::VectorXd> gmrf_logpdf_grad(const Eigen::VectorXd& u,
                                                    const PrecisionMatrix& prec);

// (d log|Q| / d log tau, d log|Q| / d log kappa)
std::pair<double, double> logdet_grad(const FemMatrices& fem,
                                      const SpdeHyperparams& h);

// Matern covariance at distance r; continuous limit sigma2 at r = 0.
double matern_cov(double r, const MaternParams& p);

// Practical-range identities for alpha = 2 in two dimensions.
inline double spde_marginal_variance(double tau, double kappa) {
  return 1.0 / (4.0 * 3.14159265358979323846 * kappa * kappa * tau * tau);
}

// Repeated-evaluation form of the SPDE operator.  Writing C^{1/2} M C^{1/2}
// with M = C^{-1/2} G1 C^{-1/2} gives Q = tau^2 C^{1/2} (kappa^2 I + M)^2 C^{1/2},
// so log|Q| and its kappa-derivative reduce to sums over the eigenvalues of M,
// computed once per mesh.  Cross-checked against the Cholesky route in tests.
class SpdeOperator {
 public:
  explicit SpdeOperator(const FemMatrices& fem);

  int dim() const { return static_cast<int>(c_.size()); }

  double logdet(const SpdeHyperparams& h) const;
  double dlogdet_dlogkappa(const SpdeHyperparams& h) const;

  // out = Q(h) u, and the pieces of u'Qu needed for hyperparameter gradients
  void q_times(const Eigen::VectorXd& u, const SpdeHyperparams& h,
               Eigen::VectorXd& out) const;
  struct QuadParts {
    double u_c_u = 0.0;
    double u_g1_u = 0.0;
    double u_g2_u = 0.0;
    double quad(double tau2, double kappa2) const {
      return tau2 * (kappa2 * kappa2 * u_c_u + 2.0 * kappa2 * u_g1_u + u_g2_u);
    }
  };
  QuadParts quad_parts(const Eigen::VectorXd& u) const;

  const Eigen::VectorXd& eigenvalues() const { return lambda_; }

 private:
  Eigen::VectorXd c_;
  Eigen::SparseMatrix<double> g1_, g2_;
  Eigen::VectorXd lambda_;  // eigenvalues of C^{-1/2} G1 C^{-1/2}
  double logdet_c_ = 0.0;
};

}  // namespace spfit

#endif
