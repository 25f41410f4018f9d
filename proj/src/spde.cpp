#include "spfit/spde.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <numbers>

#include "spfit/common.hpp"
#include "spfit/special.hpp"

namespace spfit {

PrecisionMatrix assemble_q(const FemMatrices& fem, const SpdeHyperparams& h) {
  if (!std::isfinite(h.log_tau) || !std::isfinite(h.log_kappa))
    fail(ErrorKind::NotPositiveDefinite, "non-finite hyperparameters");
  const int n = static_cast<int>(fem.c_lumped.size());
  const double tau2 = std::exp(2.0 * h.log_tau);
  const double kappa2 = std::exp(2.0 * h.log_kappa);

  Eigen::SparseMatrix<double> c(n, n);
  {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(n);
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, fem.c_lumped[i]);
    c.setFromTriplets(t.begin(), t.end());
  }
  PrecisionMatrix prec;
  prec.q = tau2 * (kappa2 * kappa2 * c + 2.0 * kappa2 * fem.g1 + fem.g2);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(prec.q);
  if (chol.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "sparse Cholesky failed");
  double logdet = 0.0;
  const auto& d = chol.vectorD();
  for (int i = 0; i < n; ++i) {
    if (!(d[i] > 0.0))
      fail(ErrorKind::NotPositiveDefinite, "non-positive pivot in Cholesky");
    logdet += std::log(d[i]);
  }
  prec.chol_logdet = logdet;
  return prec;
}

std::pair<double, Eigen::VectorXd> gmrf_logpdf_grad(const Eigen::VectorXd& u,
                                                    const PrecisionMatrix& prec) {
  const int n = prec.dim();
  if (u.size() != n)
    fail(ErrorKind::DimensionMismatch,
         "u has length " + std::to_string(u.size()) + ", Q is " +
             std::to_string(n) + "x" + std::to_string(n));
  Eigen::VectorXd qu = prec.q * u;
  double value = -0.5 * n * std::log(2.0 * std::numbers::pi) +
                 0.5 * prec.chol_logdet - 0.5 * u.dot(qu);
  return {value, -qu};
}

std::pair<double, double> logdet_grad(const FemMatrices& fem,
                                      const SpdeHyperparams& h) {
  const int n = static_cast<int>(fem.c_lumped.size());
  PrecisionMatrix prec = assemble_q(fem, h);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(prec.q);
  if (chol.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "sparse Cholesky failed");

  const double tau2 = std::exp(2.0 * h.log_tau);
  const double kappa2 = std::exp(2.0 * h.log_kappa);
  // dQ/dlog kappa = tau^2 (4 kappa^4 C + 4 kappa^2 G1)
  Eigen::SparseMatrix<double> db = (4.0 * tau2 * kappa2 * fem.g1).pruned();
  Eigen::MatrixXd b = Eigen::MatrixXd(db);
  b.diagonal() += 4.0 * tau2 * kappa2 * kappa2 * fem.c_lumped;
  Eigen::MatrixXd x = chol.solve(b);
  return {2.0 * n, x.trace()};
}

double matern_cov(double r, const MaternParams& p) {
  if (r < 0.0) fail(ErrorKind::DimensionMismatch, "negative distance");
  if (r == 0.0) return p.sigma2;
  const double x = p.kappa * r;
  const double scale =
      p.sigma2 / (std::pow(2.0, p.nu - 1.0) * std::tgamma(p.nu));
  return scale * std::pow(x, p.nu) * bessel_k(p.nu, x);
}

SpdeOperator::SpdeOperator(const FemMatrices& fem)
    : c_(fem.c_lumped), g1_(fem.g1), g2_(fem.g2) {
  const int n = dim();
  Eigen::VectorXd cinv_sqrt = c_.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd m = cinv_sqrt.asDiagonal() * Eigen::MatrixXd(g1_) *
                      cinv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "eigendecomposition failed");
  lambda_ = es.eigenvalues().cwiseMax(0.0);
  logdet_c_ = c_.array().log().sum();
  (void)n;
}

double SpdeOperator::logdet(const SpdeHyperparams& h) const {
  const double kappa2 = std::exp(2.0 * h.log_kappa);
  double s = 0.0;
  for (int i = 0; i < lambda_.size(); ++i) s += std::log(kappa2 + lambda_[i]);
  return 2.0 * dim() * h.log_tau + logdet_c_ + 2.0 * s;
}

double SpdeOperator::dlogdet_dlogkappa(const SpdeHyperparams& h) const {
  const double kappa2 = std::exp(2.0 * h.log_kappa);
  double s = 0.0;
  for (int i = 0; i < lambda_.size(); ++i) s += 1.0 / (kappa2 + lambda_[i]);
  return 4.0 * kappa2 * s;
}

void SpdeOperator::q_times(const Eigen::VectorXd& u, const SpdeHyperparams& h,
                           Eigen::VectorXd& out) const {
  const double tau2 = std::exp(2.0 * h.log_tau);
  const double kappa2 = std::exp(2.0 * h.log_kappa);
  out = tau2 * (kappa2 * kappa2 * c_.cwiseProduct(u) + 2.0 * kappa2 * (g1_ * u) +
                g2_ * u);
}

SpdeOperator::QuadParts SpdeOperator::quad_parts(const Eigen::VectorXd& u) const {
  QuadParts parts;
  parts.u_c_u = u.dot(c_.cwiseProduct(u));
  parts.u_g1_u = u.dot(g1_ * u);
  parts.u_g2_u = u.dot(g2_ * u);
  return parts;
}

}  // namespace spfit
