#include "spfit/tps.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "spfit/common.hpp"
#include "spfit/rng.hpp"

namespace spfit {

double tps_kernel(double r) {
  if (r <= 0.0) return 0.0;
  return r * r * std::log(r);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_full(const PointSet2D& points) {
  validate_points(points, /*require_area=*/false);
  const int n = static_cast<int>(points.rows());
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = tps_kernel((points.row(i) - points.row(j)).norm());
      e(i, j) = v;
      e(j, i) = v;
    }
  Eigen::MatrixXd p(n, 3);
  p.col(0).setOnes();
  p.col(1) = points.col(0);
  p.col(2) = points.col(1);
  return {e, p};
}

Eigen::MatrixXd cross_kernel(const PointSet2D& targets,
                             const PointSet2D& anchors) {
  Eigen::MatrixXd phi(targets.rows(), anchors.rows());
  for (int i = 0; i < targets.rows(); ++i)
    for (int j = 0; j < anchors.rows(); ++j)
      phi(i, j) = tps_kernel((targets.row(i) - anchors.row(j)).norm());
  return phi;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> truncate_spectral(
    const Eigen::MatrixXd& e, int k) {
  const int n = static_cast<int>(e.rows());
  if (k < 1 || k > n)
    fail(ErrorKind::RankOutOfBounds,
         "k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  if (es.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "eigendecomposition failed");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& vals = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(vals[a]) > std::abs(vals[b]);
  });
  Eigen::MatrixXd u(n, k);
  Eigen::VectorXd d(k);
  for (int j = 0; j < k; ++j) {
    u.col(j) = es.eigenvectors().col(order[j]);
    d[j] = vals[order[j]];
  }
  return {u, d};
}

TpsBasis make_tps_basis(const PointSet2D& points, int k) {
  TpsBasis basis;
  basis.anchors = points;
  basis.data_points = points;
  std::tie(basis.e, basis.p) = build_full(points);
  std::tie(basis.u_k, basis.d_k) = truncate_spectral(basis.e, k);
  basis.k = k;
  basis.data_anchored = true;
  return basis;
}

TpsBasis make_knot_tps_basis(const PointSet2D& data_points,
                             const PointSet2D& knots, int k) {
  TpsBasis basis;
  basis.anchors = knots;
  basis.data_points = data_points;
  std::tie(basis.e, basis.p) = build_full(knots);
  std::tie(basis.u_k, basis.d_k) = truncate_spectral(basis.e, k);
  basis.k = k;
  basis.data_anchored = false;
  return basis;
}

Eigen::MatrixXd design_columns(const TpsBasis& basis) {
  return cross_kernel(basis.data_points, basis.anchors) * basis.u_k;
}

Eigen::VectorXd predict_at(const TpsBasis& basis, const Eigen::VectorXd& c,
                           const PointSet2D& targets) {
  if (c.size() != basis.k)
    fail(ErrorKind::DimensionMismatch, "coefficient length != basis rank");
  return cross_kernel(targets, basis.anchors) * (basis.u_k * c);
}

PenaltySpec make_penalty(const TpsBasis& basis, double lambda) {
  PenaltySpec spec;
  spec.s_diag = basis.d_k.cwiseAbs();
  spec.lambda = lambda;
  return spec;
}

std::pair<double, Eigen::VectorXd> penalty_value_grad(const Eigen::VectorXd& c,
                                                      const PenaltySpec& spec) {
  if (c.size() != spec.s_diag.size())
    fail(ErrorKind::DimensionMismatch, "coefficient length != penalty rank");
  Eigen::VectorXd sc = spec.s_diag.cwiseProduct(c);
  return {0.5 * spec.lambda * c.dot(sc), spec.lambda * sc};
}

Eigen::MatrixXd natural_constraint_projector(const TpsBasis& basis) {
  // m = P' U_k is 3 x k; project onto its null space
  Eigen::MatrixXd m = basis.p.transpose() * basis.u_k;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  Eigen::MatrixXd pinv = cod.pseudoInverse();
  return Eigen::MatrixXd::Identity(basis.k, basis.k) - pinv * m;
}

std::vector<int> select_knots(const PointSet2D& points, int m,
                              std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  if (m < 1 || m > n)
    fail(ErrorKind::RankOutOfBounds, "knot count outside [1, n]");
  Rng rng(seed);
  std::vector<int> chosen;
  chosen.reserve(m);
  chosen.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd mindist =
      (points.rowwise() - points.row(chosen[0])).rowwise().norm();
  while (static_cast<int>(chosen.size()) < m) {
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (mindist[i] > mindist[best]) best = i;
    chosen.push_back(best);
    Eigen::VectorXd d = (points.rowwise() - points.row(best)).rowwise().norm();
    mindist = mindist.cwiseMin(d);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace spfit
