#ifndef SPFIT_TPS_HPP
#define SPFIT_TPS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "spfit/mesh.hpp"

namespace spfit {

// phi(r) = r^2 log r, with the continuity convention phi(0) = 0.
double tps_kernel(double r);

// Kernel matrix among `points` (symmetric, zero diagonal) and the polynomial
// matrix with columns (1, s1, s2).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_full(const PointSet2D& points);

// phi(||target_i - anchor_j||)
Eigen::MatrixXd cross_kernel(const PointSet2D& targets, const PointSet2D& anchors);

// Top-k eigenpairs of symmetric E ordered by |eigenvalue| descending.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> truncate_spectral(
    const Eigen::MatrixXd& e, int k);

struct TpsBasis {
  PointSet2D anchors;       // knots, or all data points in data-anchored mode
  PointSet2D data_points;   // points the model is evaluated at
  Eigen::MatrixXd e;        // kernel matrix among anchors
  Eigen::MatrixXd p;        // anchors x 3 polynomial matrix
  Eigen::MatrixXd u_k;      // retained eigenvectors
  Eigen::VectorXd d_k;      // retained signed eigenvalues, |.| descending
  int k = 0;
  bool data_anchored = true;
};

TpsBasis make_tps_basis(const PointSet2D& points, int k);
TpsBasis make_knot_tps_basis(const PointSet2D& data_points,
                             const PointSet2D& knots, int k);

// Column block multiplying the coefficients in eta = X beta + Z c,
// evaluated at the basis data points: Phi(data, anchors) * U_k.
Eigen::MatrixXd design_columns(const TpsBasis& basis);

// Spatial-effect surface at arbitrary targets.
Eigen::VectorXd predict_at(const TpsBasis& basis, const Eigen::VectorXd& c,
                           const PointSet2D& targets);

struct PenaltySpec {
  Eigen::VectorXd s_diag;  // |D_k|
  double lambda = 1.0;
};

PenaltySpec make_penalty(const TpsBasis& basis, double lambda);

// ((lambda/2) c'Sc, lambda S c)
std::pair<double, Eigen::VectorXd> penalty_value_grad(const Eigen::VectorXd& c,
                                                      const PenaltySpec& spec);

// Orthogonal projector onto {c : P' U_k c = 0} (natural-spline constraint).
Eigen::MatrixXd natural_constraint_projector(const TpsBasis& basis);

// Farthest-point (maximin) subset of size m; the seed picks the start point.
std::vector<int> select_knots(const PointSet2D& points, int m, std::uint64_t seed);

}  // namespace spfit

#endif
