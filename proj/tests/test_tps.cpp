#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "spfit/common.hpp"
#include "spfit/rng.hpp"
#include "spfit/tps.hpp"

using namespace spfit;

namespace {

PointSet2D random_points(int n, std::uint64_t seed) {
  Rng rng(seed);
  PointSet2D out(n, 2);
  for (int i = 0; i < n; ++i) {
    out(i, 0) = rng.uniform();
    out(i, 1) = rng.uniform();
  }
  return out;
}

}  // namespace

TEST_CASE("tps kernel values") {
  CHECK(tps_kernel(1.0) == 0.0);
  CHECK(tps_kernel(0.0) == 0.0);
  CHECK(tps_kernel(2.0) == doctest::Approx(4.0 * std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("build_full against the double-loop oracle") {
  PointSet2D pts = random_points(10, 31);
  auto [e, p] = build_full(pts);
  for (int i = 0; i < 10; ++i) {
    CHECK(e(i, i) == 0.0);
    for (int j = 0; j < 10; ++j) {
      const double r = (pts.row(i) - pts.row(j)).norm();
      const double phi = r > 0 ? r * r * std::log(r) : 0.0;
      CHECK(std::abs(e(i, j) - phi) < 1e-14);
    }
    CHECK(p(i, 0) == 1.0);
    CHECK(p(i, 1) == pts(i, 0));
    CHECK(p(i, 2) == pts(i, 1));
  }
  CHECK((e - e.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_full edge cases") {
  PointSet2D two(2, 2);
  two << 0, 0, 1, 0;
  auto [e, p] = build_full(two);
  CHECK(e.cwiseAbs().maxCoeff() == 0.0);  // phi(1) = 0
  (void)p;

  PointSet2D dup(3, 2);
  dup << 0, 0, 0, 0, 1, 1;
  CHECK_THROWS_AS(build_full(dup), Error);
}

TEST_CASE("spectral truncation") {
  PointSet2D pts = random_points(24, 5);
  auto [e, p] = build_full(pts);
  (void)p;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);

  SUBCASE("full rank reconstruction") {
    auto [u, d] = truncate_spectral(e, 24);
    Eigen::MatrixXd rec = u * d.asDiagonal() * u.transpose();
    CHECK((rec - e).norm() < 1e-10);
    // |D| sorted descending, columns orthonormal
    for (int j = 1; j < 24; ++j) CHECK(std::abs(d[j]) <= std::abs(d[j - 1]) + 1e-12);
    Eigen::MatrixXd gram = u.transpose() * u;
    CHECK((gram - Eigen::MatrixXd::Identity(24, 24)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("Eckart-Young identity from the full eigendecomposition oracle") {
    for (int k : {3, 8, 15}) {
      auto [u, d] = truncate_spectral(e, k);
      Eigen::MatrixXd rec = u * d.asDiagonal() * u.transpose();
      // residual = sum of squared dropped eigenvalues
      std::vector<double> mags;
      for (int j = 0; j < 24; ++j) mags.push_back(std::abs(es.eigenvalues()[j]));
      std::sort(mags.begin(), mags.end(), std::greater<>());
      double dropped = 0.0;
      for (int j = k; j < 24; ++j) dropped += mags[j] * mags[j];
      CHECK((rec - e).norm() == doctest::Approx(std::sqrt(dropped)).epsilon(1e-8));
    }
  }

  SUBCASE("rank one") {
    auto [u, d] = truncate_spectral(e, 1);
    Eigen::MatrixXd rec = u * d.asDiagonal() * u.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rec);
    int rank = 0;
    for (int j = 0; j < svd.singularValues().size(); ++j)
      if (svd.singularValues()[j] > 1e-10 * svd.singularValues()[0]) ++rank;
    CHECK(rank == 1);
  }

  SUBCASE("bounds") {
    CHECK_THROWS_AS(truncate_spectral(e, 0), Error);
    CHECK_THROWS_AS(truncate_spectral(e, 25), Error);
  }
}

TEST_CASE("magnitude truncation is Frobenius-optimal among eigenpair subsets") {
  PointSet2D pts = random_points(8, 77);
  auto [e, p] = build_full(pts);
  (void)p;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  for (int k : {2, 4, 6}) {
    auto [u, d] = truncate_spectral(e, k);
    const double chosen = (u * d.asDiagonal() * u.transpose() - e).norm();
    // enumerate every k-subset of the 8 eigenpairs
    for (int mask = 0; mask < 256; ++mask) {
      if (__builtin_popcount(mask) != k) continue;
      Eigen::MatrixXd rec = Eigen::MatrixXd::Zero(8, 8);
      for (int j = 0; j < 8; ++j)
        if (mask & (1 << j))
          rec += es.eigenvalues()[j] * es.eigenvectors().col(j) *
                 es.eigenvectors().col(j).transpose();
      CHECK(chosen <= (rec - e).norm() + 1e-10);
    }
  }
}

TEST_CASE("design columns") {
  PointSet2D pts = random_points(20, 41);

  SUBCASE("data-anchored equals E U_k and the spectral form") {
    TpsBasis basis = make_tps_basis(pts, 20);
    Eigen::MatrixXd z = design_columns(basis);
    CHECK((z - basis.e * basis.u_k).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((z - basis.u_k * basis.d_k.asDiagonal()).cwiseAbs().maxCoeff() < 1e-10);

    // full rank: z * (U_k' e_j) reproduces column j of E
    for (int j : {0, 7, 19}) {
      Eigen::VectorXd c = basis.u_k.transpose() * Eigen::VectorXd::Unit(20, j);
      CHECK((z * c - basis.e.col(j)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  SUBCASE("zero coefficients give a zero effect") {
    TpsBasis basis = make_tps_basis(pts, 5);
    CHECK((design_columns(basis) * Eigen::VectorXd::Zero(5)).cwiseAbs().maxCoeff() ==
          0.0);
  }

  SUBCASE("knot-anchored agrees with data-anchored at the knots") {
    std::vector<int> idx = select_knots(pts, 8, 11);
    PointSet2D knots(8, 2);
    for (int j = 0; j < 8; ++j) knots.row(j) = pts.row(idx[j]);
    TpsBasis knot_basis = make_knot_tps_basis(pts, knots, 8);
    TpsBasis data_basis = make_tps_basis(knots, 8);
    Eigen::MatrixXd z_knot = design_columns(knot_basis);
    Eigen::MatrixXd z_data = design_columns(data_basis);
    for (int j = 0; j < 8; ++j) {
      CHECK((z_knot.row(idx[j]) - z_data.row(j)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("predict_at") {
  PointSet2D pts = random_points(18, 51);
  TpsBasis basis = make_tps_basis(pts, 12);
  Rng rng(4);
  Eigen::VectorXd c(12);
  for (int i = 0; i < 12; ++i) c[i] = rng.normal();

  SUBCASE("targets equal anchors reproduces the design product exactly") {
    Eigen::VectorXd at_anchor = predict_at(basis, c, pts);
    Eigen::VectorXd via_design = design_columns(basis) * c;
    CHECK((at_anchor - via_design).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zero coefficients") {
    CHECK(predict_at(basis, Eigen::VectorXd::Zero(12), random_points(5, 6))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  SUBCASE("polynomial reproduction with linear columns in the design") {
    // noiseless linear surface fitted by ridge-penalized least squares
    PointSet2D train = random_points(40, 61);
    Eigen::VectorXd f = train.col(0) + train.col(1);
    TpsBasis b2 = make_tps_basis(train, 20);
    Eigen::MatrixXd z = design_columns(b2);
    Eigen::MatrixXd x(40, 3);
    x.col(0).setOnes();
    x.col(1) = train.col(0);
    x.col(2) = train.col(1);
    Eigen::MatrixXd design(40, 3 + 20);
    design << x, z;
    Eigen::MatrixXd penalty = Eigen::MatrixXd::Zero(23, 23);
    penalty.bottomRightCorner(20, 20) =
        1e-4 * (b2.d_k.cwiseAbs().asDiagonal().toDenseMatrix() +
                1e-6 * Eigen::MatrixXd::Identity(20, 20));
    Eigen::VectorXd theta =
        (design.transpose() * design + penalty)
            .ldlt()
            .solve(design.transpose() * f);
    // dense grid prediction
    const int g = 12;
    PointSet2D grid(g * g, 2);
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < g; ++j) {
        grid(i * g + j, 0) = (i + 0.5) / g;
        grid(i * g + j, 1) = (j + 0.5) / g;
      }
    Eigen::VectorXd pred =
        theta[0] + (grid.col(0) * theta[1] + grid.col(1) * theta[2]).array() +
        predict_at(b2, theta.tail(20), grid).array();
    Eigen::VectorXd truth = grid.col(0) + grid.col(1);
    const double rmse = std::sqrt((pred - truth).squaredNorm() / grid.rows());
    CHECK(rmse < 1e-6);
  }
}

TEST_CASE("penalty value and gradient") {
  SUBCASE("zero coefficients") {
    PenaltySpec spec{Eigen::VectorXd::Ones(3), 2.0};
    auto [v, g] = penalty_value_grad(Eigen::VectorXd::Zero(3), spec);
    CHECK(v == 0.0);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("identity penalty arithmetic") {
    PenaltySpec spec{Eigen::VectorXd::Ones(2), 2.0};
    Eigen::VectorXd c(2);
    c << 1.0, 1.0;
    auto [v, g] = penalty_value_grad(c, spec);
    CHECK(v == doctest::Approx(2.0));
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(2.0));
  }

  SUBCASE("gradient matches finite differences") {
    Rng rng(8);
    Eigen::VectorXd s(6), c(6);
    for (int i = 0; i < 6; ++i) {
      s[i] = rng.uniform() + 0.1;
      c[i] = rng.normal();
    }
    PenaltySpec spec{s, 1.7};
    auto [v, g] = penalty_value_grad(c, spec);
    (void)v;
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
      Eigen::VectorXd up = c, dn = c;
      up[i] += h;
      dn[i] -= h;
      const double fd = (penalty_value_grad(up, spec).first -
                         penalty_value_grad(dn, spec).first) / (2 * h);
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-8));
    }
  }

  SUBCASE("dimension mismatch") {
    PenaltySpec spec{Eigen::VectorXd::Ones(3), 1.0};
    CHECK_THROWS_AS(penalty_value_grad(Eigen::VectorXd::Zero(2), spec), Error);
  }
}

TEST_CASE("natural-spline constraint projector") {
  PointSet2D pts = random_points(15, 71);
  TpsBasis basis = make_tps_basis(pts, 15);
  Eigen::MatrixXd proj = natural_constraint_projector(basis);
  Rng rng(2);
  Eigen::VectorXd c(15);
  for (int i = 0; i < 15; ++i) c[i] = rng.normal();
  Eigen::VectorXd constrained = proj * c;
  Eigen::VectorXd violation = basis.p.transpose() * (basis.u_k * constrained);
  CHECK(violation.cwiseAbs().maxCoeff() < 1e-10);
  // projector is idempotent
  CHECK((proj * proj - proj).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("smoothness penalty closed form via the spectrum") {
  PointSet2D pts = random_points(12, 81);
  TpsBasis basis = make_tps_basis(pts, 12);
  Rng rng(9);
  Eigen::VectorXd c(12);
  for (int i = 0; i < 12; ++i) c[i] = rng.normal();
  // c' E c computed densely vs through the eigenbasis (signed eigenvalues)
  const double dense = c.dot(basis.e * c);
  Eigen::VectorXd ct = basis.u_k.transpose() * c;
  const double spectral = (basis.d_k.array() * ct.array().square()).sum();
  CHECK(dense == doctest::Approx(spectral).epsilon(1e-10));
}

TEST_CASE("farthest-point knot selection is deterministic and spread out") {
  PointSet2D pts = random_points(100, 91);
  auto a = select_knots(pts, 10, 5);
  auto b = select_knots(pts, 10, 5);
  CHECK(a == b);
  CHECK(static_cast<int>(a.size()) == 10);
  // distinct indices
  std::set<int> uniq(a.begin(), a.end());
  CHECK(uniq.size() == 10);
}
