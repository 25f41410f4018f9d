#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "spfit/common.hpp"
#include "spfit/mesh.hpp"
#include "spfit/rng.hpp"

using namespace spfit;

namespace {

PointSet2D make_points(std::initializer_list<std::pair<double, double>> pts) {
  PointSet2D out(static_cast<int>(pts.size()), 2);
  int i = 0;
  for (const auto& [x, y] : pts) {
    out(i, 0) = x;
    out(i, 1) = y;
    ++i;
  }
  return out;
}

PointSet2D random_points(int n, std::uint64_t seed) {
  Rng rng(seed);
  PointSet2D out(n, 2);
  for (int i = 0; i < n; ++i) {
    out(i, 0) = rng.uniform();
    out(i, 1) = rng.uniform();
  }
  return out;
}

double triangle_area(const Mesh& mesh, const std::array<int, 3>& t) {
  Eigen::RowVector2d a = mesh.vertices.row(t[0]);
  Eigen::RowVector2d b = mesh.vertices.row(t[1]);
  Eigen::RowVector2d c = mesh.vertices.row(t[2]);
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                (b.y() - a.y()) * (c.x() - a.x()));
}

// Split every triangle at its centroid (test-side refinement).
Mesh refine_at_centroids(const Mesh& mesh) {
  Mesh fine;
  fine.n_data = mesh.n_data;
  const int nv = mesh.n_vertices();
  const int nt = static_cast<int>(mesh.triangles.size());
  fine.vertices.resize(nv + nt, 2);
  fine.vertices.topRows(nv) = mesh.vertices;
  fine.boundary_flags = mesh.boundary_flags;
  fine.boundary_flags.resize(nv + nt, false);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    fine.vertices.row(nv + t) =
        (mesh.vertices.row(tri[0]) + mesh.vertices.row(tri[1]) +
         mesh.vertices.row(tri[2])) / 3.0;
    fine.triangles.push_back({tri[0], tri[1], nv + t});
    fine.triangles.push_back({tri[1], tri[2], nv + t});
    fine.triangles.push_back({tri[2], tri[0], nv + t});
  }
  return fine;
}

}  // namespace

TEST_CASE("triangulate minimal simplex") {
  Mesh mesh = triangulate(make_points({{0, 0}, {1, 0}, {0, 1}}), 0.0);
  CHECK(mesh.n_vertices() == 3);
  CHECK(mesh.triangles.size() == 1);
  CHECK(mesh.n_data == 3);
}

TEST_CASE("triangulate unit square gives two triangles") {
  Mesh mesh = triangulate(make_points({{0, 0}, {1, 0}, {1, 1}, {0, 1}}), 0.0);
  CHECK(mesh.n_vertices() == 4);
  CHECK(mesh.triangles.size() == 2);
  for (const auto& t : mesh.triangles) CHECK(triangle_area(mesh, t) > 0.0);
}

TEST_CASE("triangulate rejects degenerate input") {
  CHECK_THROWS_AS(triangulate(make_points({{0, 0}, {1, 1}, {2, 2}}), 0.0), Error);
  try {
    triangulate(make_points({{0, 0}, {1, 1}, {2, 2}}), 0.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AllCollinear);
  }
  try {
    triangulate(make_points({{0, 0}, {0, 0}, {1, 1}}), 0.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DuplicatePoints);
  }
}

TEST_CASE("triangulation is conforming and covers the data") {
  Mesh mesh = triangulate(random_points(80, 7), 0.2);
  CHECK(mesh.n_data == 80);
  CHECK(mesh.n_vertices() == 80 + 32);  // 8-point-per-side padding ring
  for (const auto& t : mesh.triangles) CHECK(triangle_area(mesh, t) > 0.0);
  // conforming: each interior edge shared by exactly two triangles
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      auto key = std::minmax(t[e], t[(e + 1) % 3]);
      edge_count[key]++;
    }
  for (const auto& [edge, count] : edge_count) CHECK(count <= 2);
}

TEST_CASE("regular grid triangulates despite cocircular points") {
  const int g = 7;
  PointSet2D grid(g * g, 2);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      grid(i * g + j, 0) = i / (g - 1.0);
      grid(i * g + j, 1) = j / (g - 1.0);
    }
  Mesh mesh = triangulate(grid, 0.0);
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    const double a = triangle_area(mesh, t);
    CHECK(a > 0.0);
    total += a;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("fem matrices on the reference triangle") {
  Mesh mesh = triangulate(make_points({{0, 0}, {1, 0}, {0, 1}}), 0.0);
  FemMatrices fem = assemble_fem(mesh);
  for (int i = 0; i < 3; ++i)
    CHECK(fem.c_lumped[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  Eigen::MatrixXd g1 = Eigen::MatrixXd(fem.g1);
  // vertex order in the triangle may differ from input order; map through it
  Eigen::MatrixXd expected(3, 3);
  expected << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
  CHECK((g1 - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fem invariants on a random mesh") {
  Mesh mesh = triangulate(random_points(60, 11), 0.25);
  FemMatrices fem = assemble_fem(mesh);

  // G1 rows sum to zero
  Eigen::VectorXd rowsum = fem.g1 * Eigen::VectorXd::Ones(mesh.n_vertices());
  CHECK(rowsum.cwiseAbs().maxCoeff() < 1e-10);

  // symmetric positive semidefinite
  Eigen::MatrixXd g1 = Eigen::MatrixXd(fem.g1);
  Eigen::MatrixXd g2 = Eigen::MatrixXd(fem.g2);
  CHECK((g1 - g1.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g2 - g2.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(0.5 * (g1 + g1.transpose()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(0.5 * (g2 + g2.transpose()));
  CHECK(es1.eigenvalues().minCoeff() > -1e-10);
  CHECK(es2.eigenvalues().minCoeff() > -1e-10);

  // lumped mass sums to mesh area
  double area = 0.0;
  for (const auto& t : mesh.triangles) area += triangle_area(mesh, t);
  CHECK(fem.c_lumped.sum() == doctest::Approx(area).epsilon(1e-10));

  // refinement keeps total lumped mass
  FemMatrices fine = assemble_fem(refine_at_centroids(mesh));
  CHECK(fine.c_lumped.sum() == doctest::Approx(fem.c_lumped.sum()).epsilon(1e-10));
}

TEST_CASE("projector barycentric weights") {
  Mesh mesh = triangulate(random_points(40, 3), 0.2);

  SUBCASE("vertex target gives a unit row") {
    PointSet2D target = mesh.vertices.row(5);
    Projector proj = projector(mesh, target);
    Eigen::VectorXd row = Eigen::VectorXd(proj.a.row(0).transpose());
    CHECK(row[5] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("centroid target gives thirds") {
    const auto& tri = mesh.triangles[4];
    PointSet2D target(1, 2);
    target.row(0) = (mesh.vertices.row(tri[0]) + mesh.vertices.row(tri[1]) +
                     mesh.vertices.row(tri[2])) / 3.0;
    Projector proj = projector(mesh, target);
    for (int v : tri)
      CHECK(proj.a.coeff(0, v) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }

  SUBCASE("outside point fails with PointOutsideMesh") {
    PointSet2D target(1, 2);
    target << 50.0, 50.0;
    try {
      projector(mesh, target);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::PointOutsideMesh);
    }
  }

  SUBCASE("piecewise-linear exactness for affine functions") {
    PointSet2D targets = random_points(25, 19);
    Projector proj = projector(mesh, targets);
    Eigen::VectorXd s1 = proj.a * mesh.vertices.col(0);
    CHECK((s1 - targets.col(0)).cwiseAbs().maxCoeff() < 1e-10);
    // rows are convex combinations with <= 3 nonzeros
    for (int i = 0; i < proj.a.outerSize(); ++i) {
      int nnz = 0;
      double sum = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(proj.a, i); it; ++it) {
        ++nnz;
        sum += it.value();
        CHECK(it.value() >= 0.0);
        CHECK(it.value() <= 1.0);
      }
      CHECK(nnz <= 3);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("mesh text format round trip") {
  Mesh mesh = triangulate(random_points(20, 23), 0.3);
  std::stringstream ss;
  write_mesh(ss, mesh);
  Mesh loaded = read_mesh(ss);
  CHECK(loaded.n_vertices() == mesh.n_vertices());
  CHECK(loaded.n_data == mesh.n_data);
  CHECK(loaded.triangles == mesh.triangles);
  CHECK((loaded.vertices - mesh.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.boundary_flags == mesh.boundary_flags);
}

TEST_CASE("mesh golden file format") {
  Mesh mesh = triangulate(make_points({{0, 0}, {1, 0}, {0, 1}}), 0.0);
  std::stringstream ss;
  write_mesh(ss, mesh);
  CHECK(ss.str() ==
        "v 0 0 0\n"
        "v 1 0 0\n"
        "v 0 1 0\n"
        "t 0 1 2\n");
}
