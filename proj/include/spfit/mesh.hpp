#ifndef SPFIT_MESH_HPP
#define SPFIT_MESH_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace spfit {

// Planar point set, one row per location.
using PointSet2D = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Throws DuplicatePoints / AllCollinear according to the failed check.
void validate_points(const PointSet2D& pts, bool require_area);

struct Mesh {
  PointSet2D vertices;                        // data points first, padding after
  std::vector<std::array<int, 3>> triangles;  // CCW vertex index triples
  std::vector<bool> boundary_flags;           // true on padding-ring vertices
  int n_data = 0;                             // vertices[0..n_data) are the inputs

  int n_vertices() const { return static_cast<int>(vertices.rows()); }
};

struct FemMatrices {
  Eigen::VectorXd c_lumped;            // vertex-wise lumped mass
  Eigen::SparseMatrix<double> g1;      // stiffness
  Eigen::SparseMatrix<double> g2;      // G1 C^{-1} G1
};

struct Projector {
  Eigen::SparseMatrix<double> a;       // n_targets x n_vertices barycentric weights
};

// Delaunay triangulation of the points plus an optional rectangular padding
// ring at `extension` * bbox diagonal beyond the bounding box.
Mesh triangulate(const PointSet2D& points, double extension,
                 int ring_points_per_side = 8);

FemMatrices assemble_fem(const Mesh& mesh);

Projector projector(const Mesh& mesh, const PointSet2D& targets);

// Plain-text mesh format: "v s1 s2 flag" per vertex, "t i j k" per triangle.
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);
void save_mesh(const std::string& path, const Mesh& mesh);
Mesh load_mesh(const std::string& path);

}  // namespace spfit

#endif
