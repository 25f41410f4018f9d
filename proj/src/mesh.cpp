#include "spfit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "spfit/common.hpp"

namespace spfit {

namespace {

constexpr double kPointTol = 1e-12;

double signed_area2(const Eigen::RowVector2d& a, const Eigen::RowVector2d& b,
                    const Eigen::RowVector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// > 0 when p lies strictly inside the circumcircle of CCW triangle (a,b,c).
// Evaluated in extended precision with a magnitude-relative dead zone so that
// cocircular configurations (regular grids) resolve deterministically.
int incircle(const Eigen::RowVector2d& a, const Eigen::RowVector2d& b,
             const Eigen::RowVector2d& c, const Eigen::RowVector2d& p) {
  const long double adx = a.x() - p.x(), ady = a.y() - p.y();
  const long double bdx = b.x() - p.x(), bdy = b.y() - p.y();
  const long double cdx = c.x() - p.x(), cdy = c.y() - p.y();
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  const long double det = adx * (bdy * cd - bd * cdy) -
                          ady * (bdx * cd - bd * cdx) +
                          ad * (bdx * cdy - bdy * cdx);
  const long double mag = std::abs(adx * (bdy * cd)) + std::abs(adx * (bd * cdy)) +
                          std::abs(ady * (bdx * cd)) + std::abs(ady * (bd * cdx)) +
                          std::abs(ad * (bdx * cdy)) + std::abs(ad * (bdy * cdx));
  if (det > kPointTol * mag) return 1;
  if (det < -kPointTol * mag) return -1;
  return 0;
}

struct Tri {
  int v[3];
};

}  // namespace

void validate_points(const PointSet2D& pts, bool require_area) {
  const int n = static_cast<int>(pts.rows());
  if (!pts.allFinite())
    fail(ErrorKind::ConfigError, "non-finite coordinate in point set");
  // duplicate scan on x-sorted order
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return pts(i, 0) < pts(j, 0); });
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (pts(order[j], 0) - pts(order[i], 0) > kPointTol) break;
      if ((pts.row(order[i]) - pts.row(order[j])).norm() <= kPointTol)
        fail(ErrorKind::DuplicatePoints,
             "points " + std::to_string(order[i]) + " and " +
                 std::to_string(order[j]) + " coincide");
    }
  }
  if (require_area) {
    if (n < 3) fail(ErrorKind::AllCollinear, "need at least 3 points");
    const double scale = (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).norm();
    bool has_area = false;
    for (int i = 2; i < n && !has_area; ++i) {
      double a2 = signed_area2(pts.row(0), pts.row(1), pts.row(i));
      if (std::abs(a2) > kPointTol * std::max(1.0, scale * scale)) has_area = true;
    }
    // first two may coincide directionally with everything; check a second pivot
    if (!has_area) {
      for (int i = 1; i < n && !has_area; ++i)
        for (int j = i + 1; j < n && !has_area; ++j)
          if (std::abs(signed_area2(pts.row(0), pts.row(i), pts.row(j))) >
              kPointTol * std::max(1.0, scale * scale))
            has_area = true;
    }
    if (!has_area) fail(ErrorKind::AllCollinear, "points span no area");
  }
}

Mesh triangulate(const PointSet2D& points, double extension,
                 int ring_points_per_side) {
  validate_points(points, /*require_area=*/true);
  const int n_data = static_cast<int>(points.rows());

  Eigen::RowVector2d lo = points.colwise().minCoeff();
  Eigen::RowVector2d hi = points.colwise().maxCoeff();
  const double diag = (hi - lo).norm();

  std::vector<Eigen::RowVector2d> verts;
  verts.reserve(n_data + 4 * ring_points_per_side + 3);
  for (int i = 0; i < n_data; ++i) verts.push_back(points.row(i));

  int n_ring = 0;
  if (extension > 0.0 && ring_points_per_side > 0) {
    const double pad = extension * diag;
    const Eigen::RowVector2d a(lo.x() - pad, lo.y() - pad);
    const Eigen::RowVector2d b(hi.x() + pad, lo.y() - pad);
    const Eigen::RowVector2d c(hi.x() + pad, hi.y() + pad);
    const Eigen::RowVector2d d(lo.x() - pad, hi.y() + pad);
    const Eigen::RowVector2d corners[4] = {a, b, c, d};
    for (int side = 0; side < 4; ++side) {
      const Eigen::RowVector2d& p0 = corners[side];
      const Eigen::RowVector2d& p1 = corners[(side + 1) % 4];
      for (int k = 0; k < ring_points_per_side; ++k) {
        double t = static_cast<double>(k) / ring_points_per_side;
        verts.push_back(p0 + t * (p1 - p0));
        ++n_ring;
      }
    }
  }

  // super-triangle appended last so real vertex indices are stable
  const Eigen::RowVector2d center = 0.5 * (lo + hi);
  const double r = 32.0 * std::max(diag * (1.0 + 2.0 * extension), 1.0);
  const int s0 = static_cast<int>(verts.size());
  verts.push_back(center + r * Eigen::RowVector2d(0.0, 2.0));
  verts.push_back(center + r * Eigen::RowVector2d(-1.8, -1.2));
  verts.push_back(center + r * Eigen::RowVector2d(1.8, -1.2));

  std::vector<Tri> tris{{{s0, s0 + 1, s0 + 2}}};
  if (signed_area2(verts[s0], verts[s0 + 1], verts[s0 + 2]) < 0)
    std::swap(tris[0].v[1], tris[0].v[2]);

  std::vector<char> bad;
  for (int ip = 0; ip < s0; ++ip) {
    const Eigen::RowVector2d p = verts[ip];
    bad.assign(tris.size(), 0);
    bool any = false;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (incircle(verts[tris[t].v[0]], verts[tris[t].v[1]], verts[tris[t].v[2]],
                   p) > 0) {
        bad[t] = 1;
        any = true;
      }
    }
    if (!any)
      fail(ErrorKind::DuplicatePoints,
           "point " + std::to_string(ip) + " could not be inserted");
    // cavity boundary = edges of bad triangles seen exactly once
    std::map<std::pair<int, int>, std::pair<int, int>> edges;  // sorted -> oriented
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (!bad[t]) continue;
      for (int e = 0; e < 3; ++e) {
        int u = tris[t].v[e], w = tris[t].v[(e + 1) % 3];
        auto key = std::minmax(u, w);
        auto it = edges.find(key);
        if (it == edges.end())
          edges.emplace(key, std::make_pair(u, w));
        else
          edges.erase(it);
      }
    }
    std::vector<Tri> kept;
    kept.reserve(tris.size() + 2);
    for (std::size_t t = 0; t < tris.size(); ++t)
      if (!bad[t]) kept.push_back(tris[t]);
    for (const auto& [key, e] : edges) {
      Tri nt{{e.first, e.second, ip}};
      if (signed_area2(verts[nt.v[0]], verts[nt.v[1]], verts[nt.v[2]]) < 0)
        std::swap(nt.v[1], nt.v[2]);
      kept.push_back(nt);
    }
    tris.swap(kept);
  }

  Mesh mesh;
  mesh.n_data = n_data;
  mesh.vertices.resize(s0, 2);
  for (int i = 0; i < s0; ++i) mesh.vertices.row(i) = verts[i];
  mesh.boundary_flags.assign(s0, false);
  for (int i = n_data; i < n_data + n_ring; ++i) mesh.boundary_flags[i] = true;
  for (const Tri& t : tris) {
    if (t.v[0] >= s0 || t.v[1] >= s0 || t.v[2] >= s0) continue;
    mesh.triangles.push_back({t.v[0], t.v[1], t.v[2]});
  }
  if (mesh.triangles.empty())
    fail(ErrorKind::AllCollinear, "triangulation produced no interior triangles");
  return mesh;
}

FemMatrices assemble_fem(const Mesh& mesh) {
  const int n = mesh.n_vertices();
  FemMatrices fem;
  fem.c_lumped = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.triangles.size() * 9);

  for (const auto& tv : mesh.triangles) {
    const Eigen::RowVector2d p0 = mesh.vertices.row(tv[0]);
    const Eigen::RowVector2d p1 = mesh.vertices.row(tv[1]);
    const Eigen::RowVector2d p2 = mesh.vertices.row(tv[2]);
    const double area = 0.5 * signed_area2(p0, p1, p2);
    if (area < 1e-14)
      fail(ErrorKind::DegenerateTriangle,
           "triangle area " + std::to_string(area));
    // edge opposite each vertex
    const Eigen::RowVector2d e[3] = {p2 - p1, p0 - p2, p1 - p0};
    for (int a = 0; a < 3; ++a) {
      fem.c_lumped[tv[a]] += area / 3.0;
      for (int b = 0; b < 3; ++b)
        trips.emplace_back(tv[a], tv[b], e[a].dot(e[b]) / (4.0 * area));
    }
  }
  fem.g1.resize(n, n);
  fem.g1.setFromTriplets(trips.begin(), trips.end());
  fem.g1.prune(0.0);

  Eigen::SparseMatrix<double> cinv(n, n);
  std::vector<Eigen::Triplet<double>> ct;
  ct.reserve(n);
  for (int i = 0; i < n; ++i) ct.emplace_back(i, i, 1.0 / fem.c_lumped[i]);
  cinv.setFromTriplets(ct.begin(), ct.end());
  fem.g2 = (fem.g1 * cinv * fem.g1).pruned();
  return fem;
}

Projector projector(const Mesh& mesh, const PointSet2D& targets) {
  const int nt = static_cast<int>(targets.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(3 * nt);
  const double scale =
      (mesh.vertices.colwise().maxCoeff() - mesh.vertices.colwise().minCoeff())
          .norm();
  const double tol = 1e-9 * std::max(1.0, scale);

  for (int i = 0; i < nt; ++i) {
    const Eigen::RowVector2d p = targets.row(i);
    bool placed = false;
    for (std::size_t t = 0; t < mesh.triangles.size() && !placed; ++t) {
      const auto& tv = mesh.triangles[t];
      const Eigen::RowVector2d p0 = mesh.vertices.row(tv[0]);
      const Eigen::RowVector2d p1 = mesh.vertices.row(tv[1]);
      const Eigen::RowVector2d p2 = mesh.vertices.row(tv[2]);
      const double a2 = signed_area2(p0, p1, p2);
      double l0 = signed_area2(p, p1, p2) / a2;
      double l1 = signed_area2(p0, p, p2) / a2;
      double l2 = 1.0 - l0 - l1;
      if (l0 < -tol || l1 < -tol || l2 < -tol) continue;
      // clamp and renormalize so each row is a convex combination
      l0 = std::clamp(l0, 0.0, 1.0);
      l1 = std::clamp(l1, 0.0, 1.0);
      l2 = std::clamp(l2, 0.0, 1.0);
      const double s = l0 + l1 + l2;
      l0 /= s;
      l1 /= s;
      l2 /= s;
      if (l0 > 0.0) trips.emplace_back(i, tv[0], l0);
      if (l1 > 0.0) trips.emplace_back(i, tv[1], l1);
      if (l2 > 0.0) trips.emplace_back(i, tv[2], l2);
      placed = true;
    }
    if (!placed)
      fail(ErrorKind::PointOutsideMesh,
           "target " + std::to_string(i) + " lies outside the mesh");
  }
  Projector proj;
  proj.a.resize(nt, mesh.n_vertices());
  proj.a.setFromTriplets(trips.begin(), trips.end());
  return proj;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  for (int i = 0; i < mesh.n_vertices(); ++i)
    os << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' '
       << (mesh.boundary_flags[i] ? 1 : 0) << '\n';
  for (const auto& t : mesh.triangles)
    os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

Mesh read_mesh(std::istream& is) {
  Mesh mesh;
  std::vector<Eigen::RowVector2d> verts;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    char tag;
    ls >> tag;
    if (tag == 'v') {
      double x, y;
      int flag;
      ls >> x >> y >> flag;
      verts.emplace_back(x, y);
      mesh.boundary_flags.push_back(flag != 0);
    } else if (tag == 't') {
      std::array<int, 3> t{};
      ls >> t[0] >> t[1] >> t[2];
      mesh.triangles.push_back(t);
    }
  }
  mesh.vertices.resize(static_cast<int>(verts.size()), 2);
  for (std::size_t i = 0; i < verts.size(); ++i)
    mesh.vertices.row(static_cast<int>(i)) = verts[i];
  int nd = 0;
  while (nd < mesh.n_vertices() && !mesh.boundary_flags[nd]) ++nd;
  mesh.n_data = nd;
  return mesh;
}

void save_mesh(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::InputNotFound, "cannot open " + path);
  write_mesh(os, mesh);
}

Mesh load_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::InputNotFound, "cannot open " + path);
  return read_mesh(is);
}

}  // namespace spfit
