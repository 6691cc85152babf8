#pragma once

#include <array>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wopt/fields.hpp"

namespace wopt {

enum class BoundaryTag { Dirichlet, Neumann };

inline const char* to_string(BoundaryTag t) {
  return t == BoundaryTag::Dirichlet ? "dirichlet" : "neumann";
}

/// Tags for the four sides of the rectangle. The Dirichlet part must be
/// nonempty unless `allow_pure_neumann` is set; the pure-Neumann problem is
/// still well posed through the zeroth-order term of the operator.
struct BoundarySpec {
  BoundaryTag left = BoundaryTag::Dirichlet;
  BoundaryTag right = BoundaryTag::Dirichlet;
  BoundaryTag bottom = BoundaryTag::Dirichlet;
  BoundaryTag top = BoundaryTag::Dirichlet;
  bool allow_pure_neumann = false;

  bool any_dirichlet() const {
    return left == BoundaryTag::Dirichlet || right == BoundaryTag::Dirichlet ||
           bottom == BoundaryTag::Dirichlet || top == BoundaryTag::Dirichlet;
  }
};

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

struct BoundaryEdge {
  int a = -1, b = -1;  // vertex pair
  BoundaryTag tag = BoundaryTag::Neumann;
};

struct InteriorEdge {
  int a = -1, b = -1;    // vertex pair
  int c1 = -1, c2 = -1;  // the two adjacent cells
  double length = 0.0;
};

/// Conforming triangulation of an axis-aligned rectangle.
/// Immutable after construction; safe for concurrent reads.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<double> cell_areas;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<InteriorEdge> interior_edges;
  std::vector<int> dirichlet_vertices;  // ascending
  std::vector<bool> is_dirichlet;       // per-vertex mask

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t cell_count() const { return triangles.size(); }

  double total_area() const {
    double s = 0.0;
    for (double a : cell_areas) s += a;
    return s;
  }
};

/// Uniform grid of nx*ny rectangles, each split along the bottom-left to
/// top-right diagonal. Vertex v(i,j) = j*(nx+1)+i; cell (i,j) owns triangles
/// 2*(j*nx+i) (lower right) and 2*(j*nx+i)+1 (upper left). Indexing is
/// deterministic: identical arguments produce identical meshes.
inline Mesh build_structured_mesh(int nx, int ny, const Rect& rect, const BoundarySpec& spec) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_structured_mesh: nx, ny must be >= 1");
  if (!(rect.x1 > rect.x0) || !(rect.y1 > rect.y0))
    throw std::invalid_argument("build_structured_mesh: degenerate rectangle");
  if (!spec.any_dirichlet() && !spec.allow_pure_neumann)
    throw std::invalid_argument(
        "build_structured_mesh: no Dirichlet side (set allow_pure_neumann to permit)");

  const double hx = (rect.x1 - rect.x0) / nx;
  const double hy = (rect.y1 - rect.y0) / ny;
  const auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  Mesh m;
  m.vertices.reserve(std::size_t(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.push_back({rect.x0 + i * hx, rect.y0 + j * hy});

  m.triangles.reserve(std::size_t(2) * nx * ny);
  m.cell_areas.assign(std::size_t(2) * nx * ny, 0.5 * hx * hy);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }

  const auto cell = [nx](int i, int j) { return j * nx + i; };
  // Diagonals, then vertical and horizontal interior edges.
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int q = cell(i, j);
      m.interior_edges.push_back(
          {vid(i, j), vid(i + 1, j + 1), 2 * q, 2 * q + 1, std::sqrt(hx * hx + hy * hy)});
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i)
      m.interior_edges.push_back(
          {vid(i, j), vid(i, j + 1), 2 * cell(i - 1, j), 2 * cell(i, j) + 1, hy});
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      m.interior_edges.push_back(
          {vid(i, j), vid(i + 1, j), 2 * cell(i, j - 1) + 1, 2 * cell(i, j), hx});

  for (int i = 0; i < nx; ++i) m.boundary_edges.push_back({vid(i, 0), vid(i + 1, 0), spec.bottom});
  for (int i = 0; i < nx; ++i) m.boundary_edges.push_back({vid(i, ny), vid(i + 1, ny), spec.top});
  for (int j = 0; j < ny; ++j) m.boundary_edges.push_back({vid(0, j), vid(0, j + 1), spec.left});
  for (int j = 0; j < ny; ++j) m.boundary_edges.push_back({vid(nx, j), vid(nx, j + 1), spec.right});

  m.is_dirichlet.assign(m.vertices.size(), false);
  for (const auto& e : m.boundary_edges)
    if (e.tag == BoundaryTag::Dirichlet) m.is_dirichlet[e.a] = m.is_dirichlet[e.b] = true;
  for (std::size_t v = 0; v < m.vertices.size(); ++v)
    if (m.is_dirichlet[v]) m.dirichlet_vertices.push_back(int(v));

  return m;
}

/// Constant gradients of the P1 basis functions of one triangle.
inline std::array<Vec2, 3> p1_basis_gradients(const Mesh& mesh, std::size_t c) {
  const auto& t = mesh.triangles[c];
  const Vec2 p0 = mesh.vertices[t[0]], p1 = mesh.vertices[t[1]], p2 = mesh.vertices[t[2]];
  const double inv2A = 1.0 / (2.0 * mesh.cell_areas[c]);
  return {Vec2{(p1.y - p2.y) * inv2A, (p2.x - p1.x) * inv2A},
          Vec2{(p2.y - p0.y) * inv2A, (p0.x - p2.x) * inv2A},
          Vec2{(p0.y - p1.y) * inv2A, (p1.x - p0.x) * inv2A}};
}

/// Per-cell constant gradient of the piecewise-linear interpolant of u.
inline std::vector<Vec2> p1_gradient(const Mesh& mesh, const NodalField& u) {
  if (u.size() != mesh.vertex_count())
    throw std::invalid_argument("p1_gradient: field length does not match vertex count");
  std::vector<Vec2> g(mesh.cell_count());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& t = mesh.triangles[c];
    const auto grads = p1_basis_gradients(mesh, c);
    Vec2 s{0.0, 0.0};
    for (int k = 0; k < 3; ++k) s = s + u[t[k]] * grads[k];
    g[c] = s;
  }
  return g;
}

inline std::string mesh_summary(const Mesh& m, const BoundarySpec* spec = nullptr) {
  std::ostringstream os;
  os << "vertices:        " << m.vertex_count() << "\n"
     << "triangles:       " << m.cell_count() << "\n"
     << "total area:      " << m.total_area() << "\n"
     << "interior edges:  " << m.interior_edges.size() << "\n"
     << "boundary edges:  " << m.boundary_edges.size() << "\n"
     << "dirichlet verts: " << m.dirichlet_vertices.size() << "\n";
  if (spec) {
    os << "tags:            left=" << to_string(spec->left) << " right=" << to_string(spec->right)
       << " bottom=" << to_string(spec->bottom) << " top=" << to_string(spec->top) << "\n";
  }
  return os.str();
}

}  // namespace wopt
