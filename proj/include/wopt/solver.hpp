#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <vector>

#include "wopt/control.hpp"
#include "wopt/fields.hpp"
#include "wopt/mesh.hpp"
#include "wopt/sparse.hpp"

namespace wopt {

// ---------------------------------------------------------------------------
// Exact P1 quadrature helpers.
// ---------------------------------------------------------------------------

/// Exact integral over the mesh of the product of two P1 fields:
/// per cell, A/12 * [(u0+u1+u2)(v0+v1+v2) + u0 v0 + u1 v1 + u2 v2].
inline double l2_product(const Mesh& mesh, const NodalField& u, const NodalField& v) {
  if (u.size() != mesh.vertex_count() || v.size() != mesh.vertex_count())
    throw std::invalid_argument("l2_product: field length does not match vertex count");
  double s = 0.0;
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& t = mesh.triangles[c];
    const double su = u[t[0]] + u[t[1]] + u[t[2]];
    const double sv = v[t[0]] + v[t[1]] + v[t[2]];
    const double duv = u[t[0]] * v[t[0]] + u[t[1]] * v[t[1]] + u[t[2]] * v[t[2]];
    s += mesh.cell_areas[c] / 12.0 * (su * sv + duv);
  }
  return s;
}

inline double l2_norm(const Mesh& mesh, const NodalField& u) {
  return std::sqrt(std::max(0.0, l2_product(mesh, u, u)));
}

/// sum_c rho_c * area_c * (grad u)_c . (grad v)_c, the weighted Dirichlet form.
inline double weighted_grad_product(const Mesh& mesh, const WeightField& rho, const NodalField& u,
                                    const NodalField& v) {
  if (rho.size() != mesh.cell_count())
    throw std::invalid_argument("weighted_grad_product: weight length does not match cell count");
  const auto gu = p1_gradient(mesh, u);
  const auto gv = p1_gradient(mesh, v);
  double s = 0.0;
  for (std::size_t c = 0; c < mesh.cell_count(); ++c)
    s += rho[c] * mesh.cell_areas[c] * dot(gu[c], gv[c]);
  return s;
}

/// Norm of Eq-style weighted space: (int y^2 + rho |grad y|^2)^(1/2).
inline double weighted_norm(const Mesh& mesh, const WeightField& rho, const NodalField& y) {
  return std::sqrt(std::max(0.0, l2_product(mesh, y, y) + weighted_grad_product(mesh, rho, y, y)));
}

// ---------------------------------------------------------------------------
// Assembly.
// ---------------------------------------------------------------------------

/// Stiffness + mass pair with the Dirichlet rows/columns eliminated
/// symmetrically. `A` is the reduced SPD operator K_rho + M over free
/// vertices; the full-space K and M are kept for residual and energy
/// evaluation and for adjoint loads.
struct LinearSystem {
  CsrMatrix A;       // (K_rho + M) over free vertices
  CsrMatrix K_full;  // stiffness over all vertices
  CsrMatrix M_full;  // consistent P1 mass over all vertices
  std::vector<int> free_to_all;
  std::vector<int> all_to_free;  // -1 at Dirichlet vertices

  int dimension() const { return A.n_rows; }

  /// Restrict a full nodal vector to the free vertices.
  std::vector<double> restrict_free(const std::vector<double>& full) const {
    std::vector<double> r(free_to_all.size());
    for (std::size_t i = 0; i < free_to_all.size(); ++i) r[i] = full[free_to_all[i]];
    return r;
  }

  /// Scatter a free vector into a full nodal field, zero at Dirichlet vertices.
  NodalField scatter(const std::vector<double>& free) const {
    NodalField y(all_to_free.size(), 0.0);
    for (std::size_t i = 0; i < free_to_all.size(); ++i) y[free_to_all[i]] = free[i];
    return y;
  }
};

namespace detail {

struct CellMatrices {
  std::array<std::array<double, 3>, 3> k_unit;  // stiffness without rho
  double m_off, m_diag;
};

inline CellMatrices cell_matrices(const Mesh& mesh, std::size_t c) {
  const auto g = p1_basis_gradients(mesh, c);
  const double area = mesh.cell_areas[c];
  CellMatrices cm;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cm.k_unit[i][j] = area * dot(g[i], g[j]);
  cm.m_off = area / 12.0;
  cm.m_diag = area / 6.0;
  return cm;
}

inline std::vector<std::vector<int>> cells_of_vertex(const Mesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertex_count());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c)
    for (int k = 0; k < 3; ++k) adj[mesh.triangles[c][k]].push_back(int(c));
  return adj;
}

/// Run fn(row) over [0, n_rows) split into contiguous chunks, one per thread.
/// Each row is written by exactly one thread, so results do not depend on the
/// thread count.
template <class Fn>
void for_each_row(int n_rows, int threads, Fn&& fn) {
  if (threads <= 1 || n_rows < 2 * threads) {
    for (int i = 0; i < n_rows; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n_rows + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk, hi = std::min(n_rows, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Assemble K_rho, M, and the reduced operator for the weight field rho.
/// Stiffness entries are exact: sum over cells of rho_c * area_c *
/// (grad lambda_i . grad lambda_j); the mass matrix is the consistent P1 mass
/// (area/12 off-diagonal, area/6 diagonal per cell). Neumann edges contribute
/// nothing (natural boundary condition). Row-wise summation order is fixed by
/// cell index, so any thread count produces entrywise-identical matrices.
inline LinearSystem assemble_system(const Mesh& mesh, const WeightField& rho, int threads = 0) {
  if (rho.size() != mesh.cell_count())
    throw std::invalid_argument("assemble_system: weight length does not match cell count");
  for (double v : rho.values)
    if (!(v > 0.0)) throw std::invalid_argument("assemble_system: weight must be strictly positive");

  const int n = int(mesh.vertex_count());
  const auto adj = detail::cells_of_vertex(mesh);

  std::vector<detail::CellMatrices> cell(mesh.cell_count());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) cell[c] = detail::cell_matrices(mesh, c);

  LinearSystem sys;
  sys.all_to_free.assign(n, -1);
  for (int v = 0; v < n; ++v)
    if (!mesh.is_dirichlet[v]) {
      sys.all_to_free[v] = int(sys.free_to_all.size());
      sys.free_to_all.push_back(v);
    }
  const int n_free = int(sys.free_to_all.size());

  // Sparsity pattern: vertices sharing a cell, ascending per row.
  std::vector<std::vector<int>> pattern(n);
  for (int i = 0; i < n; ++i) {
    auto& cols = pattern[i];
    for (int c : adj[i])
      for (int k = 0; k < 3; ++k) cols.push_back(mesh.triangles[c][k]);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  }

  const auto init_csr = [n](CsrMatrix& m, const std::vector<std::vector<int>>& pat) {
    m.n_rows = m.n_cols = n;
    m.row_ptr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + int(pat[i].size());
    m.col.reserve(m.row_ptr[n]);
    for (int i = 0; i < n; ++i) m.col.insert(m.col.end(), pat[i].begin(), pat[i].end());
    m.val.assign(m.row_ptr[n], 0.0);
  };
  init_csr(sys.K_full, pattern);
  init_csr(sys.M_full, pattern);

  detail::for_each_row(n, threads, [&](int i) {
    const int begin = sys.K_full.row_ptr[i];
    const int end = sys.K_full.row_ptr[i + 1];
    const auto col_begin = sys.K_full.col.begin();
    for (int c : adj[i]) {
      const auto& t = mesh.triangles[c];
      int li = 0;
      while (t[li] != i) ++li;
      for (int lj = 0; lj < 3; ++lj) {
        const int j = t[lj];
        const int k = int(std::lower_bound(col_begin + begin, col_begin + end, j) - col_begin);
        sys.K_full.val[k] += rho[c] * cell[c].k_unit[li][lj];
        sys.M_full.val[k] += (li == lj) ? cell[c].m_diag : cell[c].m_off;
      }
    }
  });

  // Reduced operator: free rows and columns of K + M.
  sys.A.n_rows = sys.A.n_cols = n_free;
  sys.A.row_ptr.assign(n_free + 1, 0);
  for (int fi = 0; fi < n_free; ++fi) {
    const int i = sys.free_to_all[fi];
    int count = 0;
    for (int k = sys.K_full.row_ptr[i]; k < sys.K_full.row_ptr[i + 1]; ++k)
      if (sys.all_to_free[sys.K_full.col[k]] >= 0) ++count;
    sys.A.row_ptr[fi + 1] = sys.A.row_ptr[fi] + count;
  }
  sys.A.col.assign(sys.A.row_ptr[n_free], 0);
  sys.A.val.assign(sys.A.row_ptr[n_free], 0.0);
  detail::for_each_row(n_free, threads, [&](int fi) {
    const int i = sys.free_to_all[fi];
    int out = sys.A.row_ptr[fi];
    for (int k = sys.K_full.row_ptr[i]; k < sys.K_full.row_ptr[i + 1]; ++k) {
      const int fj = sys.all_to_free[sys.K_full.col[k]];
      if (fj >= 0) {
        sys.A.col[out] = fj;
        sys.A.val[out] = sys.K_full.val[k] + sys.M_full.val[k];
        ++out;
      }
    }
  });

  return sys;
}

// ---------------------------------------------------------------------------
// State solve.
// ---------------------------------------------------------------------------

/// Solve (K_rho + M) y = M f on the free vertices of a pre-assembled system.
/// `warm_start` (full-length nodal field) seeds the CG iteration when given.
inline std::pair<NodalField, SolveReport> solve_state_system(const LinearSystem& sys,
                                                             const Mesh& mesh, const NodalField& f,
                                                             double tol,
                                                             const NodalField* warm_start = nullptr) {
  if (f.size() != mesh.vertex_count())
    throw std::invalid_argument("solve_state: load length does not match vertex count");
  const auto t0 = std::chrono::steady_clock::now();

  const auto b = sys.restrict_free(sys.M_full.multiply(f.values));
  std::vector<double> x;
  if (warm_start && warm_start->size() == mesh.vertex_count()) {
    x = sys.restrict_free(warm_start->values);
  } else {
    x.assign(sys.dimension(), 0.0);
  }
  SolveReport report = pcg_solve(sys.A, b, x, tol);
  NodalField y = sys.scatter(x);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(y), report};
}

inline double energy_gap(const Mesh& mesh, const WeightField& rho, const NodalField& y,
                         const NodalField& f);

/// Assemble and solve the state equation for the weight rho; y = 0 at
/// Dirichlet vertices. The result is the unique discrete Galerkin solution.
inline std::pair<NodalField, SolveReport> solve_state(const Mesh& mesh, const WeightField& rho,
                                                      const NodalField& f, double tol,
                                                      int threads = 0) {
  const auto sys = assemble_system(mesh, rho, threads);
  auto [y, report] = solve_state_system(sys, mesh, f, tol);
  report.energy_gap = energy_gap(mesh, rho, y, f);
  return {std::move(y), report};
}

// ---------------------------------------------------------------------------
// Weak-form diagnostics.
// ---------------------------------------------------------------------------

/// int (rho grad y . grad phi + y phi - f phi) dx by exact P1 quadrature.
/// phi must vanish at every Dirichlet vertex (admissible test function).
inline double weak_residual(const Mesh& mesh, const WeightField& rho, const NodalField& y,
                            const NodalField& f, const NodalField& phi) {
  if (phi.size() != mesh.vertex_count())
    throw std::invalid_argument("weak_residual: test function length mismatch");
  for (int v : mesh.dirichlet_vertices)
    if (phi[v] != 0.0)
      throw std::invalid_argument("weak_residual: test function nonzero on the Dirichlet part");
  return weighted_grad_product(mesh, rho, y, phi) + l2_product(mesh, y, phi) -
         l2_product(mesh, f, phi);
}

/// | int (rho |grad y|^2 + y^2) dx - int f y dx |, the energy-equality defect.
/// Zero, up to solver tolerance, for the Galerkin solution (test y = phi).
inline double energy_gap(const Mesh& mesh, const WeightField& rho, const NodalField& y,
                         const NodalField& f) {
  const double energy = weighted_grad_product(mesh, rho, y, y) + l2_product(mesh, y, y);
  return std::abs(energy - l2_product(mesh, f, y));
}

struct EmbeddingBounds {
  double lhs1 = 0.0;  // int |y|
  double rhs1 = 0.0;  // |Omega|^(1/2) (int y^2)^(1/2)
  double lhs2 = 0.0;  // int |grad y|
  double rhs2 = 0.0;  // (int |grad y|^2 rho)^(1/2) (int rho^-1)^(1/2)
};

/// The two discrete embedding estimates; lhs <= rhs holds for both pairs by
/// Cauchy-Schwarz. int |y| uses the edge-midpoint rule, whose induced
/// second-moment sum is the exact int y^2 for P1 fields, so the first
/// inequality is exact in the discrete setting as well.
inline EmbeddingBounds embedding_bounds_check(const Mesh& mesh, const WeightField& rho,
                                              const NodalField& y) {
  if (y.size() != mesh.vertex_count() || rho.size() != mesh.cell_count())
    throw std::invalid_argument("embedding_bounds_check: shape mismatch");
  EmbeddingBounds b;
  double inv_weight_area = 0.0;
  const auto g = p1_gradient(mesh, y);
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& t = mesh.triangles[c];
    const double w = mesh.cell_areas[c] / 3.0;
    b.lhs1 += w * (std::abs(0.5 * (y[t[0]] + y[t[1]])) + std::abs(0.5 * (y[t[1]] + y[t[2]])) +
                   std::abs(0.5 * (y[t[2]] + y[t[0]])));
    b.lhs2 += mesh.cell_areas[c] * norm(g[c]);
    inv_weight_area += mesh.cell_areas[c] / rho[c];
  }
  b.rhs1 = std::sqrt(mesh.total_area()) * l2_norm(mesh, y);
  b.rhs2 = std::sqrt(std::max(0.0, weighted_grad_product(mesh, rho, y, y))) *
           std::sqrt(inv_weight_area);
  return b;
}

}  // namespace wopt
