#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wopt/control.hpp"
#include "wopt/fields.hpp"
#include "wopt/mesh.hpp"
#include "wopt/solver.hpp"
#include "wopt/sparse.hpp"

namespace wopt {

struct CostWeights {
  double tracking = 1.0;
  double energy = 1.0;
  double tv = 1.0;
};

struct CostBreakdown {
  double tracking = 0.0;         // int (y - y_d)^2
  double weighted_energy = 0.0;  // int |grad y|^2 rho
  double tv = 0.0;               // smoothed total variation of rho
  double total = 0.0;
};

/// Evaluate the composite cost for a given weight/state pair. Each term is
/// reported separately before weighting; `total` carries the weights.
inline CostBreakdown cost(const Mesh& mesh, const WeightField& rho, const NodalField& y,
                          const NodalField& y_d, double tv_eps,
                          const CostWeights& w = CostWeights{}) {
  if (y.size() != mesh.vertex_count() || y_d.size() != mesh.vertex_count())
    throw std::invalid_argument("cost: state length does not match vertex count");
  NodalField diff(mesh.vertex_count());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = y[i] - y_d[i];
  CostBreakdown b;
  b.tracking = l2_product(mesh, diff, diff);
  b.weighted_energy = weighted_grad_product(mesh, rho, y, y);
  b.tv = discrete_tv(mesh, rho, tv_eps);
  b.total = w.tracking * b.tracking + w.energy * b.weighted_energy + w.tv * b.tv;
  return b;
}

/// Solve the adjoint equation on a pre-assembled system: the operator is the
/// same K_rho + M as for the state, the load is
///   -2 w_t M (y - y_d) - 2 w_e K_rho y,
/// and p = 0 at Dirichlet vertices.
inline std::pair<NodalField, SolveReport> solve_adjoint_system(
    const LinearSystem& sys, const Mesh& mesh, const NodalField& y, const NodalField& y_d,
    double tol, const CostWeights& w = CostWeights{}, const NodalField* warm_start = nullptr) {
  if (y.size() != mesh.vertex_count() || y_d.size() != mesh.vertex_count())
    throw std::invalid_argument("solve_adjoint: state length does not match vertex count");
  const std::size_t n = mesh.vertex_count();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = y[i] - y_d[i];
  const auto m_diff = sys.M_full.multiply(diff);
  const auto k_y = sys.K_full.multiply(y.values);
  std::vector<double> load(n);
  for (std::size_t i = 0; i < n; ++i)
    load[i] = -2.0 * w.tracking * m_diff[i] - 2.0 * w.energy * k_y[i];

  const auto b = sys.restrict_free(load);
  std::vector<double> x;
  if (warm_start && warm_start->size() == n) {
    x = sys.restrict_free(warm_start->values);
  } else {
    x.assign(sys.dimension(), 0.0);
  }
  SolveReport report = pcg_solve(sys.A, b, x, tol);
  return {sys.scatter(x), report};
}

inline std::pair<NodalField, SolveReport> solve_adjoint(const Mesh& mesh, const WeightField& rho,
                                                        const NodalField& y, const NodalField& y_d,
                                                        double tol,
                                                        const CostWeights& w = CostWeights{}) {
  const auto sys = assemble_system(mesh, rho);
  return solve_adjoint_system(sys, mesh, y, y_d, tol, w);
}

/// Cellwise reduced gradient of the cost with respect to rho:
///   g_c = w_e area_c |grad y|_c^2 + area_c (grad y . grad p)_c
///       + w_tv (d/d rho_c) TV_eps(rho).
/// The middle term is the adjoint pairing d/d rho_c of the state constraint;
/// its weight is already carried by the adjoint load.
inline std::vector<double> reduced_gradient(const Mesh& mesh, const WeightField& rho,
                                            const NodalField& y, const NodalField& p,
                                            double tv_eps, const CostWeights& w = CostWeights{}) {
  if (y.size() != mesh.vertex_count() || p.size() != mesh.vertex_count())
    throw std::invalid_argument("reduced_gradient: field length does not match vertex count");
  if (rho.size() != mesh.cell_count())
    throw std::invalid_argument("reduced_gradient: weight length does not match cell count");
  const auto gy = p1_gradient(mesh, y);
  const auto gp = p1_gradient(mesh, p);
  auto g = discrete_tv_gradient(mesh, rho, tv_eps);
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    g[c] = w.tv * g[c] +
           mesh.cell_areas[c] * (w.energy * dot(gy[c], gy[c]) + dot(gy[c], gp[c]));
  }
  return g;
}

}  // namespace wopt
