#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "wopt/errors.hpp"
#include "wopt/fields.hpp"
#include "wopt/mesh.hpp"

namespace wopt {

/// Cellwise bounds and target mass defining the discrete admissible set
/// { xi1 <= rho <= xi2 cellwise, sum_c area_c * rho_c = mass }.
struct AdmissibleSet {
  std::vector<double> xi1;
  std::vector<double> xi2;
  double mass = 0.0;

  /// Throws when the set cannot match the mesh or cannot contain any field.
  void validate(const Mesh& mesh) const {
    if (xi1.size() != mesh.cell_count() || xi2.size() != mesh.cell_count())
      throw std::invalid_argument("AdmissibleSet: bound length does not match cell count");
    double lo = 0.0, hi = 0.0;
    for (std::size_t c = 0; c < xi1.size(); ++c) {
      if (!std::isfinite(xi1[c]) || !std::isfinite(xi2[c]))
        throw std::invalid_argument("AdmissibleSet: non-finite bound");
      if (!(xi1[c] > 0.0)) throw infeasible_error("AdmissibleSet: xi1 must be strictly positive");
      if (xi1[c] > xi2[c]) throw infeasible_error("AdmissibleSet: xi1 > xi2 on some cell");
      lo += mesh.cell_areas[c] * xi1[c];
      hi += mesh.cell_areas[c] * xi2[c];
    }
    if (!std::isfinite(mass)) throw std::invalid_argument("AdmissibleSet: non-finite mass");
    if (mass < lo) {
      std::ostringstream os;
      os << "AdmissibleSet infeasible: mass " << mass << " < sum(area*xi1) = " << lo;
      throw infeasible_error(os.str());
    }
    if (mass > hi) {
      std::ostringstream os;
      os << "AdmissibleSet infeasible: mass " << mass << " > sum(area*xi2) = " << hi;
      throw infeasible_error(os.str());
    }
  }

  double min_xi1() const {
    double v = xi1.empty() ? 0.0 : xi1[0];
    for (double x : xi1) v = std::min(v, x);
    return v;
  }
};

/// Exact integral of the piecewise-constant field: sum_c area_c * rho_c.
inline double mass(const Mesh& mesh, const WeightField& rho) {
  if (rho.size() != mesh.cell_count())
    throw std::invalid_argument("mass: field length does not match cell count");
  double s = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c) s += mesh.cell_areas[c] * rho[c];
  return s;
}

/// Smoothed absolute value, phi_eps(t) = sqrt(t^2 + eps^2) - eps.
/// Satisfies 0 <= |t| - phi_eps(t) <= eps.
inline double phi_eps(double t, double eps) { return std::sqrt(t * t + eps * eps) - eps; }

/// Total variation of the piecewise-constant field: the sum over interior
/// edges of edge length times the (eps-smoothed) jump magnitude. At eps = 0
/// this is the exact interface-jump TV.
inline double discrete_tv(const Mesh& mesh, const WeightField& rho, double eps) {
  if (rho.size() != mesh.cell_count())
    throw std::invalid_argument("discrete_tv: field length does not match cell count");
  if (eps < 0.0) throw std::invalid_argument("discrete_tv: eps must be nonnegative");
  double s = 0.0;
  for (const auto& e : mesh.interior_edges) s += e.length * phi_eps(rho[e.c1] - rho[e.c2], eps);
  return s;
}

/// Exact gradient of discrete_tv(., eps) with respect to cell values.
/// Requires eps > 0; the exact TV is not differentiable at zero jumps.
inline std::vector<double> discrete_tv_gradient(const Mesh& mesh, const WeightField& rho,
                                                double eps) {
  if (rho.size() != mesh.cell_count())
    throw std::invalid_argument("discrete_tv_gradient: field length does not match cell count");
  if (!(eps > 0.0)) throw std::invalid_argument("discrete_tv_gradient: eps must be positive");
  std::vector<double> g(mesh.cell_count(), 0.0);
  for (const auto& e : mesh.interior_edges) {
    const double d = rho[e.c1] - rho[e.c2];
    const double w = e.length * d / std::sqrt(d * d + eps * eps);
    g[e.c1] += w;
    g[e.c2] -= w;
  }
  return g;
}

/// ||rho||_BV = L1 norm + exact TV.
inline double bv_norm(const Mesh& mesh, const WeightField& rho) {
  if (rho.size() != mesh.cell_count())
    throw std::invalid_argument("bv_norm: field length does not match cell count");
  double l1 = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c) l1 += mesh.cell_areas[c] * std::abs(rho[c]);
  return l1 + discrete_tv(mesh, rho, 0.0);
}

namespace detail {

inline double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace detail

/// Euclidean projection of g onto the admissible set in the area-weighted L2
/// metric: the unique minimizer of sum_c area_c (rho_c - g_c)^2 subject to the
/// bounds and the mass constraint. Computed as rho_c(lambda) =
/// clip(g_c - lambda, xi1_c, xi2_c) with lambda found by bisection on the
/// monotone mass residual; terminates when |mass - m| <= 1e-12 * max(1, m).
inline WeightField project_admissible(const Mesh& mesh, const std::vector<double>& g,
                                      const AdmissibleSet& set) {
  if (g.size() != mesh.cell_count())
    throw std::invalid_argument("project_admissible: field length does not match cell count");
  set.validate(mesh);
  for (double v : g)
    if (!std::isfinite(v)) throw std::invalid_argument("project_admissible: non-finite input");

  const double mass_tol = 1e-12 * std::max(1.0, set.mass);
  const std::size_t n = g.size();

  // A member of the set projects to itself.
  {
    bool in_bounds = true;
    double m0 = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (g[c] < set.xi1[c] || g[c] > set.xi2[c]) {
        in_bounds = false;
        break;
      }
      m0 += mesh.cell_areas[c] * g[c];
    }
    if (in_bounds && std::abs(m0 - set.mass) <= mass_tol) {
      WeightField rho;
      rho.values = g;
      return rho;
    }
  }

  const auto mass_at = [&](double lambda) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c)
      s += mesh.cell_areas[c] * detail::clip(g[c] - lambda, set.xi1[c], set.xi2[c]);
    return s;
  };

  // mass_at is continuous and nonincreasing; this bracket pins the extremes.
  double lo = g[0] - set.xi2[0], hi = g[0] - set.xi1[0];
  for (std::size_t c = 1; c < n; ++c) {
    lo = std::min(lo, g[c] - set.xi2[c]);
    hi = std::max(hi, g[c] - set.xi1[c]);
  }

  double lambda = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    lambda = 0.5 * (lo + hi);
    const double m = mass_at(lambda);
    if (std::abs(m - set.mass) <= mass_tol) break;
    if (m > set.mass)
      lo = lambda;
    else
      hi = lambda;
  }

  WeightField rho(n);
  for (std::size_t c = 0; c < n; ++c)
    rho[c] = detail::clip(g[c] - lambda, set.xi1[c], set.xi2[c]);
  return rho;
}

}  // namespace wopt
