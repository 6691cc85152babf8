#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wopt/control.hpp"
#include "wopt/fields.hpp"
#include "wopt/mesh.hpp"

namespace wopt {

/// Ordered weight fields on a common mesh, with an optional declared limit.
struct WeightSequence {
  std::vector<WeightField> fields;
  std::optional<WeightField> limit;
};

/// sum_c area_c rho_c v_c w_c, the L2(rho dx) pairing of two cell fields.
inline double variable_pairing(const Mesh& mesh, const WeightField& rho,
                               const std::vector<double>& v, const std::vector<double>& w) {
  if (rho.size() != mesh.cell_count() || v.size() != mesh.cell_count() ||
      w.size() != mesh.cell_count())
    throw std::invalid_argument("variable_pairing: shape mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < mesh.cell_count(); ++c)
    s += mesh.cell_areas[c] * rho[c] * v[c] * w[c];
  return s;
}

/// Fixed battery of test fields: constant one, the two centroid coordinates,
/// and one seeded random field. Deterministic for a given mesh.
inline std::vector<std::pair<std::string, std::vector<double>>> pairing_battery(const Mesh& mesh) {
  const std::size_t n = mesh.cell_count();
  std::vector<std::pair<std::string, std::vector<double>>> battery;
  battery.emplace_back("const", std::vector<double>(n, 1.0));
  std::vector<double> cx(n), cy(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& t = mesh.triangles[c];
    cx[c] = (mesh.vertices[t[0]].x + mesh.vertices[t[1]].x + mesh.vertices[t[2]].x) / 3.0;
    cy[c] = (mesh.vertices[t[0]].y + mesh.vertices[t[1]].y + mesh.vertices[t[2]].y) / 3.0;
  }
  battery.emplace_back("centroid_x", std::move(cx));
  battery.emplace_back("centroid_y", std::move(cy));
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> rnd(n);
  for (auto& v : rnd) v = dist(rng);
  battery.emplace_back("random", std::move(rnd));
  return battery;
}

namespace detail {

inline void validate_sequence(const Mesh& mesh, const WeightSequence& seq, const char* who) {
  if (!seq.limit)
    throw std::invalid_argument(std::string(who) + ": sequence has no limit field");
  if (seq.limit->size() != mesh.cell_count())
    throw std::invalid_argument(std::string(who) + ": limit length does not match cell count");
  for (double v : seq.limit->values)
    if (!(v > 0.0)) throw std::invalid_argument(std::string(who) + ": limit must be positive");
  for (const auto& f : seq.fields) {
    if (f.size() != mesh.cell_count())
      throw std::invalid_argument(std::string(who) + ": field length does not match cell count");
    for (double v : f.values)
      if (!(v > 0.0)) throw std::invalid_argument(std::string(who) + ": fields must be positive");
  }
}

}  // namespace detail

struct InverseWeightReport {
  std::vector<double> l1_distance;    // int |rho_k^-1 - rho^-1| per k
  std::vector<double> variable_norm;  // int rho_k^-1 per k (= int (rho_k^-1)^2 rho_k)
  double target = 0.0;                // int rho^-1
  std::vector<std::string> battery_names;
  std::vector<std::vector<double>> pairing_error;  // [k][phi]: |pairing - int phi|
  std::vector<double> limit_pairing_error;         // per phi, same identity on the limit
  double max_pairing_error_rel = 0.0;              // relative to int phi
  double sup_cell_inverse_mass = 0.0;              // sup_k max_c area_c / rho_kc
  std::vector<double> lambda_grid;
  std::vector<double> tail_integrals;  // sup_k int_{rho_k^-1 > lambda} rho_k^-1
};

/// Per-k convergence metrics of the inverse weights toward the declared
/// limit: L1 distance, the strong-convergence norm criterion, the exact
/// pairing identity over the test battery, and equi-integrability
/// surrogates (worst single cell, superlevel-set tails).
inline InverseWeightReport inverse_weight_convergence(const Mesh& mesh,
                                                      const WeightSequence& seq) {
  detail::validate_sequence(mesh, seq, "inverse_weight_convergence");
  const std::size_t n = mesh.cell_count();
  const auto& lim = *seq.limit;
  const auto battery = pairing_battery(mesh);

  InverseWeightReport rep;
  for (const auto& [name, phi] : battery) {
    rep.battery_names.push_back(name);
    double exact = 0.0;
    for (std::size_t c = 0; c < n; ++c) exact += mesh.cell_areas[c] * phi[c];
    std::vector<double> inv_lim(n);
    for (std::size_t c = 0; c < n; ++c) inv_lim[c] = 1.0 / lim[c];
    rep.limit_pairing_error.push_back(std::abs(variable_pairing(mesh, lim, inv_lim, phi) - exact));
  }
  rep.target = 0.0;
  for (std::size_t c = 0; c < n; ++c) rep.target += mesh.cell_areas[c] / lim[c];

  rep.lambda_grid = {1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  rep.tail_integrals.assign(rep.lambda_grid.size(), 0.0);

  for (const auto& field : seq.fields) {
    double l1 = 0.0, vnorm = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      l1 += mesh.cell_areas[c] * std::abs(1.0 / field[c] - 1.0 / lim[c]);
      vnorm += mesh.cell_areas[c] / field[c];
      rep.sup_cell_inverse_mass =
          std::max(rep.sup_cell_inverse_mass, mesh.cell_areas[c] / field[c]);
    }
    rep.l1_distance.push_back(l1);
    rep.variable_norm.push_back(vnorm);

    for (std::size_t l = 0; l < rep.lambda_grid.size(); ++l) {
      double tail = 0.0;
      for (std::size_t c = 0; c < n; ++c)
        if (1.0 / field[c] > rep.lambda_grid[l]) tail += mesh.cell_areas[c] / field[c];
      rep.tail_integrals[l] = std::max(rep.tail_integrals[l], tail);
    }

    std::vector<double> inv(n);
    for (std::size_t c = 0; c < n; ++c) inv[c] = 1.0 / field[c];
    rep.pairing_error.emplace_back();
    for (const auto& [name, phi] : battery) {
      double exact = 0.0;
      for (std::size_t c = 0; c < n; ++c) exact += mesh.cell_areas[c] * phi[c];
      const double err = std::abs(variable_pairing(mesh, field, inv, phi) - exact);
      rep.pairing_error.back().push_back(err);
      rep.max_pairing_error_rel = std::max(rep.max_pairing_error_rel, err / exact);
    }
  }
  return rep;
}

struct LscReport {
  double tv_limit = 0.0;
  std::vector<double> tv_k;
  std::vector<double> running_liminf;  // suffix minima of tv_k
  double liminf_estimate = 0.0;        // min over the last (up to 10) entries
  double gap = 0.0;                    // tv_limit - liminf_estimate
  bool violation = false;
};

/// Lower-semicontinuity witness: TV of the declared limit against the
/// running liminf of the sequence TVs (suffix minima; the estimate uses the
/// last up-to-10 entries as the tail window). A positive gap beyond
/// 10^-10 * scale raises the flag; for componentwise-convergent sequences
/// this cannot fire in the discrete setting.
inline LscReport lsc_witness(const Mesh& mesh, const WeightSequence& seq) {
  detail::validate_sequence(mesh, seq, "lsc_witness");
  if (seq.fields.empty()) throw std::invalid_argument("lsc_witness: empty sequence");

  LscReport rep;
  rep.tv_limit = discrete_tv(mesh, *seq.limit, 0.0);
  for (const auto& field : seq.fields) rep.tv_k.push_back(discrete_tv(mesh, field, 0.0));

  rep.running_liminf.assign(rep.tv_k.size(), 0.0);
  double suffix = std::numeric_limits<double>::infinity();
  for (std::size_t i = rep.tv_k.size(); i-- > 0;) {
    suffix = std::min(suffix, rep.tv_k[i]);
    rep.running_liminf[i] = suffix;
  }
  const std::size_t window = std::min<std::size_t>(10, rep.tv_k.size());
  rep.liminf_estimate = rep.running_liminf[rep.tv_k.size() - window];
  rep.gap = rep.tv_limit - rep.liminf_estimate;

  double scale = std::max(1.0, std::abs(rep.tv_limit));
  for (double t : rep.tv_k) scale = std::max(scale, std::abs(t));
  rep.violation = rep.gap > 1e-10 * scale;
  return rep;
}

}  // namespace wopt
