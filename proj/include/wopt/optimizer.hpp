#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wopt/control.hpp"
#include "wopt/fields.hpp"
#include "wopt/mesh.hpp"
#include "wopt/objective.hpp"
#include "wopt/solver.hpp"

namespace wopt {

struct OptimizeConfig {
  int max_iters = 200;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double initial_step = 1.0;
  double grad_tol = 1e-6;
  double tv_eps = 1e-6;
  double solver_tol = 1e-12;
  long seed = 0;
  CostWeights weights{};

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("optimize: max_iters must be at least 1");
    if (!(armijo_c > 0.0 && armijo_c < 1.0))
      throw std::invalid_argument("optimize: armijo_c must lie in (0,1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw std::invalid_argument("optimize: backtrack_factor must lie in (0,1)");
    if (!(initial_step > 0.0)) throw std::invalid_argument("optimize: initial_step must be positive");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("optimize: grad_tol must be positive");
    if (!(tv_eps > 0.0)) throw std::invalid_argument("optimize: tv_eps must be positive");
    if (!(solver_tol > 0.0 && solver_tol < 1.0))
      throw std::invalid_argument("optimize: solver_tol must lie in (0,1)");
  }
};

/// One row of the descent trace. `step` and `displacement` describe the move
/// that produced this iterate (both 0 for the initial iterate); displacement
/// is the area-weighted norm of (rho_prev - rho)/step, the quantity the
/// stopping test compares against grad_tol.
struct IterationRecord {
  int iteration = 0;
  CostBreakdown cost;
  double step = 0.0;
  double displacement = 0.0;
  double bv_norm = 0.0;
  double l2_y = 0.0;
  double wgrad_y = 0.0;  // ||grad y|| in L2(rho dx)
  double mass = 0.0;
  double bound_violation = 0.0;
  int cg_state = 0;
  int cg_adjoint = 0;
};

/// Full descent history plus enough context (areas, constraint set, the most
/// recent weight fields) for the boundedness report to be evaluated on the
/// trace alone.
struct OptimizeTrace {
  std::vector<IterationRecord> records;
  std::vector<std::vector<double>> last_weights;  // up to 10 most recent iterates, oldest first
  std::vector<double> cell_areas;
  AdmissibleSet set;
  bool converged = false;
};

/// Armijo backtracking drove the step below 10^-16 without an acceptable
/// trial; the partial trace is attached for post-mortem.
class stalled_progress : public std::runtime_error {
 public:
  stalled_progress(const std::string& what, OptimizeTrace trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  OptimizeTrace trace;
};

namespace detail {

constexpr std::size_t kTraceWindow = 10;

inline void push_window(std::vector<std::vector<double>>& window, const std::vector<double>& rho) {
  if (window.size() == kTraceWindow) window.erase(window.begin());
  window.push_back(rho);
}

inline double bound_violation(const std::vector<double>& rho, const AdmissibleSet& set) {
  double worst = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c)
    worst = std::max({worst, set.xi1[c] - rho[c], rho[c] - set.xi2[c]});
  return worst;
}

}  // namespace detail

/// Projected gradient descent with Armijo backtracking on the reduced cost.
/// Each trial re-solves the state; steps are taken in the area-weighted
/// metric (cell gradient divided by cell area) and projected back onto the
/// admissible set. Terminates when the area-weighted norm of
/// (rho_k - rho_{k+1})/s_k drops to grad_tol or max_iters moves were taken.
/// Every iterate is feasible; the recorded cost sequence is non-increasing.
inline std::tuple<WeightField, NodalField, OptimizeTrace> optimize(
    const Mesh& mesh, const AdmissibleSet& set, const NodalField& f, const NodalField& y_d,
    const WeightField& rho0, const OptimizeConfig& cfg, int threads = 0) {
  cfg.validate();
  set.validate(mesh);
  if (f.size() != mesh.vertex_count() || y_d.size() != mesh.vertex_count())
    throw std::invalid_argument("optimize: data length does not match vertex count");
  if (rho0.size() != mesh.cell_count())
    throw std::invalid_argument("optimize: initial weight length does not match cell count");

  OptimizeTrace trace;
  trace.cell_areas = mesh.cell_areas;
  trace.set = set;

  WeightField rho = project_admissible(mesh, rho0.values, set);
  LinearSystem sys = assemble_system(mesh, rho, threads);
  auto [y, state_rep] = solve_state_system(sys, mesh, f, cfg.solver_tol);
  CostBreakdown current = cost(mesh, rho, y, y_d, cfg.tv_eps, cfg.weights);

  const auto make_record = [&](int k, const WeightField& r, const NodalField& yk,
                               const CostBreakdown& cb, double step, double disp,
                               int cg_state) {
    IterationRecord rec;
    rec.iteration = k;
    rec.cost = cb;
    rec.step = step;
    rec.displacement = disp;
    rec.bv_norm = bv_norm(mesh, r);
    rec.l2_y = l2_norm(mesh, yk);
    rec.wgrad_y = std::sqrt(std::max(0.0, weighted_grad_product(mesh, r, yk, yk)));
    rec.mass = mass(mesh, r);
    rec.bound_violation = detail::bound_violation(r.values, set);
    rec.cg_state = cg_state;
    return rec;
  };

  trace.records.push_back(make_record(0, rho, y, current, 0.0, 0.0, state_rep.cg_iterations));
  detail::push_window(trace.last_weights, rho.values);

  NodalField p(mesh.vertex_count(), 0.0);
  for (int k = 0; k < cfg.max_iters; ++k) {
    SolveReport adj_rep;
    try {
      auto adj = solve_adjoint_system(sys, mesh, y, y_d, cfg.solver_tol, cfg.weights, &p);
      p = std::move(adj.first);
      adj_rep = adj.second;
    } catch (const solver_failure& e) {
      throw solver_failure("adjoint solve failed at iterate " + std::to_string(k) + ": " + e.what(),
                           e.residual_history);
    }
    trace.records.back().cg_adjoint = adj_rep.cg_iterations;

    const auto g = reduced_gradient(mesh, rho, y, p, cfg.tv_eps, cfg.weights);
    std::vector<double> direction(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) direction[c] = g[c] / mesh.cell_areas[c];

    double s = cfg.initial_step;
    WeightField trial(mesh.cell_count());
    std::vector<double> shifted(mesh.cell_count());
    for (;;) {
      if (s < 1e-16)
        throw stalled_progress("optimize: Armijo step underflow at iterate " + std::to_string(k),
                               std::move(trace));
      for (std::size_t c = 0; c < shifted.size(); ++c) shifted[c] = rho[c] - s * direction[c];
      trial = project_admissible(mesh, shifted, set);
      double decrease = 0.0;
      for (std::size_t c = 0; c < g.size(); ++c) decrease += g[c] * (trial[c] - rho[c]);

      LinearSystem sys_trial;
      NodalField y_trial = y;
      SolveReport rep_trial;
      try {
        sys_trial = assemble_system(mesh, trial, threads);
        auto solved = solve_state_system(sys_trial, mesh, f, cfg.solver_tol, &y);
        y_trial = std::move(solved.first);
        rep_trial = solved.second;
      } catch (const solver_failure& e) {
        throw solver_failure("state solve failed at iterate " + std::to_string(k) + ", step " +
                                 std::to_string(s) + ": " + e.what(),
                             e.residual_history);
      }
      const CostBreakdown cb = cost(mesh, trial, y_trial, y_d, cfg.tv_eps, cfg.weights);
      if (cb.total <= current.total + cfg.armijo_c * decrease && cb.total <= current.total) {
        double disp_sq = 0.0;
        for (std::size_t c = 0; c < trial.size(); ++c) {
          const double d = (rho[c] - trial[c]) / s;
          disp_sq += mesh.cell_areas[c] * d * d;
        }
        const double disp = std::sqrt(disp_sq);
        rho = std::move(trial);
        sys = std::move(sys_trial);
        y = std::move(y_trial);
        current = cb;
        trace.records.push_back(
            make_record(k + 1, rho, y, current, s, disp, rep_trial.cg_iterations));
        detail::push_window(trace.last_weights, rho.values);
        if (disp <= cfg.grad_tol) trace.converged = true;
        break;
      }
      s *= cfg.backtrack_factor;
    }
    if (trace.converged) break;
  }

  return {std::move(rho), std::move(y), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Boundedness report.
// ---------------------------------------------------------------------------

struct TauReport {
  double sup_bv_norm = 0.0;
  double sup_l2_y = 0.0;
  double sup_weighted_grad = 0.0;
  double l1_tail = 0.0;  // max over the kept window of ||rho_k - rho_last||_L1
  double max_mass_violation = 0.0;
  double max_bound_violation = 0.0;
  bool sups_finite = false;
  bool tail_within_tol = false;
  bool feasible = false;
  bool bounded = false;  // sups_finite && tail_within_tol
};

/// Numerical witness of trace boundedness: sups of the three per-iterate
/// norms, the L1 Cauchy tail over the kept weight window, and a feasibility
/// audit of every recorded iterate against the trace's admissible set.
inline TauReport tau_boundedness_report(const OptimizeTrace& trace, double tail_tol = 1e-4) {
  if (trace.records.empty())
    throw std::invalid_argument("tau_boundedness_report: empty trace");

  TauReport rep;
  for (const auto& r : trace.records) {
    rep.sup_bv_norm = std::max(rep.sup_bv_norm, r.bv_norm);
    rep.sup_l2_y = std::max(rep.sup_l2_y, r.l2_y);
    rep.sup_weighted_grad = std::max(rep.sup_weighted_grad, r.wgrad_y);
    rep.max_mass_violation =
        std::max(rep.max_mass_violation, std::abs(r.mass - trace.set.mass));
    rep.max_bound_violation = std::max(rep.max_bound_violation, r.bound_violation);
  }
  if (!trace.last_weights.empty()) {
    const auto& last = trace.last_weights.back();
    for (const auto& w : trace.last_weights) {
      double dist = 0.0;
      for (std::size_t c = 0; c < w.size(); ++c)
        dist += trace.cell_areas[c] * std::abs(w[c] - last[c]);
      rep.l1_tail = std::max(rep.l1_tail, dist);
      rep.max_bound_violation =
          std::max(rep.max_bound_violation, detail::bound_violation(w, trace.set));
    }
  }
  rep.sups_finite = std::isfinite(rep.sup_bv_norm) && std::isfinite(rep.sup_l2_y) &&
                    std::isfinite(rep.sup_weighted_grad);
  rep.tail_within_tol = rep.l1_tail <= tail_tol;
  rep.feasible = rep.max_mass_violation <= 1e-9 * std::max(1.0, std::abs(trace.set.mass)) &&
                 rep.max_bound_violation <= 0.0;
  rep.bounded = rep.sups_finite && rep.tail_within_tol;
  return rep;
}

}  // namespace wopt
