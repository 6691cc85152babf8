// Acceptance gate: ten go/no-go criteria covering discretization accuracy,
// the weak-form and energy identities, gradient and projection oracles, the
// reference descent run, variable-space diagnostics, and CLI determinism.
// Prints one [PASS]/[FAIL] line per criterion and exits nonzero on failure.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wopt/wopt.hpp"

#include "../support/oracles.hpp"

namespace {

using namespace wopt;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

NodalField random_phi(const Mesh& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  NodalField phi(m.vertex_count());
  for (std::size_t v = 0; v < m.vertex_count(); ++v) phi[v] = dist(rng);
  for (int v : m.dirichlet_vertices) phi[v] = 0.0;
  return phi;
}

const BoundarySpec kLeftDirichlet{BoundaryTag::Dirichlet, BoundaryTag::Neumann,
                                  BoundaryTag::Neumann, BoundaryTag::Neumann};

// Solves kept by criterion 1 so criterion 2 can audit every one of them.
struct SolvedCase {
  Mesh mesh;
  WeightField rho;
  NodalField y, f;
};
std::vector<SolvedCase> g_solved;

// Reference descent run kept by criterion 7 for the boundedness report.
struct ReferenceRun {
  Mesh mesh;
  WeightField rho_star;
  NodalField y_star, f;
  OptimizeTrace trace;
};
std::optional<ReferenceRun> g_reference;

// 1. Manufactured solutions on the unit square, all-Dirichlet and mixed.
Outcome mms_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  double min_order = 1e300;
  for (const oracle::Manufactured& mms : {oracle::mms_dirichlet(), oracle::mms_mixed()}) {
    std::vector<double> err;
    for (int n : {8, 16, 32, 64}) {
      const Mesh mesh = build_structured_mesh(n, n, Rect{}, mms.boundary);
      const WeightField rho(mesh.cell_count(), 1.0);
      const NodalField f = oracle::interpolate(mesh, mms.f);
      auto [y, rep] = solve_state(mesh, rho, f, 1e-12);
      err.push_back(oracle::l2_error_true(mesh, y, mms.y));
      g_solved.push_back({mesh, rho, std::move(y), f});
    }
    for (std::size_t i = 0; i + 1 < err.size(); ++i)
      min_order = std::min(min_order, std::log2(err[i] / err[i + 1]));
  }
  const double dt = seconds_since(t0);
  return {min_order >= 1.85 && dt <= 60.0,
          fmt("min observed L2 order %.3f over n = 8..64, %.1f s", min_order, dt)};
}

// 2. Weak-form identity on every instance solved above.
Outcome weak_form_identity() {
  if (g_solved.empty()) return {false, "no solved instances available"};
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (const auto& s : g_solved) {
    const double fn = l2_norm(s.mesh, s.f);
    for (int k = 0; k < 20; ++k) {
      const NodalField phi = random_phi(s.mesh, rng);
      const double r = std::abs(weak_residual(s.mesh, s.rho, s.y, s.f, phi));
      worst = std::max(worst, r / (fn * l2_norm(s.mesh, phi)));
    }
  }
  return {worst <= 1e-9, fmt("max |residual| / (|f||phi|) = %.2e over %zu instances x 20 tests",
                             worst, g_solved.size())};
}

// 3. Energy equality across the {constant, random in [xi1, 2]} x xi1 x n matrix.
Outcome energy_equality() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  int solves = 0;
  for (int n : {4, 8, 16}) {
    const Mesh mesh = build_structured_mesh(n, n, Rect{}, kLeftDirichlet);
    const NodalField f =
        oracle::interpolate(mesh, [](double x, double y) { return 1.0 + x + 0.5 * y; });
    for (double xi1 : {0.1, 1e-4, 1e-6}) {
      for (int mode = 0; mode < 2; ++mode) {
        WeightField rho(mesh.cell_count(), 1.0);
        if (mode == 1) {
          std::uniform_real_distribution<double> dist(xi1, 2.0);
          for (std::size_t c = 0; c < rho.size(); ++c) rho[c] = dist(rng);
        }
        auto [y, rep] = solve_state(mesh, rho, f, 1e-12);
        const double energy = weighted_grad_product(mesh, rho, y, y) + l2_product(mesh, y, y);
        worst = std::max(worst, rep.energy_gap / std::max(1.0, energy));
        ++solves;
      }
    }
  }
  return {worst <= 1e-9, fmt("max relative energy gap %.2e over %d solves", worst, solves)};
}

// 4. Both embedding estimates on random weight/state pairs.
Outcome embedding() {
  std::mt19937_64 rng(404);
  const Mesh meshes[2] = {build_structured_mesh(8, 8, Rect{}, BoundarySpec{}),
                          build_structured_mesh(6, 5, Rect{0.0, 0.0, 2.0, 1.0}, kLeftDirichlet)};
  std::uniform_real_distribution<double> ry(-1.0, 1.0);
  std::uniform_real_distribution<double> lr(std::log(1e-2), std::log(1e2));
  int violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Mesh& mesh = meshes[t % 2];
    WeightField rho(mesh.cell_count());
    for (std::size_t c = 0; c < rho.size(); ++c) rho[c] = std::exp(lr(rng));
    NodalField y(mesh.vertex_count());
    for (std::size_t v = 0; v < y.size(); ++v) y[v] = ry(rng);
    const EmbeddingBounds b = embedding_bounds_check(mesh, rho, y);
    if (b.lhs1 > b.rhs1 * (1.0 + 1e-12) || b.lhs2 > b.rhs2 * (1.0 + 1e-12)) ++violations;
    worst = std::max({worst, b.lhs1 / b.rhs1, b.lhs2 / b.rhs2});
  }
  return {violations == 0,
          fmt("%d violations in 100 pairs, max lhs/rhs ratio %.6f", violations, worst)};
}

// 5. Reduced gradient against central finite differences.
Outcome gradient_fd() {
  const auto t0 = std::chrono::steady_clock::now();
  const double eps = 1e-2, tol = 1e-13;
  double worst = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const int n = inst < 3 ? 4 : 8;
    std::mt19937_64 rng(500 + inst);
    const Mesh mesh = build_structured_mesh(n, n, Rect{}, kLeftDirichlet);
    std::uniform_real_distribution<double> dr(0.5, 1.5);
    WeightField rho(mesh.cell_count());
    for (std::size_t c = 0; c < rho.size(); ++c) rho[c] = dr(rng);
    const NodalField f = oracle::interpolate(mesh, [](double x, double) { return 1.0 + x; });
    const NodalField y_d = oracle::interpolate(
        mesh, [](double x, double y) { return 0.2 * std::sin(3.0 * x) * (1.0 + y); });

    auto [y, ry_] = solve_state(mesh, rho, f, tol);
    auto [p, rp_] = solve_adjoint(mesh, rho, y, y_d, tol);
    const auto g = reduced_gradient(mesh, rho, y, p, eps);

    const auto total = [&](const WeightField& r) {
      auto [yy, rr] = solve_state(mesh, r, f, tol);
      return cost(mesh, r, yy, y_d, eps).total;
    };
    std::vector<double> fd(mesh.cell_count());
    double scale = 0.0;
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
      const double h = 1e-6 * rho[c];
      WeightField up = rho, dn = rho;
      up[c] += h;
      dn[c] -= h;
      fd[c] = (total(up) - total(dn)) / (2.0 * h);
      scale = std::max(scale, std::abs(fd[c]));
    }
    for (std::size_t c = 0; c < mesh.cell_count(); ++c)
      worst = std::max(worst, std::abs(g[c] - fd[c]) /
                                  std::max(std::abs(fd[c]), 1e-12 * std::max(scale, 1.0)));
  }
  const double dt = seconds_since(t0);
  return {worst <= 1e-4 && dt <= 120.0,
          fmt("max relative error %.2e over 5 instances, %.1f s", worst, dt)};
}

// 6. Projection against brute-force active-set enumeration.
Outcome projection_oracle() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> dn(1, 5);
  std::uniform_real_distribution<double> da(0.1, 1.5), dlo(0.05, 0.85), dw(0.1, 2.0),
      dg(-1.0, 3.0), du(0.02, 0.98);
  double worst = 0.0;
  int unresolved = 0;
  for (int t = 0; t < 200; ++t) {
    Mesh mesh = build_structured_mesh(dn(rng), 1, Rect{}, BoundarySpec{});
    for (auto& a : mesh.cell_areas) a = da(rng);  // projection sees only the areas
    const std::size_t n = mesh.cell_count();

    AdmissibleSet set;
    set.xi1.resize(n);
    set.xi2.resize(n);
    double lo = 0.0, hi = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      set.xi1[c] = dlo(rng);
      set.xi2[c] = set.xi1[c] + dw(rng);
      lo += mesh.cell_areas[c] * set.xi1[c];
      hi += mesh.cell_areas[c] * set.xi2[c];
    }
    set.mass = lo + du(rng) * (hi - lo);

    std::vector<double> g(n);
    for (std::size_t c = 0; c < n; ++c) g[c] = dg(rng);

    const WeightField proj = project_admissible(mesh, g, set);
    const auto ref = oracle::project_enumerate(mesh.cell_areas, g, set.xi1, set.xi2, set.mass);
    if (!ref) {
      ++unresolved;
      continue;
    }
    for (std::size_t c = 0; c < n; ++c) worst = std::max(worst, std::abs(proj[c] - (*ref)[c]));
  }
  return {worst <= 1e-8 && unresolved == 0,
          fmt("max componentwise deviation %.2e over 200 trials, %d unresolved", worst,
              unresolved)};
}

// 7. Reference descent run: 8x8, left Dirichlet edge, f = 1, target equal to
// the uniform-weight state dampened by 10 percent in the upper-right quadrant.
Outcome descent_feasibility() {
  Mesh mesh = build_structured_mesh(8, 8, Rect{}, kLeftDirichlet);
  const NodalField f(mesh.vertex_count(), 1.0);
  const WeightField rho_init(mesh.cell_count(), 1.0);
  auto [y_ref, rep_ref] = solve_state(mesh, rho_init, f, 1e-12);
  NodalField y_d = y_ref;
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
    if (mesh.vertices[v].x > 0.5 && mesh.vertices[v].y > 0.5) y_d[v] *= 0.9;

  AdmissibleSet set;
  set.xi1.assign(mesh.cell_count(), 0.1);
  set.xi2.assign(mesh.cell_count(), 2.0);
  set.mass = 1.0;

  OptimizeConfig cfg;
  cfg.max_iters = 2000;
  cfg.grad_tol = 1e-6;
  cfg.tv_eps = 1e-3;
  cfg.solver_tol = 1e-12;

  auto [rho_star, y_star, trace] = optimize(mesh, set, f, y_d, rho_init, cfg);

  bool monotone = true, feasible = true;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    if (k > 0 && r.cost.total > trace.records[k - 1].cost.total) monotone = false;
    if (std::abs(r.mass - set.mass) > 1e-9 || r.bound_violation > 0.0) feasible = false;
  }
  const bool settled = trace.converged && trace.records.back().displacement <= 1e-6;
  const bool decreased = trace.records.back().cost.total < trace.records.front().cost.total;

  std::mt19937_64 rng(707);
  const double fn = l2_norm(mesh, f);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const NodalField phi = random_phi(mesh, rng);
    worst = std::max(worst,
                     std::abs(weak_residual(mesh, rho_star, y_star, f, phi)) /
                         (fn * l2_norm(mesh, phi)));
  }

  const int iters = trace.records.back().iteration;
  const double disp = trace.records.back().displacement;
  g_reference = ReferenceRun{std::move(mesh), rho_star, y_star, f, std::move(trace)};
  return {monotone && feasible && settled && decreased && worst <= 1e-9,
          fmt("%d iterations, final displacement %.2e, final pair residual ratio %.2e", iters,
              disp, worst)};
}

// 8. Inverse-weight convergence for the 1 + 1/k family.
Outcome variable_space() {
  const Mesh mesh = build_structured_mesh(4, 4, Rect{}, BoundarySpec{});
  WeightSequence seq;
  seq.limit = WeightField(mesh.cell_count(), 1.0);
  for (int k = 1; k <= 1000; ++k) seq.fields.emplace_back(mesh.cell_count(), 1.0 + 1.0 / k);
  const InverseWeightReport rep = inverse_weight_convergence(mesh, seq);
  const double final_l1 = rep.l1_distance.back();
  return {final_l1 <= 1e-3 && rep.max_pairing_error_rel <= 1e-12,
          fmt("final L1 inverse distance %.3e, max relative pairing error %.2e", final_l1,
              rep.max_pairing_error_rel)};
}

// 9. Boundedness witness on the reference run.
Outcome boundedness() {
  if (!g_reference) return {false, "reference run unavailable"};
  const TauReport rep = tau_boundedness_report(g_reference->trace);
  return {rep.sups_finite && rep.l1_tail <= 1e-4,
          fmt("sup bv %.4f, sup |y| %.4f, sup weighted grad %.4f, L1 tail %.2e", rep.sup_bv_norm,
              rep.sup_l2_y, rep.sup_weighted_grad, rep.l1_tail)};
}

// 10. Byte-identical traces from repeated CLI runs of the same config.
Outcome determinism() {
  std::string tmpl = (fs::temp_directory_path() / "wopt_gate_XXXXXX").string();
  const char* base = mkdtemp(tmpl.data());
  if (!base) return {false, "mkdtemp failed"};
  const std::string cfg = std::string(WOPT_CONFIG_DIR) + "/reference_8x8.ini";
  const std::string cmd = std::string(WOPT_CLI_PATH) + " optimize --config " + cfg + " --out ";
  const auto a = oracle::run_command(cmd + base + "/a");
  const auto b = oracle::run_command(cmd + base + "/b");
  Outcome out;
  if (a.exit_code != 0 || b.exit_code != 0) {
    out = {false, fmt("exit codes %d / %d", a.exit_code, b.exit_code)};
  } else {
    const std::string ta = read_file(std::string(base) + "/a/trace.csv");
    const std::string tb = read_file(std::string(base) + "/b/trace.csv");
    const std::string ra = read_file(std::string(base) + "/a/rho_star.csv");
    const std::string rb = read_file(std::string(base) + "/b/rho_star.csv");
    out = {ta == tb && ra == rb,
           fmt("trace %zu bytes, weights %zu bytes, both runs %s", ta.size(), ra.size(),
               ta == tb && ra == rb ? "identical" : "DIFFER")};
  }
  std::error_code ec;
  fs::remove_all(base, ec);
  return out;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {"MMS L2 convergence order >= 1.85, Dirichlet and mixed, within 60 s", mms_convergence},
      {"weak-form identity within 1e-9 |f||phi| on every solved instance", weak_form_identity},
      {"relative energy gap <= 1e-9 across the weight/mesh matrix", energy_equality},
      {"embedding bounds lhs <= rhs on 100 random pairs", embedding},
      {"reduced gradient matches central differences within 1e-4, within 120 s", gradient_fd},
      {"projection matches active-set enumeration within 1e-8", projection_oracle},
      {"reference descent monotone, feasible, displacement <= 1e-6, certified pair",
       descent_feasibility},
      {"1 + 1/k family: L1 inverse distance <= 1e-3, pairing identity to 1e-12", variable_space},
      {"boundedness report: finite sups, L1 tail <= 1e-4 over the kept window", boundedness},
      {"repeated optimize runs with one config and seed are byte-identical", determinism},
  };
  int failures = 0;
  int id = 0;
  for (const Entry& e : entries) {
    ++id;
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    std::printf("[%s] criterion %2d: %s (%s)\n", out.pass ? "PASS" : "FAIL", id, e.name,
                out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  if (failures == 0) {
    std::printf("all 10 criteria passed\n");
    return 0;
  }
  std::printf("%d of 10 criteria failed\n", failures);
  return 1;
}
