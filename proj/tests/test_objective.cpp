#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wopt/mesh.hpp"
#include "wopt/objective.hpp"
#include "wopt/solver.hpp"

#include "support/oracles.hpp"

using namespace wopt;

namespace {

WeightField random_weight(const Mesh& m, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  WeightField rho(m.cell_count());
  for (std::size_t c = 0; c < m.cell_count(); ++c) rho[c] = dist(rng);
  return rho;
}

}  // namespace

TEST_CASE("cost of the zero pair is zero") {
  const Mesh m = build_structured_mesh(4, 4, Rect{}, BoundarySpec{});
  const auto b = cost(m, WeightField(m.cell_count(), 1.0), NodalField(m.vertex_count(), 0.0),
                      NodalField(m.vertex_count(), 0.0), 1e-6);
  CHECK(b.tracking == 0.0);
  CHECK(b.weighted_energy == 0.0);
  CHECK(b.tv == 0.0);
  CHECK(b.total == 0.0);
}

TEST_CASE("cost terms for y = x against zero data") {
  const Mesh m = build_structured_mesh(32, 32, Rect{}, BoundarySpec{});
  const auto yx = oracle::interpolate(m, [](double x, double) { return x; });
  const auto b = cost(m, WeightField(m.cell_count(), 1.0), yx,
                      NodalField(m.vertex_count(), 0.0), 0.0);
  CHECK(b.tracking == Catch::Approx(1.0 / 3.0));
  CHECK(b.weighted_energy == Catch::Approx(1.0));
  CHECK(b.tv == 0.0);
  CHECK(b.total == Catch::Approx(4.0 / 3.0));
}

TEST_CASE("cost total carries the weights") {
  const Mesh m = build_structured_mesh(5, 5, Rect{}, BoundarySpec{});
  std::mt19937_64 rng(3);
  const WeightField rho = random_weight(m, rng, 0.3, 2.0);
  const auto y = oracle::interpolate(m, [](double x, double t) { return x * t; });
  const auto y_d = oracle::interpolate(m, [](double x, double) { return 0.5 * x; });
  const CostWeights w{2.0, 0.5, 3.0};
  const auto b = cost(m, rho, y, y_d, 1e-4, w);
  CHECK(b.total ==
        Catch::Approx(2.0 * b.tracking + 0.5 * b.weighted_energy + 3.0 * b.tv).epsilon(1e-14));
  CHECK(b.tracking > 0.0);
  CHECK(b.weighted_energy > 0.0);
  CHECK(b.tv > 0.0);
}

TEST_CASE("weighted energy term equals the stiffness quadratic form") {
  const Mesh m = build_structured_mesh(6, 4, Rect{}, BoundarySpec{});
  std::mt19937_64 rng(7);
  const WeightField rho = random_weight(m, rng, 0.2, 1.8);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  NodalField y(m.vertex_count());
  for (std::size_t v = 0; v < m.vertex_count(); ++v) y[v] = dist(rng);

  const auto sys = assemble_system(m, rho);
  const auto ky = sys.K_full.multiply(y.values);
  double quad = 0.0;
  for (std::size_t v = 0; v < m.vertex_count(); ++v) quad += y[v] * ky[v];

  const auto b = cost(m, rho, y, NodalField(m.vertex_count(), 0.0), 1e-6);
  CHECK(b.weighted_energy == Catch::Approx(quad).epsilon(1e-12));
}

TEST_CASE("adjoint of a perfectly tracked zero state is zero") {
  const Mesh m = build_structured_mesh(6, 6, Rect{}, BoundarySpec{});
  const WeightField rho(m.cell_count(), 1.0);
  const auto [p, report] = solve_adjoint(m, rho, NodalField(m.vertex_count(), 0.0),
                                         NodalField(m.vertex_count(), 0.0), 1e-12);
  for (std::size_t v = 0; v < m.vertex_count(); ++v) CHECK(p[v] == 0.0);
  CHECK(report.cg_iterations == 0);
}

TEST_CASE("adjoint system reuse matches the one-shot solve") {
  const Mesh m = build_structured_mesh(8, 8, Rect{}, BoundarySpec{});
  std::mt19937_64 rng(11);
  const WeightField rho = random_weight(m, rng, 0.4, 1.6);
  const NodalField f(m.vertex_count(), 1.0);
  const auto [y, sr] = solve_state(m, rho, f, 1e-12);
  const auto y_d = oracle::interpolate(m, [](double x, double t) { return 0.1 * x * t; });

  const auto sys = assemble_system(m, rho);
  const auto [p1, r1] = solve_adjoint_system(sys, m, y, y_d, 1e-12);
  const auto [p2, r2] = solve_adjoint(m, rho, y, y_d, 1e-12);
  for (std::size_t v = 0; v < m.vertex_count(); ++v) CHECK(p1[v] == p2[v]);
}

TEST_CASE("adjoint satisfies its own weak form") {
  const Mesh m = build_structured_mesh(10, 10, Rect{}, BoundarySpec{});
  std::mt19937_64 rng(13);
  const WeightField rho = random_weight(m, rng, 0.5, 1.5);
  const NodalField f(m.vertex_count(), 1.0);
  const auto [y, sr] = solve_state(m, rho, f, 1e-12);
  const auto y_d = oracle::interpolate(m, [](double x, double t) { return 0.2 * std::sin(x + t); });
  const CostWeights w{1.5, 0.75, 1.0};
  const auto sys = assemble_system(m, rho);
  const auto [p, pr] = solve_adjoint_system(sys, m, y, y_d, 1e-13, w);

  // For every admissible phi: a(p, phi) = -2 w_t (y - y_d, phi) - 2 w_e k(y, phi).
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    NodalField phi(m.vertex_count());
    for (std::size_t v = 0; v < m.vertex_count(); ++v) phi[v] = dist(rng);
    for (int v : m.dirichlet_vertices) phi[v] = 0.0;

    NodalField diff(m.vertex_count());
    for (std::size_t v = 0; v < m.vertex_count(); ++v) diff[v] = y[v] - y_d[v];
    const double lhs = weighted_grad_product(m, rho, p, phi) + l2_product(m, p, phi);
    const double rhs = -2.0 * w.tracking * l2_product(m, diff, phi) -
                       2.0 * w.energy * weighted_grad_product(m, rho, y, phi);
    CHECK(lhs == Catch::Approx(rhs).margin(1e-9 * (1.0 + std::abs(rhs))));
  }
}

TEST_CASE("reduced gradient of zero data is the TV gradient only") {
  const Mesh m = build_structured_mesh(4, 4, Rect{}, BoundarySpec{});
  std::mt19937_64 rng(17);
  const WeightField rho = random_weight(m, rng, 0.5, 1.5);
  const NodalField zero(m.vertex_count(), 0.0);
  const auto g = reduced_gradient(m, rho, zero, zero, 1e-3);
  const auto tv = discrete_tv_gradient(m, rho, 1e-3);
  REQUIRE(g.size() == tv.size());
  for (std::size_t c = 0; c < g.size(); ++c) CHECK(g[c] == tv[c]);

  const auto g_const = reduced_gradient(m, WeightField(m.cell_count(), 1.0), zero, zero, 1e-3);
  for (double v : g_const) CHECK(v == 0.0);
}

TEST_CASE("reduced gradient matches central finite differences") {
  const auto run_instance = [](int n, unsigned seed) {
    const BoundarySpec left_only{BoundaryTag::Dirichlet, BoundaryTag::Neumann,
                                 BoundaryTag::Neumann, BoundaryTag::Neumann};
    const Mesh m = build_structured_mesh(n, n, Rect{}, left_only);
    std::mt19937_64 rng(seed);
    const WeightField rho = random_weight(m, rng, 0.5, 1.5);
    const auto f = oracle::interpolate(m, [](double x, double) { return 1.0 + x; });
    const auto y_d =
        oracle::interpolate(m, [](double x, double t) { return 0.2 * std::sin(3.0 * x) * t; });
    const double eps = 1e-2, tol = 1e-13;

    const auto [y, sr] = solve_state(m, rho, f, tol);
    const auto [p, pr] = solve_adjoint(m, rho, y, y_d, tol);
    const auto g = reduced_gradient(m, rho, y, p, eps);

    const auto j_at = [&](const WeightField& r) {
      const auto [yy, rep] = solve_state(m, r, f, tol);
      return cost(m, r, yy, y_d, eps).total;
    };

    double max_rel = 0.0;
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    for (std::size_t c = 0; c < m.cell_count(); ++c) {
      const double h = 1e-6 * rho[c];
      WeightField r = rho;
      r[c] = rho[c] + h;
      const double jp = j_at(r);
      r[c] = rho[c] - h;
      const double jm = j_at(r);
      const double fd = (jp - jm) / (2.0 * h);
      const double denom = std::max(std::abs(fd), 1e-12 * std::max(scale, 1.0));
      max_rel = std::max(max_rel, std::abs(g[c] - fd) / denom);
    }
    return max_rel;
  };

  CHECK(run_instance(4, 101) <= 1e-5);
  CHECK(run_instance(4, 102) <= 1e-5);
}

TEST_CASE("doubling the load scales the PDE part of the gradient by four") {
  const Mesh m = build_structured_mesh(6, 6, Rect{}, BoundarySpec{});
  const WeightField rho(m.cell_count(), 1.0);  // constant, so the TV part is zero
  const NodalField zero(m.vertex_count(), 0.0);
  const auto f = oracle::interpolate(m, [](double x, double t) { return 1.0 + x * t; });
  NodalField f2(m.vertex_count());
  for (std::size_t v = 0; v < m.vertex_count(); ++v) f2[v] = 2.0 * f[v];

  const auto grad_for = [&](const NodalField& load) {
    const auto [y, sr] = solve_state(m, rho, load, 1e-13);
    const auto [p, pr] = solve_adjoint(m, rho, y, zero, 1e-13);
    return reduced_gradient(m, rho, y, p, 1e-6);
  };
  const auto g1 = grad_for(f);
  const auto g2 = grad_for(f2);
  for (std::size_t c = 0; c < m.cell_count(); ++c)
    CHECK(g2[c] == Catch::Approx(4.0 * g1[c]).margin(1e-10));
}

TEST_CASE("objective functions validate their inputs") {
  const Mesh m = build_structured_mesh(2, 2, Rect{}, BoundarySpec{});
  const WeightField rho(m.cell_count(), 1.0);
  const NodalField y(m.vertex_count(), 0.0);
  CHECK_THROWS_AS(cost(m, rho, NodalField(3), y, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(reduced_gradient(m, rho, y, NodalField(3), 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(reduced_gradient(m, WeightField(2), y, y, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(reduced_gradient(m, rho, y, y, 0.0), std::invalid_argument);
}
