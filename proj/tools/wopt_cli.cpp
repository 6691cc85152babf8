#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wopt/wopt.hpp"

namespace {

namespace fs = std::filesystem;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;  // overrides [output] directory when set
  int threads = 0;
  long seed = -1;  // overrides [optimizer] seed when >= 0
};

wopt::RunConfig load(const GlobalArgs& args) {
  wopt::RunConfig cfg = wopt::load_config(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed >= 0) cfg.opt.seed = args.seed;
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  return cfg;
}

std::string out_path(const wopt::RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

void write_manifest(const wopt::RunConfig& cfg, const GlobalArgs& args,
                    const std::string& command, double wall_time) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["config"] = args.config_path;
  m["config_hash"] = wopt::fnv1a_hex(wopt::read_file(args.config_path));
  m["version"] = WOPT_VERSION;
  m["threads"] = args.threads;
  m["seed"] = cfg.opt.seed;
  m["wall_time_seconds"] = wall_time;
  std::ofstream out(out_path(cfg, "manifest.json"));
  out << m.dump(2) << "\n";
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int cmd_solve(const GlobalArgs& args) {
  const Timer timer;
  const wopt::RunConfig cfg = load(args);
  const wopt::Mesh mesh = cfg.make_mesh();
  const wopt::WeightField rho = cfg.solve_weight(mesh);
  const wopt::NodalField f = cfg.nodal_field(mesh, cfg.f_expr);
  const wopt::NodalField y_d = cfg.nodal_field(mesh, cfg.yd_expr);

  auto [y, report] = wopt::solve_state(mesh, rho, f, cfg.opt.solver_tol, args.threads);

  wopt::NodalField diff(mesh.vertex_count());
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) diff[v] = y[v] - y_d[v];
  const double l2_err = wopt::l2_norm(mesh, diff);

  if (cfg.format_csv) wopt::write_solution_csv(out_path(cfg, "y.csv"), mesh, y);
  if (cfg.format_vtk) wopt::write_vtk(out_path(cfg, "solution.vtk"), mesh, &y, nullptr, &rho);

  std::cout << "cg_iterations = " << report.cg_iterations << "\n"
            << "final_residual = " << wopt::format_double(report.final_residual) << "\n"
            << "energy_gap = " << wopt::format_double(report.energy_gap) << "\n"
            << "l2_error_vs_yd = " << wopt::format_double(l2_err) << "\n"
            << "wall_time = " << wopt::format_double(report.wall_time) << "\n";
  write_manifest(cfg, args, "solve", timer.seconds());
  return 0;
}

int cmd_optimize(const GlobalArgs& args) {
  const Timer timer;
  const wopt::RunConfig cfg = load(args);
  const wopt::Mesh mesh = cfg.make_mesh();
  const wopt::AdmissibleSet set = cfg.make_admissible(mesh);
  const wopt::NodalField f = cfg.nodal_field(mesh, cfg.f_expr);
  const wopt::NodalField y_d = cfg.nodal_field(mesh, cfg.yd_expr);

  wopt::WeightField rho0(mesh.cell_count(), set.mass / mesh.total_area());

  wopt::OptimizeTrace trace;
  wopt::WeightField rho_star(mesh.cell_count());
  wopt::NodalField y_star(mesh.vertex_count());
  bool stalled = false;
  try {
    auto result = wopt::optimize(mesh, set, f, y_d, rho0, cfg.opt, args.threads);
    rho_star = std::move(std::get<0>(result));
    y_star = std::move(std::get<1>(result));
    trace = std::move(std::get<2>(result));
  } catch (const wopt::stalled_progress& e) {
    std::cerr << "error: " << e.what() << "\n";
    trace = e.trace;
    stalled = true;
  }

  if (cfg.format_csv) {
    wopt::write_trace_csv(out_path(cfg, "trace.csv"), trace);
    if (!stalled) {
      wopt::write_weight_csv(out_path(cfg, "rho_star.csv"), rho_star);
      wopt::write_solution_csv(out_path(cfg, "y_star.csv"), mesh, y_star);
    }
    if (!trace.records.empty())
      wopt::write_tau_report_csv(out_path(cfg, "tau_report.csv"),
                                 wopt::tau_boundedness_report(trace));
  }
  if (stalled) {
    write_manifest(cfg, args, "optimize", timer.seconds());
    return 3;
  }
  if (cfg.format_vtk) {
    auto [p, rep] =
        wopt::solve_adjoint(mesh, rho_star, y_star, y_d, cfg.opt.solver_tol, cfg.opt.weights);
    wopt::write_vtk(out_path(cfg, "solution.vtk"), mesh, &y_star, &p, &rho_star);
  }

  const auto& final_rec = trace.records.back();
  std::cout << "iterations = " << final_rec.iteration << "\n"
            << "converged = " << (trace.converged ? 1 : 0) << "\n"
            << "tracking = " << wopt::format_double(final_rec.cost.tracking) << "\n"
            << "energy = " << wopt::format_double(final_rec.cost.weighted_energy) << "\n"
            << "tv = " << wopt::format_double(final_rec.cost.tv) << "\n"
            << "total = " << wopt::format_double(final_rec.cost.total) << "\n"
            << "displacement = " << wopt::format_double(final_rec.displacement) << "\n";
  write_manifest(cfg, args, "optimize", timer.seconds());
  return 0;
}

int cmd_gradcheck(const GlobalArgs& args, bool corrupt) {
  const Timer timer;
  const wopt::RunConfig cfg = load(args);
  if (cfg.nx > 16 || cfg.ny > 16) {
    std::cerr << "error: gradcheck is limited to meshes up to 16x16 (got " << cfg.nx << "x"
              << cfg.ny << ")\n";
    return 1;
  }
  const wopt::Mesh mesh = cfg.make_mesh();
  const wopt::AdmissibleSet set = cfg.make_admissible(mesh);
  const wopt::NodalField f = cfg.nodal_field(mesh, cfg.f_expr);
  const wopt::NodalField y_d = cfg.nodal_field(mesh, cfg.yd_expr);

  std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.opt.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  wopt::WeightField rho(mesh.cell_count());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c)
    rho[c] = set.xi1[c] + unit(rng) * (set.xi2[c] - set.xi1[c]);

  const auto reduced_cost = [&](const wopt::WeightField& r) {
    auto [y, rep] = wopt::solve_state(mesh, r, f, cfg.opt.solver_tol, args.threads);
    return wopt::cost(mesh, r, y, y_d, cfg.opt.tv_eps, cfg.opt.weights).total;
  };

  auto [y, rep] = wopt::solve_state(mesh, rho, f, cfg.opt.solver_tol, args.threads);
  auto [p, arep] =
      wopt::solve_adjoint(mesh, rho, y, y_d, cfg.opt.solver_tol, cfg.opt.weights);
  auto grad = wopt::reduced_gradient(mesh, rho, y, p, cfg.opt.tv_eps, cfg.opt.weights);
  if (corrupt) grad[0] += 1e-2 * (1.0 + std::abs(grad[0]));

  std::vector<double> fd(mesh.cell_count());
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const double h = 1e-6 * rho[c];
    wopt::WeightField r = rho;
    r[c] = rho[c] + h;
    const double jp = reduced_cost(r);
    r[c] = rho[c] - h;
    const double jm = reduced_cost(r);
    fd[c] = (jp - jm) / (2.0 * h);
  }

  double scale = 0.0;
  for (double g : fd) scale = std::max(scale, std::abs(g));
  double worst = 0.0;
  std::size_t worst_cell = 0;
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const double denom = std::max(std::abs(fd[c]), 1e-12 * std::max(scale, 1.0));
    const double rel = std::abs(grad[c] - fd[c]) / denom;
    if (rel > worst) {
      worst = rel;
      worst_cell = c;
    }
  }

  std::cout << "max_rel_error = " << wopt::format_double(worst) << "\n"
            << "worst_cell = " << worst_cell << "\n";
  write_manifest(cfg, args, "gradcheck", timer.seconds());
  if (worst <= 1e-4) return 0;
  std::cerr << "error: gradient mismatch at cell " << worst_cell << ": adjoint "
            << wopt::format_double(grad[worst_cell]) << " vs finite-difference "
            << wopt::format_double(fd[worst_cell]) << "\n";
  return 2;
}

int cmd_diagnose(const GlobalArgs& args, const std::string& sequence_spec) {
  const Timer timer;
  const wopt::RunConfig cfg = load(args);
  const wopt::Mesh mesh = cfg.make_mesh();

  wopt::WeightSequence seq;
  if (sequence_spec.rfind("one_over_k:K=", 0) == 0) {
    const long k_max = std::stol(sequence_spec.substr(std::string("one_over_k:K=").size()));
    if (k_max < 1) {
      std::cerr << "error: K must be positive in " << sequence_spec << "\n";
      return 1;
    }
    for (long k = 1; k <= k_max; ++k)
      seq.fields.emplace_back(mesh.cell_count(), 1.0 + 1.0 / double(k));
    seq.limit = wopt::WeightField(mesh.cell_count(), 1.0);
  } else if (sequence_spec.rfind("dir:", 0) == 0) {
    const fs::path dir(sequence_spec.substr(4));
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("weight", 0) == 0 && name.size() > 4 &&
          name.substr(name.size() - 4) == ".csv")
        files.push_back(entry.path());
    }
    if (ec) {
      std::cerr << "error: cannot read sequence directory " << dir << "\n";
      return 1;
    }
    std::sort(files.begin(), files.end());
    if (files.empty() || !fs::exists(dir / "limit.csv")) {
      std::cerr << "error: " << dir << " must contain weight*.csv files and limit.csv\n";
      return 1;
    }
    for (const auto& file : files) seq.fields.push_back(wopt::read_weight_csv(file.string()));
    seq.limit = wopt::read_weight_csv((dir / "limit.csv").string());
  } else {
    std::cerr << "error: sequence must be one_over_k:K=N or dir:PATH, got \"" << sequence_spec
              << "\"\n";
    return 1;
  }

  const auto inverse = wopt::inverse_weight_convergence(mesh, seq);
  const auto lsc = wopt::lsc_witness(mesh, seq);
  wopt::write_inverse_report_csv(out_path(cfg, "inverse_report.csv"), inverse);
  wopt::write_inverse_summary_csv(out_path(cfg, "inverse_summary.csv"), inverse);
  wopt::write_lsc_report_csv(out_path(cfg, "lsc_report.csv"), lsc);
  wopt::write_lsc_summary_csv(out_path(cfg, "lsc_summary.csv"), lsc);

  std::cout << "final_l1_distance = " << wopt::format_double(inverse.l1_distance.back()) << "\n"
            << "max_pairing_error_rel = " << wopt::format_double(inverse.max_pairing_error_rel)
            << "\n"
            << "tv_limit = " << wopt::format_double(lsc.tv_limit) << "\n"
            << "liminf_estimate = " << wopt::format_double(lsc.liminf_estimate) << "\n"
            << "lsc_violation = " << (lsc.violation ? 1 : 0) << "\n";
  write_manifest(cfg, args, "diagnose", timer.seconds());
  return 0;
}

int cmd_project(const GlobalArgs& args, const std::string& g_path) {
  const Timer timer;
  const wopt::RunConfig cfg = load(args);
  const wopt::Mesh mesh = cfg.make_mesh();
  const wopt::AdmissibleSet set = cfg.make_admissible(mesh);

  std::vector<double> g;
  if (!g_path.empty()) {
    const wopt::WeightField in = wopt::read_weight_csv(g_path);
    if (in.size() != mesh.cell_count()) {
      std::cerr << "error: " << g_path << " has " << in.size() << " cells, mesh has "
                << mesh.cell_count() << "\n";
      return 1;
    }
    g = in.values;
  } else {
    g = cfg.cell_field(mesh, cfg.rho_expr);
  }

  const wopt::WeightField rho = wopt::project_admissible(mesh, g, set);
  wopt::write_weight_csv(out_path(cfg, "projected.csv"), rho);
  std::cout << "mass = " << wopt::format_double(wopt::mass(mesh, rho)) << "\n"
            << "target_mass = " << wopt::format_double(set.mass) << "\n";
  write_manifest(cfg, args, "project", timer.seconds());
  return 0;
}

int cmd_mesh_info(const GlobalArgs& args) {
  const Timer timer;
  const wopt::RunConfig cfg = load(args);
  const wopt::Mesh mesh = cfg.make_mesh();
  std::cout << wopt::mesh_summary(mesh, &cfg.boundary);
  write_manifest(cfg, args, "mesh-info", timer.seconds());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weight-optimization toolkit for the TV-regularized elliptic control problem"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs args;
  app.add_option("--config", args.config_path, "Path to the INI run configuration")
      ->required()
      ->group("Global");
  app.add_option("--out", args.out_dir, "Output directory (overrides [output] directory)")
      ->group("Global");
  app.add_option("--threads", args.threads, "Assembly threads, 0 = sequential reference mode")
      ->group("Global");
  app.add_option("--seed", args.seed, "Seed override for randomized initialization")
      ->group("Global");

  auto* solve = app.add_subcommand("solve", "Solve the state equation for the configured weight");
  auto* optimize = app.add_subcommand("optimize", "Run projected gradient descent");
  auto* gradcheck =
      app.add_subcommand("gradcheck", "Compare the adjoint gradient with finite differences");
  bool corrupt = false;
  gradcheck->add_flag("--corrupt-gradient", corrupt, "Corrupt the gradient (failure-path test)")
      ->group("");
  auto* diagnose = app.add_subcommand("diagnose", "Variable-space convergence diagnostics");
  std::string sequence_spec;
  diagnose->add_option("--sequence", sequence_spec, "one_over_k:K=N or dir:PATH")->required();
  auto* project = app.add_subcommand("project", "Project a cell field onto the admissible set");
  std::string g_path;
  project->add_option("--g", g_path, "Weight CSV to project (default: the configured rho)");
  auto* mesh_info = app.add_subcommand("mesh-info", "Print a mesh summary");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(args);
    if (optimize->parsed()) return cmd_optimize(args);
    if (gradcheck->parsed()) return cmd_gradcheck(args, corrupt);
    if (diagnose->parsed()) return cmd_diagnose(args, sequence_spec);
    if (project->parsed()) return cmd_project(args, g_path);
    if (mesh_info->parsed()) return cmd_mesh_info(args);
  } catch (const wopt::solver_failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wopt::infeasible_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
