#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wopt/control.hpp"
#include "wopt/expr.hpp"
#include "wopt/fields.hpp"
#include "wopt/mesh.hpp"
#include "wopt/optimizer.hpp"

namespace wopt {

/// Flat INI-style run description: mesh geometry and boundary tags, problem
/// data as expression strings, the admissible set, optimizer knobs, output
/// selection. Feasibility of the admissible set is checked at load.
struct RunConfig {
  int nx = 0, ny = 0;
  Rect rect{};
  BoundarySpec boundary{};

  std::string f_expr = "0";
  std::string yd_expr = "0";
  std::string rho_expr = "1";  // weight used by the plain state solve

  bool has_admissible = false;
  std::string xi1_expr, xi2_expr;
  double mass = 0.0;

  OptimizeConfig opt{};

  std::string out_dir = ".";
  bool format_csv = true;
  bool format_vtk = false;

  std::vector<std::string> warnings;

  Mesh make_mesh() const { return build_structured_mesh(nx, ny, rect, boundary); }

  NodalField nodal_field(const Mesh& mesh, const std::string& expr_text) const {
    const Expr e = parse_expression(expr_text);
    NodalField out(mesh.vertex_count());
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
      out[v] = e.eval(mesh.vertices[v].x, mesh.vertices[v].y);
    return out;
  }

  std::vector<double> cell_field(const Mesh& mesh, const std::string& expr_text) const {
    const Expr e = parse_expression(expr_text);
    std::vector<double> out(mesh.cell_count());
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
      const auto& t = mesh.triangles[c];
      const double cx =
          (mesh.vertices[t[0]].x + mesh.vertices[t[1]].x + mesh.vertices[t[2]].x) / 3.0;
      const double cy =
          (mesh.vertices[t[0]].y + mesh.vertices[t[1]].y + mesh.vertices[t[2]].y) / 3.0;
      out[c] = e.eval(cx, cy);
    }
    return out;
  }

  AdmissibleSet make_admissible(const Mesh& mesh) const {
    if (!has_admissible)
      throw std::invalid_argument("config: [admissible] section is required for this command");
    AdmissibleSet set;
    set.xi1 = cell_field(mesh, xi1_expr);
    set.xi2 = cell_field(mesh, xi2_expr);
    set.mass = mass;
    set.validate(mesh);
    return set;
  }

  WeightField solve_weight(const Mesh& mesh) const {
    WeightField rho(mesh.cell_count());
    rho.values = cell_field(mesh, rho_expr);
    for (double v : rho.values)
      if (!(v > 0.0))
        throw std::invalid_argument("config: rho expression must be positive on every cell");
    return rho;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

inline BoundaryTag parse_tag(const std::string& value, const std::string& key) {
  const std::string v = lower(value);
  if (v == "dirichlet") return BoundaryTag::Dirichlet;
  if (v == "neumann") return BoundaryTag::Neumann;
  throw std::invalid_argument("config: " + key + " must be dirichlet or neumann, got \"" + value +
                              "\"");
}

inline double parse_number(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (trim(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config: " + key + " must be a number, got \"" + value + "\"");
}

inline long parse_integer(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (trim(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config: " + key + " must be an integer, got \"" + value + "\"");
}

inline bool parse_bool(const std::string& value, const std::string& key) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " must be a boolean, got \"" + value + "\"");
}

}  // namespace detail

/// Parse an INI config file. Unknown sections or keys are hard errors, as is
/// an infeasible admissible set (checked against the discretized mesh).
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);

  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": malformed section");
      section = detail::lower(detail::trim(t.substr(1, t.size() - 2)));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": key outside a section");
    const std::string key = detail::lower(detail::trim(t.substr(0, eq)));
    sections[section][key] = detail::trim(t.substr(eq + 1));
  }

  RunConfig cfg;
  const auto take = [&](const std::string& sec, const std::string& key,
                        std::string* out) -> bool {
    auto s = sections.find(sec);
    if (s == sections.end()) return false;
    auto k = s->second.find(key);
    if (k == s->second.end()) return false;
    *out = k->second;
    s->second.erase(k);
    return true;
  };
  std::string v;

  if (!take("mesh", "nx", &v)) throw std::invalid_argument("config: [mesh] nx is required");
  cfg.nx = int(detail::parse_integer(v, "nx"));
  if (!take("mesh", "ny", &v)) throw std::invalid_argument("config: [mesh] ny is required");
  cfg.ny = int(detail::parse_integer(v, "ny"));
  if (take("mesh", "rect", &v)) {
    std::istringstream ss(v);
    if (!(ss >> cfg.rect.x0 >> cfg.rect.y0 >> cfg.rect.x1 >> cfg.rect.y1))
      throw std::invalid_argument("config: rect must be four numbers \"x0 y0 x1 y1\"");
    std::string rest;
    if (ss >> rest) throw std::invalid_argument("config: rect has trailing input");
  }
  if (take("mesh", "left", &v)) cfg.boundary.left = detail::parse_tag(v, "left");
  if (take("mesh", "right", &v)) cfg.boundary.right = detail::parse_tag(v, "right");
  if (take("mesh", "bottom", &v)) cfg.boundary.bottom = detail::parse_tag(v, "bottom");
  if (take("mesh", "top", &v)) cfg.boundary.top = detail::parse_tag(v, "top");
  if (take("mesh", "allow_pure_neumann", &v))
    cfg.boundary.allow_pure_neumann = detail::parse_bool(v, "allow_pure_neumann");

  take("problem", "f", &cfg.f_expr);
  take("problem", "y_d", &cfg.yd_expr);
  take("problem", "rho", &cfg.rho_expr);

  if (sections.count("admissible")) {
    cfg.has_admissible = true;
    if (!take("admissible", "xi1", &v))
      throw std::invalid_argument("config: [admissible] xi1 is required");
    cfg.xi1_expr = v;
    if (!take("admissible", "xi2", &v))
      throw std::invalid_argument("config: [admissible] xi2 is required");
    cfg.xi2_expr = v;
    if (!take("admissible", "mass", &v))
      throw std::invalid_argument("config: [admissible] mass is required");
    cfg.mass = detail::parse_number(v, "mass");
  }

  if (take("objective", "tracking_weight", &v))
    cfg.opt.weights.tracking = detail::parse_number(v, "tracking_weight");
  if (take("objective", "energy_weight", &v))
    cfg.opt.weights.energy = detail::parse_number(v, "energy_weight");
  if (take("objective", "tv_weight", &v))
    cfg.opt.weights.tv = detail::parse_number(v, "tv_weight");

  if (take("optimizer", "max_iters", &v))
    cfg.opt.max_iters = int(detail::parse_integer(v, "max_iters"));
  if (take("optimizer", "armijo_c", &v)) cfg.opt.armijo_c = detail::parse_number(v, "armijo_c");
  if (take("optimizer", "backtrack_factor", &v))
    cfg.opt.backtrack_factor = detail::parse_number(v, "backtrack_factor");
  if (take("optimizer", "initial_step", &v))
    cfg.opt.initial_step = detail::parse_number(v, "initial_step");
  if (take("optimizer", "grad_tol", &v)) cfg.opt.grad_tol = detail::parse_number(v, "grad_tol");
  bool saw_tv_eps = false;
  if (take("optimizer", "tv_eps", &v)) {
    cfg.opt.tv_eps = detail::parse_number(v, "tv_eps");
    saw_tv_eps = true;
  }
  if (take("optimizer", "solver_tol", &v))
    cfg.opt.solver_tol = detail::parse_number(v, "solver_tol");
  if (take("optimizer", "seed", &v)) cfg.opt.seed = detail::parse_integer(v, "seed");

  if (take("output", "directory", &v)) cfg.out_dir = v;
  if (take("output", "formats", &v)) {
    cfg.format_csv = false;
    cfg.format_vtk = false;
    std::istringstream ss(v);
    std::string fmt;
    while (std::getline(ss, fmt, ',')) {
      const std::string f = detail::lower(detail::trim(fmt));
      if (f == "csv") {
        cfg.format_csv = true;
      } else if (f == "vtk") {
        cfg.format_vtk = true;
      } else {
        throw std::invalid_argument("config: unknown output format \"" + f + "\"");
      }
    }
  }

  static const std::map<std::string, int> known = {{"mesh", 0},      {"problem", 0},
                                                   {"admissible", 0}, {"objective", 0},
                                                   {"optimizer", 0},  {"output", 0}};
  for (const auto& [sec, keys] : sections) {
    if (!known.count(sec)) throw std::invalid_argument("config: unknown section [" + sec + "]");
    if (!keys.empty())
      throw std::invalid_argument("config: unknown key \"" + keys.begin()->first + "\" in [" +
                                  sec + "]");
  }

  // Expressions must parse at load, not first use.
  parse_expression(cfg.f_expr);
  parse_expression(cfg.yd_expr);
  parse_expression(cfg.rho_expr);
  if (cfg.has_admissible) {
    parse_expression(cfg.xi1_expr);
    parse_expression(cfg.xi2_expr);
  }

  // Feasibility after discretization is a load-time contract.
  const Mesh mesh = cfg.make_mesh();
  if (cfg.has_admissible) {
    const AdmissibleSet set = cfg.make_admissible(mesh);
    if (set.min_xi1() < 1e-6)
      cfg.warnings.push_back(
          "xi1 below 1e-6: the state system is close to degenerate; solves may need many "
          "iterations");
    if (!saw_tv_eps) {
      double mean_xi2 = 0.0;
      for (double x : set.xi2) mean_xi2 += x;
      mean_xi2 /= double(set.xi2.size());
      cfg.opt.tv_eps = 1e-6 * mean_xi2;
    }
  }
  return cfg;
}

}  // namespace wopt
