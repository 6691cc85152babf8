#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wopt/diagnostics.hpp"
#include "wopt/fields.hpp"
#include "wopt/mesh.hpp"
#include "wopt/optimizer.hpp"

namespace wopt {

/// Shortest round-trippable decimal form (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path + " for reading");
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV.
// ---------------------------------------------------------------------------

inline void write_weight_csv(const std::string& path, const WeightField& rho) {
  auto out = detail::open_out(path);
  out << "cell_index,value\n";
  for (std::size_t c = 0; c < rho.size(); ++c)
    out << c << ',' << format_double(rho[c]) << '\n';
}

/// Read a weight CSV written by write_weight_csv; values round-trip
/// bit-identically through the 17-digit format.
inline WeightField read_weight_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("cell_index,", 0) != 0)
    throw std::runtime_error(path + ": missing weight CSV header");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path + ": malformed row: " + line);
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  WeightField rho(values.size());
  rho.values = std::move(values);
  return rho;
}

inline void write_solution_csv(const std::string& path, const Mesh& mesh, const NodalField& y) {
  auto out = detail::open_out(path);
  out << "vertex_index,x,y,value\n";
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
    out << v << ',' << format_double(mesh.vertices[v].x) << ','
        << format_double(mesh.vertices[v].y) << ',' << format_double(y[v]) << '\n';
}

inline void write_trace_csv(const std::string& path, const OptimizeTrace& trace) {
  auto out = detail::open_out(path);
  out << "iteration,tracking,energy,tv,total,step,displacement,bv_norm,l2_y,wgrad_y,mass,"
         "bound_violation,cg_state,cg_adjoint\n";
  for (const auto& r : trace.records)
    out << r.iteration << ',' << format_double(r.cost.tracking) << ','
        << format_double(r.cost.weighted_energy) << ',' << format_double(r.cost.tv) << ','
        << format_double(r.cost.total) << ',' << format_double(r.step) << ','
        << format_double(r.displacement) << ',' << format_double(r.bv_norm) << ','
        << format_double(r.l2_y) << ',' << format_double(r.wgrad_y) << ','
        << format_double(r.mass) << ',' << format_double(r.bound_violation) << ','
        << r.cg_state << ',' << r.cg_adjoint << '\n';
}

inline void write_tau_report_csv(const std::string& path, const TauReport& rep) {
  auto out = detail::open_out(path);
  out << "sup_bv_norm,sup_l2_y,sup_weighted_grad,l1_tail,max_mass_violation,"
         "max_bound_violation,sups_finite,tail_within_tol,feasible,bounded\n";
  out << format_double(rep.sup_bv_norm) << ',' << format_double(rep.sup_l2_y) << ','
      << format_double(rep.sup_weighted_grad) << ',' << format_double(rep.l1_tail) << ','
      << format_double(rep.max_mass_violation) << ',' << format_double(rep.max_bound_violation)
      << ',' << rep.sups_finite << ',' << rep.tail_within_tol << ',' << rep.feasible << ','
      << rep.bounded << '\n';
}

inline void write_inverse_report_csv(const std::string& path, const InverseWeightReport& rep) {
  auto out = detail::open_out(path);
  out << "k,l1_distance,variable_norm";
  for (const auto& name : rep.battery_names) out << ",pairing_error_" << name;
  out << '\n';
  for (std::size_t k = 0; k < rep.l1_distance.size(); ++k) {
    out << k << ',' << format_double(rep.l1_distance[k]) << ','
        << format_double(rep.variable_norm[k]);
    for (double e : rep.pairing_error[k]) out << ',' << format_double(e);
    out << '\n';
  }
}

inline void write_inverse_summary_csv(const std::string& path, const InverseWeightReport& rep) {
  auto out = detail::open_out(path);
  out << "target,max_pairing_error_rel,sup_cell_inverse_mass";
  for (double l : rep.lambda_grid) out << ",tail_" << format_double(l);
  out << '\n';
  out << format_double(rep.target) << ',' << format_double(rep.max_pairing_error_rel) << ','
      << format_double(rep.sup_cell_inverse_mass);
  for (double t : rep.tail_integrals) out << ',' << format_double(t);
  out << '\n';
}

inline void write_lsc_report_csv(const std::string& path, const LscReport& rep) {
  auto out = detail::open_out(path);
  out << "k,tv,running_liminf\n";
  for (std::size_t k = 0; k < rep.tv_k.size(); ++k)
    out << k << ',' << format_double(rep.tv_k[k]) << ',' << format_double(rep.running_liminf[k])
        << '\n';
}

inline void write_lsc_summary_csv(const std::string& path, const LscReport& rep) {
  auto out = detail::open_out(path);
  out << "tv_limit,liminf_estimate,gap,violation\n";
  out << format_double(rep.tv_limit) << ',' << format_double(rep.liminf_estimate) << ','
      << format_double(rep.gap) << ',' << rep.violation << '\n';
}

// ---------------------------------------------------------------------------
// Legacy ASCII VTK.
// ---------------------------------------------------------------------------

/// Unstructured-grid export: mesh geometry, point scalars (y, optionally p),
/// cell scalar rho when given. Legacy ASCII for maximal viewer compatibility.
inline void write_vtk(const std::string& path, const Mesh& mesh, const NodalField* y,
                      const NodalField* p, const WeightField* rho,
                      const std::string& title = "wopt output") {
  auto out = detail::open_out(path);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertex_count() << " double\n";
  for (const auto& v : mesh.vertices)
    out << format_double(v.x) << ' ' << format_double(v.y) << " 0\n";
  out << "CELLS " << mesh.cell_count() << ' ' << 4 * mesh.cell_count() << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << mesh.cell_count() << '\n';
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) out << "5\n";

  const auto scalars = [&out](const char* name, const std::vector<double>& vals) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : vals) out << format_double(v) << '\n';
  };
  if (y || p) {
    out << "POINT_DATA " << mesh.vertex_count() << '\n';
    if (y) scalars("y", y->values);
    if (p) scalars("p", p->values);
  }
  if (rho) {
    out << "CELL_DATA " << mesh.cell_count() << '\n';
    scalars("rho", rho->values);
  }
}

// ---------------------------------------------------------------------------
// Manifest.
// ---------------------------------------------------------------------------

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const std::string& path) {
  auto in = detail::open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace wopt
