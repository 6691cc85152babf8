#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "wopt/errors.hpp"

namespace wopt {

/// Compressed sparse row matrix with a fixed pattern.
struct CsrMatrix {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<int> row_ptr;  // size n_rows + 1
  std::vector<int> col;      // ascending within each row
  std::vector<double> val;

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(n_rows, 0.0);
    for (int i = 0; i < n_rows; ++i) {
      double s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }

  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> y;
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n_rows, 0.0);
    for (int i = 0; i < n_rows; ++i)
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        if (col[k] == i) d[i] = val[k];
    return d;
  }

  double entry(int i, int j) const {
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      if (col[k] == j) return val[k];
    return 0.0;
  }
};

/// Iteration count, residual, and energy diagnostics of one linear solve.
struct SolveReport {
  int cg_iterations = 0;
  double final_residual = 0.0;  // relative 2-norm
  double energy_gap = 0.0;
  double wall_time = 0.0;  // seconds
};

/// Jacobi-preconditioned conjugate gradients for SPD systems.
/// Stops when ||b - A x||_2 <= tol * ||b||_2; throws solver_failure with the
/// residual history when the iteration cap (20 * n by default) is exceeded.
/// `x` carries the initial guess in and the solution out.
inline SolveReport pcg_solve(const CsrMatrix& A, const std::vector<double>& b,
                             std::vector<double>& x, double tol, int max_iters = -1) {
  if (!(tol > 0.0) || !(tol < 1.0)) throw std::invalid_argument("pcg_solve: tol must be in (0,1)");
  const int n = A.n_rows;
  if (int(b.size()) != n) throw std::invalid_argument("pcg_solve: rhs size mismatch");
  if (int(x.size()) != n) x.assign(n, 0.0);
  if (max_iters < 0) max_iters = 20 * n;

  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  SolveReport report;
  if (n == 0) return report;

  double b_norm = 0.0;
  for (double v : b) b_norm += v * v;
  b_norm = std::sqrt(b_norm);
  if (b_norm == 0.0) {
    x.assign(n, 0.0);
    report.wall_time = elapsed();
    return report;
  }

  std::vector<double> inv_diag(n);
  {
    const auto d = A.diagonal();
    for (int i = 0; i < n; ++i) {
      if (!(d[i] > 0.0)) throw std::invalid_argument("pcg_solve: nonpositive diagonal");
      inv_diag[i] = 1.0 / d[i];
    }
  }

  std::vector<double> r(n), z(n), p(n), Ap(n);
  A.multiply(x, Ap);
  for (int i = 0; i < n; ++i) r[i] = b[i] - Ap[i];

  double r_norm = 0.0;
  for (double v : r) r_norm += v * v;
  r_norm = std::sqrt(r_norm);

  std::vector<double> history;
  history.push_back(r_norm / b_norm);
  if (r_norm <= tol * b_norm) {
    report.final_residual = r_norm / b_norm;
    report.wall_time = elapsed();
    return report;
  }

  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = 0.0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];

  for (int it = 1; it <= max_iters; ++it) {
    A.multiply(p, Ap);
    double pAp = 0.0;
    for (int i = 0; i < n; ++i) pAp += p[i] * Ap[i];
    if (!(pAp > 0.0))
      throw solver_failure("pcg_solve: curvature not positive (matrix not SPD?)", history);
    const double alpha = rz / pAp;
    for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (int i = 0; i < n; ++i) r[i] -= alpha * Ap[i];

    r_norm = 0.0;
    for (double v : r) r_norm += v * v;
    r_norm = std::sqrt(r_norm);
    history.push_back(r_norm / b_norm);
    if (r_norm <= tol * b_norm) {
      report.cg_iterations = it;
      report.final_residual = r_norm / b_norm;
      report.wall_time = elapsed();
      return report;
    }

    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    double rz_next = 0.0;
    for (int i = 0; i < n; ++i) rz_next += r[i] * z[i];
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  throw solver_failure("pcg_solve: no convergence within " + std::to_string(max_iters) +
                           " iterations (relative residual " +
                           std::to_string(history.back()) + ")",
                       history);
}

}  // namespace wopt
