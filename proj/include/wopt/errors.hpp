#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wopt {

/// Admissible set cannot contain any weight field (bounds or mass inconsistent).
class infeasible_error : public std::runtime_error {
 public:
  explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative linear solve did not reach the requested tolerance.
/// Carries the per-iteration relative residual history.
class solver_failure : public std::runtime_error {
 public:
  solver_failure(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}

  std::vector<double> residual_history;
};

}  // namespace wopt
