#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace wopt {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
/// Cross product z-component; twice the signed area of the triangle (0, a, b).
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

/// Continuous piecewise-linear scalar field: one value per mesh vertex.
struct NodalField {
  std::vector<double> values;

  NodalField() = default;
  explicit NodalField(std::size_t n, double fill = 0.0) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Piecewise-constant weight coefficient: one strictly positive value per cell.
struct WeightField {
  std::vector<double> values;

  WeightField() = default;
  explicit WeightField(std::size_t n, double fill = 0.0) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

}  // namespace wopt
