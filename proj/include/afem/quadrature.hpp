#pragma once

#include <array>
#include <span>
#include <vector>

#include "afem/mesh.hpp"

namespace afem {

/// Rule on the reference triangle in barycentric coordinates; weights are
/// area-normalized (sum to 1).
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
  Point map(std::size_t q, const std::array<Point, 3>& tri) const {
    const auto& b = points[q];
    return b[0] * tri[0] + b[1] * tri[1] + b[2] * tri[2];
  }
};

/// Gauss rule on [0,1], weights sum to 1.
struct EdgeRule {
  std::vector<double> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
  Point map(std::size_t q, Point a, Point b) const { return a + points[q] * (b - a); }
};

/// 6-point rule exact for polynomials of degree 4.
const QuadratureRule& triangle_rule_deg4();
/// Centroid rule, degree 1.
const QuadratureRule& triangle_rule_deg1();
/// 3-point Gauss-Legendre, degree 5.
const EdgeRule& edge_rule_gauss3();

}  // namespace afem
