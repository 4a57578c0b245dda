#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "afem/fem.hpp"
#include "afem/quadrature.hpp"
#include "afem/verify.hpp"

namespace afem::test {

/// Dense Poisson stiffness from edge vectors: K_ij = e_i . e_j / (4|T|),
/// e_i the edge opposite vertex i.
inline std::vector<double> dense_stiffness(const FeSpace& V) {
  const Mesh& m = V.mesh();
  const int n = V.num_dofs();
  std::vector<double> K(static_cast<std::size_t>(n) * n, 0.0);
  for (int e = 0; e < static_cast<int>(m.num_elements()); ++e) {
    const auto c = m.corners(e);
    const double area = 0.5 * cross(c[1] - c[0], c[2] - c[0]);
    Point edge[3];
    for (int i = 0; i < 3; ++i) edge[i] = c[(i + 2) % 3] - c[(i + 1) % 3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const int di = V.dof_of_vertex(m.element(e).v[i]), dj = V.dof_of_vertex(m.element(e).v[j]);
        if (di < 0 || dj < 0) continue;
        K[static_cast<std::size_t>(di) * n + dj] += dot(edge[i], edge[j]) / (4.0 * area);
      }
  }
  return K;
}

/// int f phi_i with the degree-4 rule applied on the four midpoint children.
inline std::vector<double> subdivided_load(const FeSpace& V, const std::function<double(Point)>& f) {
  const Mesh& m = V.mesh();
  std::vector<double> b(V.num_dofs(), 0.0);
  const auto& rule = triangle_rule_deg4();
  for (int e = 0; e < static_cast<int>(m.num_elements()); ++e) {
    const auto c = m.corners(e);
    const double area = m.area(e);
    using B = std::array<double, 3>;
    const B m01{0.5, 0.5, 0}, m12{0, 0.5, 0.5}, m20{0.5, 0, 0.5}, v0{1, 0, 0}, v1{0, 1, 0}, v2{0, 0, 1};
    const std::array<std::array<B, 3>, 4> kids{{{v0, m01, m20}, {m01, v1, m12}, {m20, m12, v2}, {m12, m20, m01}}};
    for (const auto& kid : kids)
      for (std::size_t q = 0; q < rule.size(); ++q) {
        B lam{};
        for (int k = 0; k < 3; ++k)
          for (int r = 0; r < 3; ++r) lam[r] += rule.points[q][k] * kid[k][r];
        const Point x = lam[0] * c[0] + lam[1] * c[1] + lam[2] * c[2];
        for (int i = 0; i < 3; ++i) {
          const int d = V.dof_of_vertex(m.element(e).v[i]);
          if (d >= 0) b[d] += 0.25 * area * rule.weights[q] * f(x) * lam[i];
        }
      }
  }
  return b;
}

inline std::vector<double> dense_apply(const std::vector<double>& A, const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += A[i * n + j] * x[j];
  return y;
}

inline double dense_quadratic(const std::vector<double>& A, const std::vector<double>& x) {
  const auto y = dense_apply(A, x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// A randomly refined mesh of the given domain and its space.
inline std::shared_ptr<const FeSpace> random_space(const Mesh& T0, int steps, std::uint64_t seed,
                                                   double fraction = 0.3) {
  std::mt19937_64 rng(seed);
  return build_space(std::make_shared<const Mesh>(random_refinement(T0, steps, fraction, rng)));
}

}  // namespace afem::test
