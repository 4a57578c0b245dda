#include <cmath>

#include "afem/quadrature.hpp"
#include "doctest.h"

using namespace afem;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// int over the unit right triangle of x^a y^b, divided by its area 1/2
double monomial_mean(int a, int b) { return 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2); }

double rule_mean(const QuadratureRule& r, const std::array<Point, 3>& tri, int a, int b) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    const Point x = r.map(q, tri);
    s += r.weights[q] * std::pow(x.x, a) * std::pow(x.y, b);
  }
  return s;
}

}  // namespace

TEST_CASE("triangle rules integrate monomials up to their degree") {
  const std::array<Point, 3> ref{Point{0, 0}, Point{1, 0}, Point{0, 1}};
  for (const QuadratureRule* r : {&triangle_rule_deg4(), &triangle_rule_deg1()}) {
    double wsum = 0.0;
    for (double w : r->weights) {
      CHECK(w > 0.0);
      wsum += w;
    }
    CHECK(std::abs(wsum - 1.0) <= 1e-15);
    for (const auto& b : r->points) CHECK(std::abs(b[0] + b[1] + b[2] - 1.0) <= 1e-15);
    for (int a = 0; a <= r->degree; ++a)
      for (int b = 0; a + b <= r->degree; ++b)
        CHECK(std::abs(rule_mean(*r, ref, a, b) - monomial_mean(a, b)) <= 1e-14);
  }
  CHECK(triangle_rule_deg4().degree == 4);
  CHECK(triangle_rule_deg4().size() == 6);
  // degree 5 is not integrated exactly
  double worst = 0.0;
  for (int a = 0; a <= 5; ++a) worst = std::max(worst, std::abs(rule_mean(triangle_rule_deg4(), ref, a, 5 - a) - monomial_mean(a, 5 - a)));
  CHECK(worst > 1e-6);
}

TEST_CASE("rules are affine invariant") {
  // mean of x^2 y over a general triangle against the same rule on its four
  // midpoint children
  const std::array<Point, 3> tri{Point{0.2, -0.1}, Point{1.3, 0.4}, Point{-0.2, 0.9}};
  const auto& r = triangle_rule_deg4();
  const double direct = rule_mean(r, tri, 2, 1);
  double sub = 0.0;
  const Point m01 = 0.5 * (tri[0] + tri[1]), m12 = 0.5 * (tri[1] + tri[2]), m20 = 0.5 * (tri[2] + tri[0]);
  for (const auto& t : {std::array<Point, 3>{tri[0], m01, m20}, std::array<Point, 3>{m01, tri[1], m12},
                        std::array<Point, 3>{m20, m12, tri[2]}, std::array<Point, 3>{m12, m20, m01}})
    sub += 0.25 * rule_mean(r, t, 2, 1);
  CHECK(std::abs(direct - sub) <= 1e-15);
}

TEST_CASE("edge rule") {
  const auto& e = edge_rule_gauss3();
  CHECK(e.degree == 5);
  REQUIRE(e.size() == 3);
  for (int k = 0; k <= 5; ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < e.size(); ++q) s += e.weights[q] * std::pow(e.points[q], k);
    CHECK(std::abs(s - 1.0 / (k + 1)) <= 1e-15);
  }
  const Point p = e.map(1, {0, 0}, {2, 4});
  CHECK(p.x == 1.0);
  CHECK(p.y == 2.0);
}
