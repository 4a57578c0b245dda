#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "afem/adapt.hpp"
#include "afem/mesh.hpp"
#include "afem/problem.hpp"
#include "afem/verify.hpp"
#include "doctest.h"

using namespace afem;

namespace {

Mesh single_triangle() { return Mesh::make_initial({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}); }

// Brute force: every other element sharing a vertex coordinate.
std::vector<int> brute_neighbors(const Mesh& m, int e) {
  std::vector<int> out;
  for (int o = 0; o < static_cast<int>(m.num_elements()); ++o) {
    if (o == e) continue;
    bool share = false;
    for (int a : m.element(e).v)
      for (int b : m.element(o).v) share |= a == b;
    if (share) out.push_back(o);
  }
  return out;
}

bool point_in_triangle(Point p, const std::array<Point, 3>& c) {
  const double tol = 1e-14;
  const double d0 = cross(c[1] - c[0], p - c[0]);
  const double d1 = cross(c[2] - c[1], p - c[1]);
  const double d2 = cross(c[0] - c[2], p - c[2]);
  return d0 >= -tol && d1 >= -tol && d2 >= -tol;
}

}  // namespace

TEST_CASE("mesh_size") {
  const Mesh t = single_triangle();
  CHECK(mesh_size(t, 0) == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  const Mesh unit = Mesh::make_initial({{0, 0}, {2, 0}, {0, 1}}, {{0, 1, 2}});
  CHECK(mesh_size(unit, 0) == 1.0);
  const Mesh child = refine(unit, std::vector<int>{0});
  REQUIRE(child.num_elements() == 2);
  for (int e = 0; e < 2; ++e) CHECK(mesh_size(child, e) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK_THROWS_AS(mesh_size(t, 1), MeshError);
  CHECK_THROWS_AS(mesh_size(t, -1), MeshError);
}

TEST_CASE("neighbors and patch") {
  const Mesh sq = builtin::unit_square();
  CHECK(neighbors(sq, 0) == std::vector<int>{1});
  CHECK(neighbors(sq, 1) == std::vector<int>{0});
  CHECK(patch(sq, 0) == std::vector<int>{0, 1});

  const Mesh t = single_triangle();
  CHECK(neighbors(t, 0).empty());
  CHECK(patch(t, 0) == std::vector<int>{0});

  const Mesh grid = builtin::square_grid(4);
  REQUIRE(grid.num_elements() == 32);
  for (int e = 0; e < 32; ++e) {
    auto n = neighbors(grid, e);
    std::sort(n.begin(), n.end());
    CHECK(n == brute_neighbors(grid, e));
    const auto p = patch(grid, e);
    CHECK(std::binary_search(p.begin(), p.end(), e));
  }
  // interior element of the criss-cross-free grid: 12 vertex neighbors
  const int interior = 2 * (4 * 1 + 1);
  CHECK(brute_neighbors(grid, interior).size() == 12);
  CHECK_THROWS_AS(neighbors(grid, 32), MeshError);
}

TEST_CASE("refine: hand-traced cases") {
  const Mesh sq = builtin::unit_square();
  SUBCASE("mark one forces the neighbor") {
    const Mesh r = refine(sq, std::vector<int>{0});
    CHECK(r.num_elements() == 4);
    CHECK(check_conformity(r).ok);
    CHECK(r.num_vertices() == 5);
  }
  SUBCASE("empty mark is identity") {
    const Mesh r = refine(sq, std::vector<int>{});
    REQUIRE(r.num_elements() == sq.num_elements());
    for (int e = 0; e < 2; ++e) CHECK(r.element(e).v == sq.element(e).v);
  }
  SUBCASE("mark all doubles") {
    Mesh m = builtin::lshape();
    for (int level = 0; level < 6; ++level) {
      std::vector<int> all(m.num_elements());
      for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
      const Mesh r = refine(m, all);
      CHECK(r.num_elements() == 2 * m.num_elements());
      m = r;
    }
  }
  SUBCASE("children convention") {
    const auto rr = refine_with_history(sq, std::vector<int>{0});
    // parent (v0,v1,v2) -> (v2,v0,m) and (v1,v2,m), newest vertex in slot 2
    const auto& p = sq.element(0).v;
    std::set<std::array<int, 3>> kids;
    for (int e = 0; e < static_cast<int>(rr.mesh.num_elements()); ++e)
      if (rr.parent[e] == 0) kids.insert(rr.mesh.element(e).v);
    REQUIRE(kids.size() == 2);
    const int m = 4;
    CHECK(kids.count({p[2], p[0], m}) == 1);
    CHECK(kids.count({p[1], p[2], m}) == 1);
    CHECK(rr.mesh.vertex(m).p.x == 0.5);
    CHECK(rr.mesh.vertex(m).p.y == 0.5);
    CHECK(rr.refined == std::vector<char>{1, 1});
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(refine(sq, std::vector<int>{5}), MeshError);
    CHECK_THROWS_AS(refine(sq, std::vector<int>{0}, 0), RefineError);
    // rejected before any bisection: depth beyond the lineage, or too many children
    CHECK_THROWS_AS(refine(sq, std::vector<int>{0}, Lineage::kMaxDepth + 1), RefineError);
    CHECK_THROWS_AS(refine(sq, std::vector<int>{0, 1}, 40), RefineError);
    CHECK(refine(sq, std::vector<int>{0}, 12).num_elements() >= 4096);
  }
}

TEST_CASE("refine: random sequences keep every invariant") {
  std::mt19937_64 rng(7);
  for (const Mesh& T0 : {builtin::unit_square(), builtin::lshape()}) {
    for (int n : {1, 2, 3}) {
      Mesh m = T0;
      for (int step = 0; step < 6; ++step) {
        std::vector<int> marked;
        std::bernoulli_distribution pick(0.2);
        for (int e = 0; e < static_cast<int>(m.num_elements()); ++e)
          if (pick(rng)) marked.push_back(e);
        if (marked.empty()) marked.push_back(0);
        const auto rr = refine_with_history(m, marked, n);
        const Mesh& out = rr.mesh;
        const auto conf = check_conformity(out);
        REQUIRE_MESSAGE(conf.ok, (conf.diagnostics.empty() ? "" : conf.diagnostics.front()));
        CHECK(std::abs(out.total_area() - T0.total_area()) <= 1e-12 * T0.total_area());

        std::vector<double> child_area(m.num_elements(), 0.0);
        for (int e = 0; e < static_cast<int>(out.num_elements()); ++e) {
          const int p = rr.parent[e];
          child_area[p] += out.area(e);
          CHECK(point_in_triangle(out.barycenter(e), m.corners(p)));
          const int dgen = out.element(e).generation - m.element(p).generation;
          CHECK(std::abs(out.area(e) - m.area(p) / std::ldexp(1.0, dgen)) <= 1e-14 * m.area(p));
        }
        for (int p = 0; p < static_cast<int>(m.num_elements()); ++p)
          CHECK(std::abs(child_area[p] - m.area(p)) <= 1e-13 * m.area(p));
        for (int e = 0; e < static_cast<int>(out.num_elements()); ++e) {
          const int p = rr.parent[e];
          if (std::find(marked.begin(), marked.end(), p) != marked.end())
            CHECK(out.element(e).generation >= m.element(p).generation + n);
        }
        m = out;
      }
    }
  }
}

TEST_CASE("overlay") {
  const Mesh T0 = builtin::lshape();
  std::mt19937_64 rng(11);
  const Mesh a = random_refinement(T0, 5, 0.3, rng);
  const Mesh b = random_refinement(T0, 5, 0.3, rng);

  SUBCASE("idempotent") {
    const Mesh o = overlay(a, a);
    CHECK(o.num_elements() == a.num_elements());
    CHECK(refines(o, a));
    CHECK(refines(a, o));
  }
  SUBCASE("initial mesh is neutral") {
    const Mesh o = overlay(T0, b);
    CHECK(o.num_elements() == b.num_elements());
    CHECK(refines(o, b));
  }
  SUBCASE("refines both, cardinality bound") {
    for (int pair = 0; pair < 20; ++pair) {
      const Mesh x = random_refinement(T0, 1 + pair % 5, 0.25, rng);
      const Mesh y = random_refinement(T0, 1 + (pair * 3) % 5, 0.25, rng);
      const Mesh o = overlay(x, y);
      CHECK(check_conformity(o).ok);
      CHECK(refines(o, x));
      CHECK(refines(o, y));
      CHECK(o.num_elements() + T0.num_elements() <= x.num_elements() + y.num_elements());
    }
  }
  SUBCASE("different families") {
    CHECK_THROWS_AS(overlay(a, builtin::lshape()), MeshError);
  }
}

TEST_CASE("check_conformity") {
  CHECK(check_conformity(builtin::unit_square()).ok);
  CHECK(check_conformity(builtin::lshape()).ok);
  // (1,0)-(0,1) of the left triangle carries the vertex (0.5,0.5) of the right pair
  const Mesh hanging = Mesh::make_initial({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0.5, 0.5}},
                                          {{0, 1, 2}, {1, 3, 4}, {4, 3, 2}});
  const auto rep = check_conformity(hanging);
  CHECK_FALSE(rep.ok);
  REQUIRE_FALSE(rep.diagnostics.empty());
  bool named = false;
  for (const auto& d : rep.diagnostics) named |= d.find("hanging vertex 4") != std::string::npos;
  CHECK(named);
}

TEST_CASE("make_initial validation") {
  CHECK_THROWS_AS(Mesh::make_initial({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}}), MeshError);
  CHECK_THROWS_AS(Mesh::make_initial({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 3}}), MeshError);
  CHECK_THROWS_AS(Mesh::make_initial({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 1}}), MeshError);
  CHECK_THROWS_AS(Mesh::make_initial({{0, 0}, {1, 0}, {0, NAN}}, {{0, 1, 2}}), MeshError);
}

TEST_CASE("boundary flags follow edge incidence") {
  std::mt19937_64 rng(3);
  const Mesh m = random_refinement(builtin::lshape(), 4, 0.3, rng);
  std::vector<char> on_edge(m.num_vertices(), 0);
  for (const auto& ed : m.edges())
    if (ed.boundary()) on_edge[ed.v[0]] = on_edge[ed.v[1]] = 1;
  for (int v = 0; v < static_cast<int>(m.num_vertices()); ++v) CHECK(m.vertex(v).on_boundary == bool(on_edge[v]));
}

TEST_CASE("shape_regularity") {
  CHECK(shape_regularity(single_triangle()) == doctest::Approx(2.0 + 2.0 * std::sqrt(2.0)).epsilon(1e-14));

  // Oracle: the similarity classes reached by uniform refinement up to depth 8.
  for (const Mesh& T0 : {builtin::unit_square(), builtin::lshape()}) {
    std::set<long long> classes;
    Mesh u = T0;
    for (int level = 0; level <= 8; ++level) {
      for (int e = 0; e < static_cast<int>(u.num_elements()); ++e)
        classes.insert(std::llround(element_shape_ratio(u, e) * 1e9));
      u = refine_uniform(u, 1);
    }
    CHECK(classes.size() <= 4);
    std::mt19937_64 rng(5);
    const Mesh r = random_refinement(T0, 12, 0.15, rng);
    for (int e = 0; e < static_cast<int>(r.num_elements()); ++e)
      CHECK(classes.count(std::llround(element_shape_ratio(r, e) * 1e9)) == 1);
  }
}

TEST_CASE("label compatibility probe") {
  CHECK(probe_label_compatibility(builtin::unit_square()));
  CHECK(probe_label_compatibility(builtin::lshape()));
  CHECK(probe_label_compatibility(builtin::square_grid(3)));
  // refinement edges: bottom edge for one half, diagonal for the other
  const Mesh bad = Mesh::make_initial({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}});
  CHECK_FALSE(probe_label_compatibility(bad));
}

TEST_CASE("complexity_audit") {
  CHECK_THROWS_AS(complexity_audit(std::vector<RefineStep>{}), MeshError);

  const Mesh sq = builtin::unit_square();
  const Mesh all = refine_uniform(sq, 1);
  std::vector<RefineStep> h{{sq.num_elements(), sq.num_elements()}, {all.num_elements(), 0}};
  auto audit = complexity_audit(h);
  REQUIRE(audit.c_s.has_value());
  CHECK(*audit.c_s <= 2.0);

  std::vector<RefineStep> idle{{2, 0}, {2, 0}};
  audit = complexity_audit(idle);
  CHECK_FALSE(audit.ratio[0].has_value());
  CHECK_FALSE(audit.c_s.has_value());

  AdaptConfig cfg;
  cfg.max_iters = 15;
  cfg.fit_constants = false;
  const ProblemSpec p = builtin_problem("poisson-lshape-singular");
  const RunResult r15 = run_loop(p, cfg);
  cfg.max_iters = 20;
  const RunResult r20 = run_loop(p, cfg);
  const auto a15 = complexity_audit(r15.refine_history), a20 = complexity_audit(r20.refine_history);
  REQUIRE(a15.c_s.has_value());
  REQUIRE(a20.c_s.has_value());
  CHECK(std::isfinite(*a15.c_s));
  CHECK(*a20.c_s <= 1.2 * *a15.c_s);
}
