#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "afem/adapt.hpp"
#include "afem/verify.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace afem;
using namespace afem::test;

namespace {

// Smallest subset with mass >= theta^2 total, by brute force.
std::size_t brute_min_marked(const std::vector<double>& eta_sq, double theta) {
  const std::size_t n = eta_sq.size();
  double total = 0.0;
  for (double v : eta_sq) total += v;
  std::size_t best = n;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double mass = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        mass += eta_sq[i];
        ++count;
      }
    if (mass >= theta * theta * total) best = std::min(best, count);
  }
  return best;
}

AdaptRecord synthetic(int k, std::size_t elements, double energy, double eta) {
  AdaptRecord r;
  r.k = k;
  r.num_elements = elements;
  r.energy = energy;
  r.eta = eta;
  return r;
}

}  // namespace

TEST_CASE("dorfler marking") {
  const std::vector<double> v{16, 1, 1, 1, 1};
  CHECK(dorfler_mark(v, 0.5) == MarkedSet{0});
  CHECK(dorfler_mark(v, 0.95).size() == 4);
  CHECK(dorfler_mark(v, 0.99).size() == 5);
  CHECK(dorfler_mark(std::vector<double>{0, 0, 0}, 0.5).empty());
  // ties broken by id
  CHECK(dorfler_mark(std::vector<double>{1, 2, 2, 1}, 0.5) == MarkedSet{1});
  CHECK(dorfler_mark(std::vector<double>{1, 2, 2, 1}, 0.8) == MarkedSet{1, 2});

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(1, 10);
  for (int trial = 0; trial < 300; ++trial) {
    auto eta = random_vector(len(rng), rng, 0.0, 1.0);
    for (auto& x : eta) x *= x;
    const double theta = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const auto M = dorfler_mark(eta, theta);
    double total = 0.0, mass = 0.0;
    for (double x : eta) total += x;
    for (int e : M) mass += eta[e];
    CHECK(mass >= theta * theta * total);
    CHECK(M.size() == brute_min_marked(eta, theta));
  }
  const auto r = check_dorfler_exhaustive(200, 2);
  CHECK_MESSAGE(r.passed, r.detail);
}

TEST_CASE("adaptive steps") {
  const ProblemSpec p = builtin_problem("poisson-lshape-singular");
  AdaptConfig cfg;
  AdaptState st = initial_state(p, cfg);
  std::vector<AdaptRecord> records{make_record(p, st)};
  CHECK(records[0].k == 0);
  CHECK(std::isnan(records[0].du_sq));
  for (int i = 0; i < 5; ++i) {
    AdaptState next = adaptive_step(p, cfg, st, records);
    REQUIRE_FALSE(st.converged);
    CHECK(refines(*next.mesh, *st.mesh));
    CHECK(next.mesh->num_elements() > st.mesh->num_elements());
    CHECK(next.k == st.k + 1);
    CHECK(st.marked == dorfler_mark(st.report, cfg.theta));
    CHECK(next.report.eta() < st.report.eta());
    st = std::move(next);
  }
  REQUIRE(records.size() == 6);
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const auto& r = records[i];
    CHECK(std::isfinite(r.eta_sq_marked));
    CHECK(r.eta_sq_marked >= cfg.theta * cfg.theta * r.eta * r.eta * (1 - 1e-14));
    CHECK(r.eta_sq_refined >= r.eta_sq_marked);
    CHECK(std::isfinite(r.du_sq));
    CHECK(r.du_sq >= 0.0);
    CHECK(std::isfinite(r.osc_sq_common));
    CHECK(std::isfinite(r.osc_sq_common_next));
    CHECK(r.num_marked > 0);
    CHECK(std::isnan(r.h1_error));
    CHECK(records[i + 1].energy <= r.energy);
    CHECK(records[i + 1].energy <= r.energy_prolonged + 1e-12);
    CHECK(r.newton_energy_rise <= 8 * std::numeric_limits<double>::epsilon() * std::abs(r.energy));
  }
  CHECK(records[3].du_sq > 0.0);  // later steps only add boundary vertices
  CHECK(std::isnan(records.back().eta_sq_marked));

  SUBCASE("eta below tolerance stops") {
    AdaptConfig done = cfg;
    done.eta_tol = 1e9;
    const std::size_t before = records.size();
    const std::size_t elements = st.mesh->num_elements();
    const AdaptState same = adaptive_step(p, done, st, records);
    CHECK(st.converged);
    CHECK(same.mesh->num_elements() == elements);
    CHECK(records.size() == before);
  }
}

TEST_CASE("run_loop") {
  const ProblemSpec p = builtin_problem("chow-lshape-singular");
  AdaptConfig cfg;
  cfg.max_iters = 1;
  const RunResult none = run_loop(p, cfg);
  CHECK(none.records.size() == 1);

  cfg.max_iters = 11;
  cfg.max_elements = 3000;
  int sunk = 0;
  const RunResult r = run_loop(p, cfg, [&](const AdaptRecord& rec) { CHECK(rec.k == sunk++); });
  CHECK(sunk == static_cast<int>(r.records.size()));
  CHECK(r.records.size() == 11);
  CHECK(r.refine_history.size() == r.records.size());
  for (const auto& rec : r.records) {
    CHECK(std::isfinite(rec.eta));
    CHECK(std::isfinite(rec.energy));
    CHECK(std::isfinite(rec.q));
    CHECK(rec.q > 0.0);
  }
  CHECK(check_eta_decreasing(r.records).passed);
  CHECK(check_energy_monotone(r.records, 1e-12).passed);
  CHECK(check_solver_records(r.records, cfg.solver.newton_tol).passed);
  CHECK(r.constants.C_E > 0.0);
  CHECK(r.constants.rho < 1.0);
  CHECK(r.constants.F_ref < r.records.back().energy);

  AdaptConfig bad;
  bad.theta = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = AdaptConfig{};
  bad.max_iters = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(AdaptConfig{}.xi() == doctest::Approx(1.0 - std::sqrt(0.5)));
}

TEST_CASE("runs are deterministic") {
  const ProblemSpec p = builtin_problem("chow-lshape-singular");
  AdaptConfig cfg;
  cfg.max_iters = 6;
  const RunResult a = run_loop(p, cfg);
  cfg.exec = Exec::serial;
  const RunResult b = run_loop(p, cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].num_elements == b.records[i].num_elements);
    CHECK(a.records[i].eta == b.records[i].eta);
    CHECK(a.records[i].energy == b.records[i].energy);
  }
}

TEST_CASE("uniform mode refines every element") {
  AdaptConfig cfg;
  cfg.mode = Mode::uniform;
  cfg.max_iters = 3;
  const RunResult r = run_loop(builtin_problem("poisson-square"), cfg);
  for (std::size_t i = 1; i < r.records.size(); ++i) {
    CHECK(r.records[i].num_elements == 2 * r.records[i - 1].num_elements);
    CHECK(r.records[i - 1].num_marked == r.records[i - 1].num_elements);
  }
  CHECK(parse_mode("uniform") == Mode::uniform);
  CHECK(std::string(mode_name(Mode::adaptive)) == "adaptive");
  CHECK_THROWS_AS(parse_mode("random"), std::invalid_argument);
}

TEST_CASE("energy monotonicity uses the energy of U_k on the next mesh") {
  // F(U_1) is above F(U_0) as computed on T_0 but below U_0 evaluated on T_1
  std::vector<AdaptRecord> recs{synthetic(0, 2, -1.0, 1.0), synthetic(1, 4, -0.9, 0.5)};
  recs[0].energy_prolonged = -0.8;
  recs[1].energy_prolonged = std::numeric_limits<double>::quiet_NaN();
  CHECK(check_energy_monotone(recs, 0.0).passed);
  recs[0].energy_prolonged = -0.95;
  CHECK_FALSE(check_energy_monotone(recs, 0.0).passed);

  const ProblemSpec p = builtin_problem("chow-square-smooth");
  AdaptConfig cfg;
  cfg.max_iters = 12;
  const RunResult r = run_loop(p, cfg);
  const auto mono = check_energy_monotone(r.records, 1e-10);
  CHECK_MESSAGE(mono.passed, mono.detail);
  const auto solver = check_solver_records(r.records, cfg.solver.newton_tol);
  CHECK_MESSAGE(solver.passed, solver.detail);
  AdaptRecord rose = r.records.back();
  rose.newton_energy_rise = 1e-6;
  CHECK_FALSE(check_solver_records(std::vector<AdaptRecord>{rose}, cfg.solver.newton_tol).passed);
}

TEST_CASE("contraction check") {
  std::vector<AdaptRecord> flat;
  for (int k = 0; k < 4; ++k) flat.push_back(synthetic(k, 10 + k, 1.0, 1.0));
  const auto c = check_contraction(flat, 0.0, 1.0);
  CHECK(c.rho_hat == 1.0);
  CHECK_FALSE(c.passed);
  CHECK_THROWS_AS(check_contraction(flat, 3.0, 1.0), std::invalid_argument);

  std::vector<AdaptRecord> geometric;
  for (int k = 0; k < 5; ++k) geometric.push_back(synthetic(k, 10, std::pow(0.5, k), std::pow(0.5, 0.5 * k)));
  const auto g = check_contraction(geometric, 0.0, 1.0);
  CHECK(g.passed);
  CHECK(g.rho_hat == doctest::Approx(0.5));
  const auto sweep = sweep_mu(geometric, 0.0);
  CHECK(sweep.grid.size() == 17);
  CHECK(sweep.best.rho_hat == doctest::Approx(0.5));
}

TEST_CASE("quasi-orthogonality") {
  SUBCASE("linear problem: Pythagoras") {
    // every integral is exact for the polynomial problem
    const ProblemSpec p = builtin_problem("poisson-square-poly");
    const auto V = random_space(builtin::unit_square(), 6, 3);
    const auto U = solve_nonlinear(V, p, FeFunction(V), SolverConfig{}).U;
    const auto samples = random_functions(V, U, 10, 4, 0.1);
    const auto q = check_quasi_orthogonality(p, U, samples);
    CHECK(q.bound == doctest::Approx(1.0));
    CHECK(q.worst_ratio == doctest::Approx(1.0).epsilon(1e-10));
    const std::vector<FeFunction> self{U};
    CHECK(check_quasi_orthogonality(p, U, self).worst_ratio == doctest::Approx(1.0));
  }
  SUBCASE("chow") {
    const ProblemSpec p = builtin_problem("chow-square-smooth");
    const auto V = random_space(builtin::unit_square(), 6, 5);
    const auto U = solve_nonlinear(V, p, FeFunction(V), SolverConfig{}).U;
    const auto q = check_quasi_orthogonality(p, U, random_functions(V, U, 10, 6, 0.1));
    CHECK(q.passed);
    CHECK(q.bound == doctest::Approx(1.6));
    CHECK(q.worst_ratio <= 1.6);
  }
  CHECK_THROWS(check_quasi_orthogonality(builtin_problem("chow-lshape-singular"), FeFunction{}, {}));
}

TEST_CASE("optimal marking") {
  MarkingPair holds{0, 1, 1.0, 0.1, 1.0, 0.5};
  MarkingPair fails{0, 2, 1.0, 0.1, 1.0, 0.1};
  MarkingPair vacuous{1, 2, 1.0, 0.9, 1.0, 0.0};
  const std::vector<MarkingPair> pairs{holds, fails, vacuous};
  const auto r = check_optimal_marking(pairs, 0.5, 0.3);
  CHECK(r.checked == 2);
  CHECK(r.vacuous == 1);
  CHECK(r.failed == 1);
  CHECK_FALSE(r.passed());
  CHECK(r.log[1] == "(0,2) FAILS");
  CHECK(check_optimal_marking(std::vector<MarkingPair>{vacuous}, 0.5, 0.3).passed());

  EmpiricalConstants C;
  C.C_L = 0.5;
  C.C_LU = 1.0;
  C.C_E = 1.0;
  C.recompute(0.1);
  CHECK(C.theta0 == doctest::Approx(std::sqrt(0.1)));
  CHECK(C.nu == doctest::Approx(0.5 * (1 - 0.01 / 0.1)));
  C.recompute(0.5);
  CHECK(C.nu == 0.0);
}

TEST_CASE("marking pairs from a run") {
  const ProblemSpec p = builtin_problem("poisson-square");
  AdaptConfig cfg;
  cfg.max_iters = 5;
  cfg.keep_history = true;
  const RunResult r = run_loop(p, cfg);
  REQUIRE(r.history.size() == 5);
  const PairData d = marking_pairs(p, r.history);
  CHECK(d.pairs.size() == 10);
  CHECK(d.C_LU > 0.0);
  for (const auto& pr : d.pairs) {
    CHECK(pr.k < pr.p);
    CHECK(pr.eta_sq_refined <= pr.eta_sq_k * (1 + 1e-14));
    CHECK(pr.total_error_sq_p <= pr.total_error_sq_k);
  }
}

TEST_CASE("rate fits") {
  std::vector<double> x, q;
  for (int i = 1; i <= 20; ++i) {
    x.push_back(10.0 * i * i);
    q.push_back(3.0 * std::pow(x.back(), -0.75));
  }
  const RateFit f = fit_rate(x, q);
  CHECK(f.s_hat == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.points == 20);
  CHECK(fit_rate(x, q, 5).points == 5);
  q[3] = 0.0;
  CHECK_THROWS_AS(fit_rate(x, q), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);

  const std::vector<double> grow{0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048};
  CHECK(rate_tail(grow) == 8);
  CHECK(rate_tail(grow, 2) == 5);
  CHECK(rate_tail(grow, 2, 1000.0) == 10);
  CHECK(rate_tail(std::vector<double>{}) == 0);

  std::vector<AdaptRecord> recs;
  for (int k = 0; k < 12; ++k) {
    const double n = 100.0 * std::pow(1.5, k);
    recs.push_back(synthetic(k, static_cast<std::size_t>(n), 0.0, 0.0));
  }
  const double n0 = static_cast<double>(recs[0].num_elements);
  for (auto& r : recs) {
    const double xx = static_cast<double>(r.num_elements) - n0;
    r.energy = xx > 0 ? -2.0 + 5.0 / xx : 0.0;
  }
  CHECK(richardson_energy_limit(recs) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK_THROWS_AS(richardson_energy_limit(std::span(recs).first(2)), std::invalid_argument);

  const RateFit rf = fit_rate(recs, [](const AdaptRecord& r) { return std::pow(static_cast<double>(r.num_elements), -0.5); });
  CHECK(rf.points == 11);
  CHECK(rf.s_hat > 0.4);
}

TEST_CASE("aitken") {
  const std::vector<double> F{1.0 + 1.0, 1.0 + 0.5, 1.0 + 0.25};
  CHECK(aitken_limit(F).value() == doctest::Approx(1.0));
  CHECK_FALSE(aitken_limit(std::vector<double>{1, 2}).has_value());
  CHECK_FALSE(aitken_limit(std::vector<double>{1, 2, 3}).has_value());
  const ProblemSpec p = builtin_problem("poisson-square");
  CHECK(exact_energy(p, 7) == doctest::Approx(exact_energy(p, 8)).epsilon(1e-6));
}

TEST_CASE("cardinality") {
  std::vector<AdaptRecord> recs;
  for (int k = 0; k < 10; ++k) {
    AdaptRecord r = synthetic(k, 0, 0, 0);
    r.num_marked = static_cast<std::size_t>(10 * std::pow(2.0, k));
    r.h1_error = std::pow(2.0, -0.5 * k);
    r.osc = 0.0;
    recs.push_back(r);
  }
  const auto ok = check_cardinality(recs, 0.5);
  CHECK(ok.passed);
  for (double v : ok.values) CHECK(v == doctest::Approx(10.0));
  CHECK_FALSE(check_cardinality(recs, 1.0).passed);
}

TEST_CASE("refined_between") {
  const Mesh T0 = refine_uniform(builtin::unit_square(), 2);
  const MarkedSet marked{0, 3};
  const Mesh T1 = refine(T0, marked, 1);
  const auto gone = refined_between(T0, T1);
  CHECK(std::find(gone.begin(), gone.end(), 0) != gone.end());
  CHECK(std::find(gone.begin(), gone.end(), 3) != gone.end());
  CHECK(gone.size() < T0.num_elements());
  CHECK(refined_between(T0, T0).empty());
  CHECK(refined_between(T0, refine_uniform(T0, 1)).size() == T0.num_elements());
  CHECK_THROWS(refined_between(T0, builtin::lshape()));
}
