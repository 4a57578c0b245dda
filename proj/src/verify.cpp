#include "afem/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace afem {

namespace {

std::string g4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

CheckResult make(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok, false, std::move(detail)};
}

CheckResult skip(std::string name, std::string why) { return {std::move(name), true, true, std::move(why)}; }

std::vector<double> vertex_scale(const FeSpace& space) {
  const Mesh& m = space.mesh();
  std::vector<double> h(space.num_dofs());
  for (int d = 0; d < space.num_dofs(); ++d) {
    double area = 0.0;
    const auto els = m.vertex_elements(space.free_vertices()[d]);
    for (int e : els) area += m.area(e);
    h[d] = std::sqrt(area / els.size());
  }
  return h;
}

bool has_data(double v) { return std::isfinite(v); }

}  // namespace

Mesh random_refinement(const Mesh& mesh, int steps, double fraction, std::mt19937_64& rng) {
  Mesh m = mesh;
  std::bernoulli_distribution pick(fraction);
  for (int s = 0; s < steps; ++s) {
    MarkedSet marked;
    for (std::size_t e = 0; e < m.num_elements(); ++e)
      if (pick(rng)) marked.push_back(static_cast<int>(e));
    if (marked.empty()) marked.push_back(static_cast<int>(rng() % m.num_elements()));
    m = refine(m, marked, 1);
  }
  return m;
}

bool refines(const Mesh& fine, const Mesh& coarse) {
  if (fine.lineage_id() != coarse.lineage_id()) return false;
  std::unordered_set<Lineage, LineageHash> set;
  for (const auto& el : coarse.elements()) set.insert(el.lineage);
  for (const auto& el : fine.elements()) {
    bool found = false;
    for (int d = el.lineage.depth; d >= 0 && !found; --d) found = set.count(el.lineage.prefix(d)) > 0;
    if (!found) return false;
  }
  return true;
}

CheckResult check_refine_sequences(const Mesh& T0, int sequences, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick(0.3);
  std::uniform_int_distribution<int> nb(1, 2);
  int refines_done = 0;
  double worst_area = 0.0;
  for (int s = 0; s < sequences; ++s) {
    Mesh m = T0;
    for (int k = 0; k < steps; ++k) {
      MarkedSet marked;
      for (std::size_t e = 0; e < m.num_elements(); ++e)
        if (pick(rng)) marked.push_back(static_cast<int>(e));
      const int n = nb(rng);
      RefineResult rr = refine_with_history(m, marked, n);
      ++refines_done;
      auto conf = check_conformity(rr.mesh);
      if (!conf.ok) return make("refine-conformity", false, "non-conforming output: " + conf.diagnostics.front());
      std::vector<double> child_area(m.num_elements(), 0.0);
      for (std::size_t e = 0; e < rr.mesh.num_elements(); ++e) {
        const int p = rr.parent[e];
        child_area[p] += rr.mesh.area(static_cast<int>(e));
        const Element& c = rr.mesh.element(e);
        const int depth = c.lineage.depth - m.element(p).lineage.depth;
        const double expect = m.area(p) / std::ldexp(1.0, depth);
        worst_area = std::max(worst_area, std::abs(rr.mesh.area(static_cast<int>(e)) - expect) / expect);
        if (c.generation < m.element(p).generation + depth)
          return make("refine-conformity", false, "generation counter not advanced");
        // Barycenter containment in the parent.
        const Point b = rr.mesh.barycenter(static_cast<int>(e));
        const auto pc = m.corners(p);
        for (int i = 0; i < 3; ++i)
          if (cross(pc[(i + 1) % 3] - pc[i], b - pc[i]) < 0.0)
            return make("refine-conformity", false, "child barycenter outside its parent");
      }
      for (int e : marked) {
        if (!rr.refined[e]) return make("refine-conformity", false, "marked element left unrefined");
        for (std::size_t c = 0; c < rr.mesh.num_elements(); ++c)
          if (rr.parent[c] == e && rr.mesh.element(c).generation < m.element(e).generation + n)
            return make("refine-conformity", false, "marked element bisected fewer than n times");
      }
      for (std::size_t p = 0; p < m.num_elements(); ++p)
        worst_area = std::max(worst_area, std::abs(child_area[p] - m.area(static_cast<int>(p))) / m.area(static_cast<int>(p)));
      m = std::move(rr.mesh);
    }
  }
  const bool ok = worst_area <= 1e-14;
  return make("refine-conformity", ok,
              std::to_string(refines_done) + " refinements conforming, nested; max area defect " + g4(worst_area));
}

CheckResult check_overlay_pairs(const Mesh& T0, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> steps(1, 6);
  std::uniform_real_distribution<double> frac(0.05, 0.5);
  long worst_slack = std::numeric_limits<long>::max();
  for (int i = 0; i < pairs; ++i) {
    Mesh A = random_refinement(T0, steps(rng), frac(rng), rng);
    Mesh B = random_refinement(T0, steps(rng), frac(rng), rng);
    Mesh O = overlay(A, B);
    const long rhs = static_cast<long>(A.num_elements() + B.num_elements()) - static_cast<long>(T0.num_elements());
    const long lhs = static_cast<long>(O.num_elements());
    if (lhs > rhs)
      return make("overlay-inequality", false,
                  "#overlay " + std::to_string(lhs) + " > #A + #B - #T0 = " + std::to_string(rhs));
    if (!check_conformity(O).ok) return make("overlay-inequality", false, "overlay is not conforming");
    if (!refines(O, A) || !refines(O, B)) return make("overlay-inequality", false, "overlay does not refine both");
    worst_slack = std::min(worst_slack, rhs - lhs);
  }
  return make("overlay-inequality", true,
              std::to_string(pairs) + " pairs, min slack " + std::to_string(worst_slack) + " elements");
}

CheckResult check_dorfler_exhaustive(int vectors, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double thetas[] = {0.2, 0.5, 0.8};
  int cases = 0;
  for (int v = 0; v < vectors; ++v) {
    const int n = len(rng);
    std::vector<double> eta(n);
    for (double& x : eta) x = std::pow(uni(rng), 3.0) + 1e-6;
    if (v % 10 == 0) std::fill(eta.begin(), eta.end(), eta[0]);  // ties
    for (double theta : thetas) {
      ++cases;
      const MarkedSet M = dorfler_mark(eta, theta);
      long double total = 0.0L, mass = 0.0L;
      for (double x : eta) total += x;
      for (int e : M) mass += eta[e];
      const long double target = static_cast<long double>(theta) * theta * total;
      if (mass < target * (1.0L - 1e-15L))
        return make("dorfler-minimality", false, "marked mass below theta^2 of the total");
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) >= M.size()) continue;
        long double s = 0.0L;
        for (int i = 0; i < n; ++i)
          if (mask >> i & 1u) s += eta[i];
        if (s >= target * (1.0L + 1e-15L))
          return make("dorfler-minimality", false, "a smaller subset satisfies the criterion");
      }
    }
  }
  return make("dorfler-minimality", true, std::to_string(cases) + " vectors x theta exhaustively minimal");
}

std::vector<FeFunction> random_functions(std::shared_ptr<const FeSpace> space, const FeFunction& center, int count,
                                         std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0), amp(0.1, 1.0);
  const auto h = vertex_scale(*space);
  std::vector<FeFunction> out;
  for (int i = 0; i < count; ++i) {
    FeFunction v = center;
    const double a = amplitude * amp(rng);
    for (int d = 0; d < space->num_dofs(); ++d) v.coeffs[d] += a * h[d] * uni(rng);
    out.push_back(std::move(v));
  }
  return out;
}

CheckResult check_potential_property(const ProblemSpec& problem, std::shared_ptr<const FeSpace> space,
                                     std::uint64_t seed, int directions) {
  DiscreteProblem dp(space, problem);
  const FeFunction zero(space);
  const auto Vs = random_functions(space, zero, directions, seed);
  const auto Ws = random_functions(space, zero, directions, seed + 1);
  double worst = 0.0;
  const double eps = 1e-6;
  for (int i = 0; i < directions; ++i) {
    const auto r = dp.residual(Vs[i]);
    double rw = 0.0;
    for (std::size_t d = 0; d < r.size(); ++d) rw += r[d] * Ws[i].coeffs[d];
    FeFunction p = Vs[i], m = Vs[i];
    for (std::size_t d = 0; d < r.size(); ++d) {
      p.coeffs[d] += eps * Ws[i].coeffs[d];
      m.coeffs[d] -= eps * Ws[i].coeffs[d];
    }
    const double fd = (dp.energy(p) - dp.energy(m)) / (2.0 * eps);
    worst = std::max(worst, std::abs(fd - rw) / std::max(std::abs(rw), 1e-300));
  }
  return make("potential-property", worst < 1e-5,
              "max relative |dF/dt - <R(V),w>| = " + g4(worst) + " over " + std::to_string(directions) + " directions");
}

CheckResult check_energy_sandwich(const ProblemSpec& problem, const FeFunction& U, int samples, std::uint64_t seed,
                                  double lower, double upper, double slack, const std::string& name) {
  DiscreteProblem dp(U.space, problem);
  const double FU = dp.energy(U);
  double worst_low = std::numeric_limits<double>::infinity(), worst_up = worst_low;
  for (const FeFunction& v : random_functions(U.space, U, samples, seed)) {
    const double d = h1_seminorm_diff(v, U);
    const double dF = dp.energy(v) - FU;
    worst_low = std::min(worst_low, dF - lower * d * d);
    worst_up = std::min(worst_up, upper * d * d - dF);
  }
  const bool ok = worst_low >= -slack && worst_up >= -slack;
  return make(name, ok,
              std::to_string(samples) + " samples, min lower margin " + g4(worst_low) + ", min upper margin " +
                  g4(worst_up) + " (slack " + g4(slack) + ")");
}

CheckResult check_solver_contract(const ProblemSpec& problem, std::shared_ptr<const FeSpace> space,
                                  const SolverConfig& config, std::uint64_t seed) {
  DiscreteProblem dp(space, problem);
  const FeFunction zero(space);
  FeFunction rnd = random_functions(space, zero, 1, seed, 5.0).front();
  SolveResult a = solve_nonlinear(dp, zero, config);
  SolveResult b = solve_nonlinear(dp, rnd, config);
  std::string why;
  for (const SolveResult* s : {&a, &b}) {
    if (s->report.final_residual_norm > config.newton_tol) why = "residual above tolerance";
    const auto& F = s->report.energy_history;
    for (std::size_t i = 1; i < F.size(); ++i)
      if (F[i] > F[i - 1] + 8.0 * std::numeric_limits<double>::epsilon() * std::abs(F[i - 1]))
        why = "energy increased across a Newton step";
  }
  const double d = h1_seminorm_diff(a.U, b.U);
  const double bound = 10.0 * config.newton_tol / problem.constants.c_A;
  if (d > bound) why = "initial guesses disagree: " + g4(d) + " > " + g4(bound);
  return make("solver-contract", why.empty(),
              why.empty() ? "residuals " + g4(a.report.final_residual_norm) + ", " + g4(b.report.final_residual_norm) +
                                "; guesses agree to " + g4(d) + " <= " + g4(bound)
                          : why);
}

CheckResult check_jump_consistency(const ProblemSpec& problem, std::shared_ptr<const FeSpace> space,
                                   const EstimatorOptions& options) {
  const FeFunction V = interpolate(space, [](Point p) { return 0.3 + p.x + 2.0 * p.y; });
  const Mesh& m = space->mesh();
  auto interior = [&](int e) {
    for (int v : m.element(e).v)
      if (space->dof_of_vertex(v) < 0) return false;
    return true;
  };
  int checked = 0;
  double worst = 0.0;
  for (std::size_t ed = 0; ed < m.num_edges(); ++ed) {
    const Edge& E = m.edge(ed);
    if (E.boundary() || !interior(E.elem[0]) || !interior(E.elem[1])) continue;
    const EdgeJump J = jump_residual(problem, V, static_cast<int>(ed), options);
    for (double j : J.values) worst = std::max(worst, std::abs(j));
    ++checked;
  }
  if (checked == 0) return skip("jump-consistency", "no edge with a linear two-sided patch");
  return make("jump-consistency", worst <= 1e-12,
              "max |J| of a globally linear function over " + std::to_string(checked) + " edges = " + g4(worst));
}

GBoundResult check_g_bound(const ProblemSpec& problem, const std::vector<std::shared_ptr<const FeSpace>>& spaces,
                           std::uint64_t seed, int pairs, double headroom) {
  GBoundResult out;
  for (std::size_t i = 0; i < spaces.size(); ++i)
    out.per_mesh.push_back(fit_c_e(problem, spaces[i], seed + 17 * i, pairs));
  out.C_E_fit = out.per_mesh.front();
  bool ok = out.C_E_fit > 0.0;
  std::string detail = "C_E fit " + g4(out.C_E_fit) + " on " + std::to_string(spaces.front()->mesh().num_elements()) +
                       " elements; finer:";
  for (std::size_t i = 1; i < spaces.size(); ++i) {
    ok = ok && out.per_mesh[i] <= headroom * out.C_E_fit;
    detail += " " + g4(out.per_mesh[i]) + " (" + std::to_string(spaces[i]->mesh().num_elements()) + ")";
  }
  out.check = make("g-bound", ok, detail + ", headroom " + g4(headroom));
  return out;
}

CheckResult check_estimator_reduction(std::span<const AdaptRecord> records, double C_E, double xi) {
  int steps = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const AdaptRecord& r = records[k];
    if (!has_data(r.du_sq)) continue;
    const double lhs = records[k + 1].eta * records[k + 1].eta;
    const double rhs = 2.0 * (r.eta * r.eta - xi * r.eta_sq_marked) + 2.0 * C_E * r.du_sq;
    worst = std::min(worst, rhs / lhs);
    ++steps;
    if (lhs > rhs)
      return make("estimator-reduction", false,
                  "step " + std::to_string(k) + ": eta^2 " + g4(lhs) + " > bound " + g4(rhs));
  }
  return make("estimator-reduction", steps > 0,
              std::to_string(steps) + " steps, min bound/eta^2 " + g4(worst) + " with C_E " + g4(C_E));
}

CheckResult check_oscillation_perturbation(std::span<const AdaptRecord> records, double C_E) {
  int steps = 0;
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const AdaptRecord& r = records[k];
    if (!has_data(r.du_sq)) continue;
    ++steps;
    const double rhs = 2.0 * r.osc_sq_common_next + 2.0 * C_E * r.du_sq;
    if (r.osc_sq_common > rhs * (1.0 + 1e-12) + 1e-300)
      return make("oscillation-perturbation", false,
                  "step " + std::to_string(k) + ": " + g4(r.osc_sq_common) + " > " + g4(rhs));
  }
  return make("oscillation-perturbation", steps > 0, std::to_string(steps) + " steps with C_E " + g4(C_E));
}

CheckResult check_osc_below_eta(std::span<const AdaptRecord> records) {
  for (const auto& r : records)
    if (r.osc > r.eta) return make("osc-below-eta", false, "osc > eta at k=" + std::to_string(r.k));
  return make("osc-below-eta", true, std::to_string(records.size()) + " iterations");
}

CheckResult check_efficiency_band(std::span<const AdaptRecord> records, double factor) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : records) {
    if (!has_data(r.h1_error) || !(r.h1_error > 0.0)) return skip("efficiency-band", "no exact solution");
    const double q = r.eta / r.h1_error;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  return make("efficiency-band", hi / lo <= factor,
              "eta/error in [" + g4(lo) + ", " + g4(hi) + "], spread " + g4(hi / lo) + " <= " + g4(factor));
}

CheckResult check_bounds_honored(const EmpiricalConstants& fitted, std::span<const AdaptRecord> records,
                                 double headroom) {
  if (!(fitted.C_U > 0.0) || !(fitted.C_L > 0.0)) return skip("reliability-efficiency", "constants not fitted");
  double up = 0.0, low = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    const double eta2 = r.eta * r.eta, e2 = r.h1_error * r.h1_error;
    up = std::max(up, e2 / eta2);
    low = std::min(low, (e2 + r.osc * r.osc) / eta2);
  }
  const bool ok = up <= headroom * fitted.C_U && low >= fitted.C_L / headroom;
  return make("reliability-efficiency", ok,
              "C_U " + g4(up) + " vs fitted " + g4(fitted.C_U) + ", C_L " + g4(low) + " vs fitted " + g4(fitted.C_L) +
                  " (headroom " + g4(headroom) + ")");
}

CheckResult check_energy_monotone(std::span<const AdaptRecord> records, double slack) {
  double shift = 0.0;
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const double before = std::isnan(records[k].energy_prolonged) ? records[k].energy : records[k].energy_prolonged;
    if (records[k + 1].energy > before + slack)
      return make("energy-monotone", false, "F increased at step " + std::to_string(k));
    if (!std::isnan(records[k].energy_prolonged))
      shift = std::max(shift, std::abs(records[k].energy_prolonged - records[k].energy));
  }
  return make("energy-monotone", true,
              "F(U_{k+1}) <= F(U_k) over " + std::to_string(records.size()) +
                  " iterations, both on T_{k+1}; max quadrature shift of F(U_k) " + g4(shift));
}

CheckResult check_eta_decreasing(std::span<const AdaptRecord> records, double slack) {
  for (std::size_t k = 1; k + 1 < records.size(); ++k)
    if (!(records[k + 1].eta < records[k].eta + slack))
      return make("eta-decreasing", false, "eta did not decrease at step " + std::to_string(k));
  return make("eta-decreasing", true, "strict decrease after the first iteration");
}

CheckResult check_solver_records(std::span<const AdaptRecord> records, double tol) {
  int worst_newton = 0;
  for (const auto& r : records) {
    if (!(r.residual <= tol)) return make("solver-residuals", false, "residual " + g4(r.residual) + " at k=" + std::to_string(r.k));
    // the line search accepts roundoff-level rises only
    if (r.newton_energy_rise > 8.0 * std::numeric_limits<double>::epsilon() * std::abs(r.energy))
      return make("solver-residuals", false, "energy rose by " + g4(r.newton_energy_rise) + " in the solve at k=" + std::to_string(r.k));
    worst_newton = std::max(worst_newton, r.newton_iters);
  }
  return make("solver-residuals", worst_newton <= 25,
              "every solve below " + g4(tol) + ", max Newton iterations " + std::to_string(worst_newton));
}

PairData marking_pairs(const ProblemSpec& problem, const std::vector<AdaptState>& history) {
  PairData out;
  std::vector<double> err2(history.size());
  for (std::size_t k = 0; k < history.size(); ++k) {
    const double e = h1_error_vs_exact(history[k].U, problem);
    err2[k] = e * e;
  }
  for (std::size_t k = 0; k < history.size(); ++k)
    for (std::size_t p = k + 1; p < history.size(); ++p) {
      MarkingPair mp;
      mp.k = static_cast<int>(k);
      mp.p = static_cast<int>(p);
      mp.total_error_sq_k = err2[k] + history[k].report.osc_global_sq;
      mp.total_error_sq_p = err2[p] + history[p].report.osc_global_sq;
      mp.eta_sq_k = history[k].report.eta_global_sq;
      const auto R = refined_between(*history[k].mesh, *history[p].mesh);
      mp.eta_sq_refined = history[k].report.eta_sq_of(R);
      const double du = h1_seminorm_diff(history[p].U, transfer(history[k].U, history[p].space));
      if (mp.eta_sq_refined > 0.0) out.C_LU = std::max(out.C_LU, du * du / mp.eta_sq_refined);
      out.pairs.push_back(mp);
    }
  return out;
}

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  auto add = [&](CheckResult r, const std::string& prefix = "") {
    if (!prefix.empty()) r.name = prefix + ":" + r.name;
    out.push_back(std::move(r));
  };
  for (const std::string dom : {"square", "lshape"}) {
    const Mesh T0 = builtin::by_name(dom);
    add(check_refine_sequences(T0, 10, 6, opt.seed), dom);
    add(check_overlay_pairs(T0, 20, opt.seed + 1), dom);
  }
  add(check_dorfler_exhaustive(200, opt.seed + 2));

  const ProblemSpec problem = load_problem(opt.problem);
  AdaptConfig cfg;
  cfg.theta = 0.5;
  cfg.max_iters = 60;
  cfg.max_elements = opt.max_elements;
  cfg.solver = opt.solver;
  cfg.exec = opt.exec;
  cfg.estimator = opt.estimator;
  cfg.seed = opt.seed;
  cfg.keep_history = true;
  const RunResult A = run_loop(problem, cfg);

  // Mid-size state of the run for the discrete checks.
  const AdaptState* mid = &A.history.back();
  for (const auto& st : A.history)
    if (st.mesh->num_elements() >= 300) {
      mid = &st;
      break;
    }
  add(check_potential_property(problem, mid->space, opt.seed + 3));
  add(check_energy_sandwich(problem, mid->U, 100, opt.seed + 4, problem.constants.c_A / 2, problem.constants.C_A / 2,
                            1e-8, "energy-sandwich"));
  add(check_solver_contract(problem, mid->space, opt.solver, opt.seed + 5));
  add(check_solver_records(A.records, opt.solver.newton_tol));
  if (problem.has_exact()) {
    const auto samples = random_functions(mid->space, mid->U, 20, opt.seed + 6);
    const auto qo = check_quasi_orthogonality(problem, mid->U, samples);
    add(make("quasi-orthogonality", qo.passed, "worst ratio - 1 = " + g4(qo.worst_ratio - 1.0) +
                                                           " <= bound - 1 = " + g4(qo.bound - 1.0) +
                                                           " + quadrature defect " + g4(qo.defect)));
  } else {
    add(skip("quasi-orthogonality", "no exact solution"));
  }
  add(check_jump_consistency(problem, mid->space, opt.estimator));

  // g-bound on three nested meshes.
  std::shared_ptr<const FeSpace> coarse = A.history.back().space;
  for (const auto& st : A.history)
    if (st.space->num_dofs() >= 32) {
      coarse = st.space;
      break;
    }
  std::vector<std::shared_ptr<const FeSpace>> nested{coarse};
  for (int l = 1; l <= 2; ++l)
    nested.push_back(build_space(std::make_shared<const Mesh>(refine_uniform(coarse->mesh(), l))));
  const GBoundResult gb = check_g_bound(problem, nested, opt.seed + 7);
  add(gb.check);
  add(check_estimator_reduction(A.records, gb.C_E_fit, cfg.xi()));
  add(check_oscillation_perturbation(A.records, gb.C_E_fit));
  add(check_osc_below_eta(A.records));
  add(check_energy_monotone(A.records, 1e-10));
  add(check_eta_decreasing(A.records));

  // Rerun with another theta and seed: fitted constants must carry over.
  AdaptConfig cfgB = cfg;
  cfgB.theta = 0.3;
  cfgB.seed = opt.seed + 100;
  cfgB.keep_history = false;
  const RunResult B = run_loop(problem, cfgB);
  if (problem.has_exact()) {
    add(check_efficiency_band(A.records));
    add(check_bounds_honored(A.constants, B.records));
  } else {
    add(skip("efficiency-band", "no exact solution"));
    add(skip("reliability-efficiency", "no exact solution"));
  }
  add(make("localized-upper-bound", A.constants.C_LU > 0.0 && B.constants.C_LU <= 2.0 * A.constants.C_LU,
           "C_LU " + g4(A.constants.C_LU) + " (theta 0.5), " + g4(B.constants.C_LU) + " (theta 0.3)"));

  {
    const MuSweep sw = sweep_mu(A.records, A.constants.F_ref);
    add(make("contraction", sw.best.passed,
             "mu " + g4(sw.mu) + ", max Q_{k+1}/Q_k " + g4(sw.best.rho_hat) + " over " +
                 std::to_string(sw.best.ratios.size()) + " steps"));
  }

  const double cs_lo = std::min(A.constants.C_S, B.constants.C_S), cs_hi = std::max(A.constants.C_S, B.constants.C_S);
  add(make("complexity", cs_lo > 0.0 && cs_hi <= 1.2 * cs_lo,
           "C_S " + g4(A.constants.C_S) + " (theta 0.5), " + g4(B.constants.C_S) + " (theta 0.3)"));

  if (problem.has_exact()) {
    // Total error rate, then the cardinality bound shape.
    std::vector<double> x, q;
    for (const auto& r : A.records) {
      x.push_back(static_cast<double>(r.num_elements) - static_cast<double>(A.records.front().num_elements));
      q.push_back(std::sqrt(r.h1_error * r.h1_error + r.osc * r.osc));
    }
    const RateFit rf = fit_rate(x, q, 8);
    const CardinalityCheck cc = check_cardinality(A.records, rf.s_hat);
    add(make("cardinality", cc.passed, "s_hat " + g4(rf.s_hat) + ", #M_k * total^{1/(2s)} bounded"));

    AdaptConfig cfgC = cfg;
    cfgC.theta = 0.2;
    cfgC.max_elements = std::min<std::size_t>(opt.max_elements, 1500);
    const RunResult C = run_loop(problem, cfgC);
    const PairData pd = marking_pairs(problem, C.history);
    EmpiricalConstants ec = C.constants;
    ec.C_LU = std::max(ec.C_LU, pd.C_LU);
    ec.C_E = gb.C_E_fit;
    ec.recompute(0.0);
    int checked = 0, vacuous = 0, failed = 0;
    for (double frac : {0.25, 0.5, 0.75}) {
      const double th = frac * ec.theta0;
      const double nu = 0.5 * (1.0 - th * th / (ec.theta0 * ec.theta0));
      const auto om = check_optimal_marking(pd.pairs, th, nu);
      checked += om.checked;
      vacuous += om.vacuous;
      failed += om.failed;
    }
    add(make("optimal-marking", failed == 0,
             "theta0 " + g4(ec.theta0) + ": " + std::to_string(checked) + " pairs checked, " + std::to_string(vacuous) +
                 " vacuous, " + std::to_string(failed) + " failed"));
  } else {
    add(skip("cardinality", "no exact solution"));
    add(skip("optimal-marking", "no exact solution"));
  }
  return out;
}

}  // namespace afem
