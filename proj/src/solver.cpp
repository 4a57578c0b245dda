#include "afem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace afem {

void SolverConfig::validate() const {
  if (!(newton_tol > 0) || !(cg_tol_factor > 0) || !(armijo_c > 0 && armijo_c < 1) ||
      !(damping_factor > 0 && damping_factor < 1))
    throw std::invalid_argument("solver tolerances must be positive");
  if (max_newton < 1 || cg_max < 1 || max_halvings < 1) throw std::invalid_argument("solver caps must be >= 1");
}

double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

CgResult solve_linear_cg(const CsrMatrix& A, const std::vector<double>& b, double tol, int cap, Exec exec) {
  const int n = A.n;
  CgResult out;
  out.x.assign(n, 0.0);
  const double bnorm = std::sqrt(kernels::dot(b, b, exec));
  if (bnorm == 0.0) return out;

  std::vector<double> dinv = A.diagonal();
  for (double& d : dinv) d = d > 0.0 ? 1.0 / d : 1.0;

  std::vector<double> r = b, z(n), p(n), q(n);
  kernels::for_each_index(n, exec, [&](std::size_t i) { z[i] = dinv[i] * r[i]; });
  p = z;
  double rz = kernels::dot(r, z, exec);
  const double target = tol * bnorm;
  int it = 0;
  for (;;) {
    double rnorm = std::sqrt(kernels::dot(r, r, exec));
    if (rnorm <= target) {
      // Confirm with the true residual; restart from x if recursion drifted.
      A.multiply(out.x, q, exec);
      double true_norm = 0.0;
      for (int i = 0; i < n; ++i) {
        r[i] = b[i] - q[i];
        true_norm += r[i] * r[i];
      }
      true_norm = std::sqrt(true_norm);
      if (true_norm <= target) {
        out.residual_norm = true_norm;
        break;
      }
      kernels::for_each_index(n, exec, [&](std::size_t i) { z[i] = dinv[i] * r[i]; });
      p = z;
      rz = kernels::dot(r, z, exec);
    }
    if (it >= cap)
      throw std::runtime_error("CG did not reach the tolerance within " + std::to_string(cap) + " iterations");
    A.multiply(p, q, exec);
    const double pq = kernels::dot(p, q, exec);
    if (!(pq > 0.0)) throw std::runtime_error("CG breakdown: matrix not positive definite");
    const double a = rz / pq;
    kernels::axpy(a, p, out.x, exec);
    kernels::axpy(-a, q, r, exec);
    kernels::for_each_index(n, exec, [&](std::size_t i) { z[i] = dinv[i] * r[i]; });
    const double rz_new = kernels::dot(r, z, exec);
    const double beta = rz_new / rz;
    rz = rz_new;
    kernels::for_each_index(n, exec, [&](std::size_t i) { p[i] = z[i] + beta * p[i]; });
    ++it;
  }
  out.iterations = it;
  return out;
}

namespace {
constexpr double kCgRelativeFloor = 1e-13;
}

SolveResult solve_nonlinear(const DiscreteProblem& dp, const FeFunction& initial, const SolverConfig& config) {
  config.validate();
  if (initial.space != dp.space_ptr()) throw std::invalid_argument("initial guess lives in another space");
  const Exec exec = dp.exec();

  SolveResult res{initial, {}};
  FeFunction& U = res.U;
  SolveReport& rep = res.report;
  double F = dp.energy(U);
  rep.energy_history.push_back(F);
  std::vector<double> r = dp.residual(U);
  double rsup = sup_norm(r);
  rep.final_residual_norm = rsup;

  while (rsup > config.newton_tol) {
    if (rep.newton_iters >= config.max_newton)
      throw SolverError(SolverError::Kind::not_converged,
                        "Newton did not converge in " + std::to_string(config.max_newton) + " iterations", U, rep);
    const CsrMatrix J = dp.jacobian(U);
    const double rnorm = std::sqrt(kernels::dot(r, r, exec));
    // Relative CG target, capped so that linear problems are solved to the
    // Newton tolerance in one step, and floored above roundoff.
    const double abs_target = config.cg_tol_factor * std::min(rnorm, config.newton_tol);
    const double rel_target = std::max(abs_target / rnorm, kCgRelativeFloor);
    CgResult cg;
    try {
      cg = solve_linear_cg(J, r, rel_target, config.cg_max, exec);
    } catch (const std::runtime_error& e) {
      throw SolverError(SolverError::Kind::linear, e.what(), U, rep);
    }
    rep.total_cg_iters += cg.iterations;
    const std::vector<double>& d = cg.x;  // U_new = U - t d
    const double slope = -kernels::dot(r, d, exec);

    double t = 1.0;
    bool accepted = false;
    FeFunction trial = U;
    double F_trial = F;
    std::vector<double> r_trial;
    for (int h = 0; h <= config.max_halvings; ++h, t *= config.damping_factor) {
      for (std::size_t i = 0; i < d.size(); ++i) trial.coeffs[i] = U.coeffs[i] - t * d[i];
      F_trial = dp.energy(trial);
      const double drop = F_trial - F - config.armijo_c * t * slope;
      if (drop <= 0.0) {
        accepted = true;
        break;
      }
      // At roundoff level F no longer resolves the decrease; accept when
      // the residual still shrinks and F is unchanged to a few ulps.
      if (F_trial - F <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(F)) {
        r_trial = dp.residual(trial);
        if (sup_norm(r_trial) < rsup) {
          accepted = true;
          break;
        }
        r_trial.clear();
      }
    }
    if (!accepted)
      throw SolverError(SolverError::Kind::line_search, "line search failed after " +
                        std::to_string(config.max_halvings) + " halvings", U, rep);
    U = std::move(trial);
    F = F_trial;
    r = r_trial.empty() ? dp.residual(U) : std::move(r_trial);
    rsup = sup_norm(r);
    ++rep.newton_iters;
    rep.energy_history.push_back(F);
    rep.final_residual_norm = rsup;
  }
  return res;
}

SolveResult solve_nonlinear(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem,
                            const FeFunction& initial, const SolverConfig& config, Exec exec) {
  return solve_nonlinear(DiscreteProblem(std::move(space), problem, exec), initial, config);
}

}  // namespace afem
