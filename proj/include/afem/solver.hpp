#pragma once

#include <stdexcept>
#include <vector>

#include "afem/fem.hpp"
#include "afem/sparse.hpp"

namespace afem {

struct SolverConfig {
  double newton_tol = 1e-10;  // residual sup-norm
  int max_newton = 50;
  double armijo_c = 1e-4;
  double damping_factor = 0.5;
  int max_halvings = 30;
  double cg_tol_factor = 1e-2;
  int cg_max = 20000;

  void validate() const;
};

struct SolveReport {
  int newton_iters = 0;
  int total_cg_iters = 0;
  double final_residual_norm = 0.0;
  std::vector<double> energy_history;  // F at the initial guess and after every step
};

class SolverError : public std::runtime_error {
 public:
  enum class Kind { not_converged, line_search, linear };
  SolverError(Kind kind, const std::string& what, FeFunction best, SolveReport report)
      : std::runtime_error(what), kind_(kind), best_(std::move(best)), report_(std::move(report)) {}
  Kind kind() const { return kind_; }
  const FeFunction& best() const { return best_; }
  const SolveReport& report() const { return report_; }

 private:
  Kind kind_;
  FeFunction best_;
  SolveReport report_;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double residual_norm = 0.0;  // ||A x - b||_2, recomputed from scratch
};

/// Jacobi-preconditioned conjugate gradients. Stops when
/// ||A x - b||_2 <= tol * ||b||_2; throws std::runtime_error past `cap`
/// iterations or when the final true residual misses the bound.
CgResult solve_linear_cg(const CsrMatrix& A, const std::vector<double>& b, double tol, int cap,
                         Exec exec = Exec::parallel);

struct SolveResult {
  FeFunction U;
  SolveReport report;
};

/// Damped Newton with the exact Jacobian and Armijo backtracking on the
/// energy.
SolveResult solve_nonlinear(const DiscreteProblem& dp, const FeFunction& initial, const SolverConfig& config);
SolveResult solve_nonlinear(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem,
                            const FeFunction& initial, const SolverConfig& config, Exec exec = Exec::parallel);

double sup_norm(const std::vector<double>& v);

}  // namespace afem
