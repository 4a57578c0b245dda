#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "afem/adapt.hpp"

namespace afem {

struct CheckResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

/// Random refinement of `mesh`: `steps` rounds, each marking every element
/// with probability `fraction` (at least one).
Mesh random_refinement(const Mesh& mesh, int steps, double fraction, std::mt19937_64& rng);
/// Every element of `fine` descends from an element of `coarse`.
bool refines(const Mesh& fine, const Mesh& coarse);

// Mesh kernel.
CheckResult check_refine_sequences(const Mesh& T0, int sequences, int steps, std::uint64_t seed);
CheckResult check_overlay_pairs(const Mesh& T0, int pairs, std::uint64_t seed);

// Marking.
CheckResult check_dorfler_exhaustive(int vectors, std::uint64_t seed);

// Discrete problem.
CheckResult check_potential_property(const ProblemSpec& problem, std::shared_ptr<const FeSpace> space,
                                     std::uint64_t seed, int directions = 5);
/// lower * d^2 - slack <= F(v) - F(U) <= upper * d^2 + slack, d = ||grad(v - U)||,
/// for `samples` random discrete v.
CheckResult check_energy_sandwich(const ProblemSpec& problem, const FeFunction& U, int samples, std::uint64_t seed,
                                  double lower, double upper, double slack, const std::string& name);
/// Residual bound, monotone energy and agreement of two initial guesses.
CheckResult check_solver_contract(const ProblemSpec& problem, std::shared_ptr<const FeSpace> space,
                                  const SolverConfig& config, std::uint64_t seed);
std::vector<FeFunction> random_functions(std::shared_ptr<const FeSpace> space, const FeFunction& center, int count,
                                         std::uint64_t seed, double amplitude = 1.0);

// Estimator.
CheckResult check_jump_consistency(const ProblemSpec& problem, std::shared_ptr<const FeSpace> space,
                                   const EstimatorOptions& options);
struct GBoundResult {
  CheckResult check;
  double C_E_fit = 0.0;
  std::vector<double> per_mesh;  // fitted constant on each mesh
};
/// Fit on spaces[0]; the others must stay below headroom * fit.
GBoundResult check_g_bound(const ProblemSpec& problem, const std::vector<std::shared_ptr<const FeSpace>>& spaces,
                           std::uint64_t seed, int pairs = 50, double headroom = 2.0);
CheckResult check_estimator_reduction(std::span<const AdaptRecord> records, double C_E, double xi);
CheckResult check_oscillation_perturbation(std::span<const AdaptRecord> records, double C_E);
CheckResult check_osc_below_eta(std::span<const AdaptRecord> records);
/// max_k (eta_k/err_k) / min_k (eta_k/err_k) <= factor.
CheckResult check_efficiency_band(std::span<const AdaptRecord> records, double factor = 10.0);
/// Upper and lower bound constants fitted on one run, honored with
/// `headroom` on another.
CheckResult check_bounds_honored(const EmpiricalConstants& fitted, std::span<const AdaptRecord> records,
                                 double headroom = 2.0);

// Loop.
/// F(U_{k+1}) <= F(U_k) + slack with both energies evaluated on T_{k+1}.
CheckResult check_energy_monotone(std::span<const AdaptRecord> records, double slack);
CheckResult check_eta_decreasing(std::span<const AdaptRecord> records, double slack = 1e-12);
CheckResult check_solver_records(std::span<const AdaptRecord> records, double tol);

struct PairData {
  std::vector<MarkingPair> pairs;
  double C_LU = 0.0;  // max ||grad(U_k - U_p)||^2 / eta_k^2(R) over all pairs
};
/// All nested pairs (k, p > k) of a run kept with keep_history.
PairData marking_pairs(const ProblemSpec& problem, const std::vector<AdaptState>& history);

struct VerifyOptions {
  std::string problem = "poisson-square";
  std::uint64_t seed = 1;
  EstimatorOptions estimator;
  std::size_t max_elements = 3000;
  SolverConfig solver;
  Exec exec = Exec::parallel;
};
std::vector<CheckResult> run_verify_suite(const VerifyOptions& options);

}  // namespace afem
