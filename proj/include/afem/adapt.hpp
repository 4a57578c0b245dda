#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afem/estimator.hpp"
#include "afem/fem.hpp"
#include "afem/mesh.hpp"
#include "afem/solver.hpp"

namespace afem {

enum class Mode { adaptive, uniform };

struct AdaptConfig {
  double theta = 0.5;
  int n = 1;
  double eta_tol = 0.0;
  std::size_t max_elements = 50000;
  int max_iters = 20;  // loop iterations, i.e. rows of the run log
  Mode mode = Mode::adaptive;
  SolverConfig solver;
  Exec exec = Exec::parallel;
  EstimatorOptions estimator;
  std::uint64_t seed = 1;
  bool keep_history = false;  // retain every mesh and solution
  bool fit_constants = true;
  // Cross-check of the extrapolated F(u) by a solve on the uniformly refined
  // final mesh, skipped above this size.
  std::size_t reference_check_max_elements = 20000;

  double xi() const;  // 1 - 2^{-n/2}
  void validate() const;
};

/// One row of the run log. Fields describing the step k -> k+1 are NaN on
/// the final row.
struct AdaptRecord {
  int k = 0;
  std::size_t num_elements = 0;
  std::size_t num_marked = 0;
  int num_dofs = 0;
  double eta = 0.0;
  double osc = 0.0;
  double energy = 0.0;
  double h1_error = 0.0;  // NaN without an exact solution
  double q = 0.0;         // F(U_k) - F_ref + mu eta_k^2, NaN until fitted
  int newton_iters = 0;
  int cg_iters = 0;
  double residual = 0.0;
  double newton_energy_rise = 0.0;  // max_i F_i - F_{i-1} over the Newton steps (0 without steps)

  double eta_sq_marked = 0.0;    // eta_k^2(M_k)
  double eta_sq_refined = 0.0;   // eta_k^2(R_k), R_k = elements of T_k bisected
  double du_sq = 0.0;            // ||grad(U_{k+1} - U_k)||^2
  double osc_sq_common = 0.0;    // osc_{T_k}^2(U_k; T_k cap T_{k+1})
  double osc_sq_common_next = 0.0;  // osc_{T_{k+1}}^2(U_{k+1}; T_k cap T_{k+1})
  double energy_prolonged = 0.0;    // F on T_{k+1} of U_k (same quadrature as F(U_{k+1}))
};

struct EmpiricalConstants {
  double C_E = 0.0, C_L = 0.0, C_U = 0.0, C_LU = 0.0, C_S = 0.0;
  double rho = 0.0, mu = 0.0, theta0 = 0.0, nu = 0.0;
  double F_ref = 0.0;
  std::string provenance;

  /// theta0 from C_L, C_LU, C_E; nu from theta (0 when theta >= theta0).
  void recompute(double theta);
};

struct AdaptState {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const FeSpace> space;
  FeFunction U;
  EstimateReport report;
  SolveReport solve;
  MarkedSet marked;  // set chosen from this state (empty until marked)
  int k = 0;
  bool converged = false;
};

/// Shortest prefix of the elements sorted by eta^2 descending (ties by id)
/// carrying theta^2 of the total. Empty when every estimator vanishes.
MarkedSet dorfler_mark(std::span<const double> eta_sq, double theta);
MarkedSet dorfler_mark(const EstimateReport& report, double theta);

/// SOLVE and ESTIMATE on the initial mesh of the problem.
AdaptState initial_state(const ProblemSpec& problem, const AdaptConfig& config);
AdaptState initial_state(const ProblemSpec& problem, std::shared_ptr<const Mesh> mesh, const AdaptConfig& config);

AdaptRecord make_record(const ProblemSpec& problem, const AdaptState& state);

/// MARK, REFINE, SOLVE (warm started), ESTIMATE. Stores the marked set in
/// `state`, completes the step fields of the last record and appends the
/// record of the new state. When eta <= eta_tol (or nothing can be marked)
/// `state.converged` is set and a copy of it is returned.
AdaptState adaptive_step(const ProblemSpec& problem, const AdaptConfig& config, AdaptState& state,
                         std::vector<AdaptRecord>& records);

struct RunResult {
  AdaptState final_state;
  std::vector<AdaptRecord> records;
  EmpiricalConstants constants;
  std::vector<RefineStep> refine_history;
  std::vector<AdaptState> history;  // filled when keep_history
  double F_ref_discrepancy = 0.0;   // |Aitken - fine solve| without exact solution
};

/// Called with each record once its step fields are final.
using RecordSink = std::function<void(const AdaptRecord&)>;
RunResult run_loop(const ProblemSpec& problem, const AdaptConfig& config, const RecordSink& on_record = {});

// ---- constants and checks -------------------------------------------------

/// F(u) by degree-4 quadrature of the exact solution on `levels` uniform
/// refinements of the initial mesh.
double exact_energy(const ProblemSpec& problem, int levels = 8);
/// Aitken extrapolation of the last three entries; nullopt when undefined.
std::optional<double> aitken_limit(std::span<const double> F);

struct ContractionResult {
  std::vector<double> ratios;  // Q_{k+1}/Q_k
  double rho_hat = 0.0;        // max ratio
  bool passed = false;
};
/// Throws std::invalid_argument when some Q_k <= 0.
ContractionResult check_contraction(std::span<const AdaptRecord> records, double F_ref, double mu);
struct MuSweep {
  double mu = 0.0;
  ContractionResult best;
  std::vector<std::pair<double, double>> grid;  // (mu, rho_hat)
};
/// Log grid 1e-3..10 with `per_decade` points per decade.
MuSweep sweep_mu(std::span<const AdaptRecord> records, double F_ref, int per_decade = 4);

struct QuasiOrthogonality {
  double worst_ratio = 0.0;  // sample with the largest ratio - defect
  double defect = 0.0;       // 2 |orthogonality defect| / ||grad(u - V)||^2 of that sample
  double bound = 0.0;        // C_A / c_A
  bool passed = false;
};
QuasiOrthogonality check_quasi_orthogonality(const ProblemSpec& problem, const FeFunction& U,
                                             std::span<const FeFunction> samples);

/// Data of one nested pair (T_k, T_p) used by the optimal-marking lemma.
struct MarkingPair {
  int k = 0, p = 0;
  double total_error_sq_k = 0.0;  // ||grad(U_k - u)||^2 + osc_k^2
  double total_error_sq_p = 0.0;
  double eta_sq_k = 0.0;
  double eta_sq_refined = 0.0;    // eta_k^2(R), R = T_k minus T_p
};
struct OptimalMarkingResult {
  int checked = 0, vacuous = 0, failed = 0;
  std::vector<std::string> log;
  bool passed() const { return failed == 0; }
};
OptimalMarkingResult check_optimal_marking(std::span<const MarkingPair> pairs, double theta, double nu);

struct RateFit {
  double s_hat = 0.0;
  double r2 = 0.0;
  int points = 0;
};
/// Least-squares slope of log(q) against log(#T_k - #T_0) over the last
/// `tail` admissible records (0 = all). Throws on non-positive q.
RateFit fit_rate(std::span<const AdaptRecord> records, double (*select)(const AdaptRecord&), int tail = 0);
RateFit fit_rate(std::span<const double> dofs_excess, std::span<const double> q, int tail = 0);

/// Tail covering the records with #T_k - #T_0 >= (last value) / span, widened
/// to at least `min_points` records.
int rate_tail(std::span<const double> dofs_excess, int min_points = 8, double span = 30.0);
int rate_tail(std::span<const AdaptRecord> records, int min_points = 8, double span = 30.0);

/// F_inf from a least-squares fit F_k = F_inf + c / (#T_k - #T_0) over the
/// records with #T_k - #T_0 >= (last value) / 10. Meant for adaptive runs at
/// the optimal rate 1/2.
double richardson_energy_limit(std::span<const AdaptRecord> records);

/// Sum g^2 / ||grad(V - W)||^2 over `pairs` random pairs with nodal
/// perturbations scaled by the local mesh size. Returns the maximum.
double fit_c_e(const ProblemSpec& problem, std::shared_ptr<const FeSpace> space, std::uint64_t seed, int pairs = 50,
               Exec exec = Exec::parallel);

struct CardinalityCheck {
  std::vector<double> values;  // #M_k * total_error_sq_k^{1/(2 s)}
  bool passed = false;
};
CardinalityCheck check_cardinality(std::span<const AdaptRecord> records, double s_hat);

/// Elements of `coarse` that are not elements of `fine` (bisected somewhere
/// between the two meshes).
std::vector<int> refined_between(const Mesh& coarse, const Mesh& fine);

/// Surrogate exact solution for problems without one: solve on the overlay
/// of `mesh` with two uniform refinements of its initial mesh, refined
/// `extra_levels` more times uniformly.
AdaptState reference_solution(const ProblemSpec& problem, const Mesh& mesh, const AdaptConfig& config,
                              int extra_levels = 2);

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

}  // namespace afem
