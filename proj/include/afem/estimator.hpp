#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "afem/fem.hpp"

namespace afem {

inline constexpr int kElementSamples = 6;  // degree-4 triangle rule
inline constexpr int kEdgeSamples = 3;     // 3-point Gauss

struct EdgeJump {
  int edge = -1;
  std::array<double, kEdgeSamples> values{};  // J at the edge quadrature points
  double length = 0.0;
};

struct EstimatorOptions {
  // Fault injection for testing the verification suite: adds the two side
  // fluxes instead of taking their difference.
  bool flip_jump_sign = false;
};

struct EstimateReport {
  std::vector<double> eta_sq;
  std::vector<double> osc_sq;
  double eta_global_sq = 0.0;
  double osc_global_sq = 0.0;
  std::vector<EdgeJump> jumps;      // indexed by edge id
  std::vector<double> residuals;    // kElementSamples per element

  double eta() const;
  double osc() const;
  double eta_sq_of(std::span<const int> elements) const;
  double osc_sq_of(std::span<const int> elements) const;
};

/// R(V) = -grad_x alpha(x, |grad V|^2) . grad V - f at the quadrature points
/// of element e. The term with d alpha / ds drops out because grad V is
/// constant on each element.
std::array<double, kElementSamples> element_residual(const ProblemSpec& problem, const FeFunction& V, int e);

/// J(V) = 1/2 (Gamma_1 - Gamma_2) . n_1 with Gamma = alpha(x, |grad V|^2) grad V;
/// zero on boundary edges.
EdgeJump jump_residual(const ProblemSpec& problem, const FeFunction& V, int edge,
                       const EstimatorOptions& options = {});

double local_estimator(const ProblemSpec& problem, const FeFunction& V, int e);
double local_oscillation(const ProblemSpec& problem, const FeFunction& V, int e);

/// H ||R(V) - R(W)||_T + H^{1/2} ||J(V) - J(W)||_{dT}
double g_quantity(const ProblemSpec& problem, const FeFunction& V, const FeFunction& W, int e);
/// g^2 for every element, from two reports on the same mesh.
std::vector<double> g_squared(const Mesh& mesh, const EstimateReport& v, const EstimateReport& w,
                              Exec exec = Exec::parallel);

EstimateReport estimate_all(const ProblemSpec& problem, const FeFunction& V, Exec exec = Exec::parallel,
                            const EstimatorOptions& options = {});

/// `element,eta_sq,osc_sq` rows.
void write_estimator_csv(std::ostream& os, const EstimateReport& report);

}  // namespace afem
