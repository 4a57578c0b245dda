#include "afem/estimator.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "afem/quadrature.hpp"

namespace afem {

double EstimateReport::eta() const { return std::sqrt(eta_global_sq); }
double EstimateReport::osc() const { return std::sqrt(osc_global_sq); }

double EstimateReport::eta_sq_of(std::span<const int> elements) const {
  double s = 0.0;
  for (int e : elements) s += eta_sq[e];
  return s;
}

double EstimateReport::osc_sq_of(std::span<const int> elements) const {
  double s = 0.0;
  for (int e : elements) s += osc_sq[e];
  return s;
}

std::array<double, kElementSamples> element_residual(const ProblemSpec& problem, const FeFunction& V, int e) {
  const auto& rule = triangle_rule_deg4();
  const auto& a = *problem.coefficient;
  const auto c = V.space->mesh().corners(e);
  const Point g = V.gradient(e);
  const double s = dot(g, g);
  std::array<double, kElementSamples> r{};
  for (int q = 0; q < kElementSamples; ++q) {
    const Point x = rule.map(q, c);
    r[q] = -problem.f(x);
    if (a.depends_on_x()) r[q] -= dot(a.grad_x_alpha(x, s), g);
  }
  return r;
}

EdgeJump jump_residual(const ProblemSpec& problem, const FeFunction& V, int edge, const EstimatorOptions& options) {
  const Mesh& m = V.space->mesh();
  const Edge& ed = m.edge(edge);
  EdgeJump J;
  J.edge = edge;
  const Point a = m.vertex(ed.v[0]).p, b = m.vertex(ed.v[1]).p;
  const Point t = b - a;
  J.length = std::sqrt(dot(t, t));
  if (ed.boundary()) return J;

  const int e1 = ed.elem[0], e2 = ed.elem[1];
  Point n{t.y / J.length, -t.x / J.length};
  // Orient n outward from e1: away from its vertex off the edge.
  for (int v : m.element(e1).v)
    if (v != ed.v[0] && v != ed.v[1] && dot(m.vertex(v).p - a, n) > 0.0) n = -1.0 * n;

  const Point g1 = V.gradient(e1), g2 = V.gradient(e2);
  const double s1 = dot(g1, g1), s2 = dot(g2, g2);
  const double sign = options.flip_jump_sign ? -1.0 : 1.0;
  const auto& rule = edge_rule_gauss3();
  const auto& coef = *problem.coefficient;
  for (int q = 0; q < kEdgeSamples; ++q) {
    const Point x = rule.map(q, a, b);
    const double f1 = coef.alpha(x, s1) * dot(g1, n);
    const double f2 = coef.alpha(x, s2) * dot(g2, n);
    J.values[q] = 0.5 * (f1 - sign * f2);
  }
  return J;
}

namespace {

struct LocalTerms {
  double eta_sq, osc_sq;
};

double edge_norm_sq(const EdgeJump& J, bool centered) {
  const auto& rule = edge_rule_gauss3();
  double mean = 0.0;
  if (centered)
    for (int q = 0; q < kEdgeSamples; ++q) mean += rule.weights[q] * J.values[q];
  double s = 0.0;
  for (int q = 0; q < kEdgeSamples; ++q) s += rule.weights[q] * (J.values[q] - mean) * (J.values[q] - mean);
  return J.length * s;
}

double element_norm_sq(const double* R, double area, bool centered) {
  const auto& rule = triangle_rule_deg4();
  double mean = 0.0;
  if (centered)
    for (int q = 0; q < kElementSamples; ++q) mean += rule.weights[q] * R[q];
  double s = 0.0;
  for (int q = 0; q < kElementSamples; ++q) s += rule.weights[q] * (R[q] - mean) * (R[q] - mean);
  return area * s;
}

LocalTerms local_terms(const Mesh& m, int e, const double* R, const std::vector<EdgeJump>& jumps) {
  const double area = m.area(e);
  const double H = std::sqrt(area);
  double jt = 0.0, jo = 0.0;
  for (int i = 0; i < 3; ++i) {
    const EdgeJump& J = jumps[m.element_edge(e, i)];
    jt += edge_norm_sq(J, false);
    jo += edge_norm_sq(J, true);
  }
  return {H * H * element_norm_sq(R, area, false) + H * jt, H * H * element_norm_sq(R, area, true) + H * jo};
}

LocalTerms local_terms_direct(const ProblemSpec& problem, const FeFunction& V, int e) {
  const Mesh& m = V.space->mesh();
  std::vector<EdgeJump> jumps(m.num_edges());
  for (int i = 0; i < 3; ++i) {
    const int ed = m.element_edge(e, i);
    jumps[ed] = jump_residual(problem, V, ed);
  }
  const auto R = element_residual(problem, V, e);
  return local_terms(m, e, R.data(), jumps);
}

}  // namespace

double local_estimator(const ProblemSpec& problem, const FeFunction& V, int e) {
  return local_terms_direct(problem, V, e).eta_sq;
}

double local_oscillation(const ProblemSpec& problem, const FeFunction& V, int e) {
  return local_terms_direct(problem, V, e).osc_sq;
}

double g_quantity(const ProblemSpec& problem, const FeFunction& V, const FeFunction& W, int e) {
  if (V.space != W.space) throw std::invalid_argument("functions live in different spaces");
  const Mesh& m = V.space->mesh();
  const auto Rv = element_residual(problem, V, e), Rw = element_residual(problem, W, e);
  std::array<double, kElementSamples> dR{};
  for (int q = 0; q < kElementSamples; ++q) dR[q] = Rv[q] - Rw[q];
  const double area = m.area(e);
  double jn = 0.0;
  for (int i = 0; i < 3; ++i) {
    const int ed = m.element_edge(e, i);
    EdgeJump Jv = jump_residual(problem, V, ed), Jw = jump_residual(problem, W, ed);
    for (int q = 0; q < kEdgeSamples; ++q) Jv.values[q] -= Jw.values[q];
    jn += edge_norm_sq(Jv, false);
  }
  const double H = std::sqrt(area);
  return H * std::sqrt(element_norm_sq(dR.data(), area, false)) + std::sqrt(H) * std::sqrt(jn);
}

std::vector<double> g_squared(const Mesh& mesh, const EstimateReport& v, const EstimateReport& w, Exec exec) {
  std::vector<double> out(mesh.num_elements());
  kernels::for_each_index(out.size(), exec, [&](std::size_t e) {
    const int ei = static_cast<int>(e);
    std::array<double, kElementSamples> dR{};
    for (int q = 0; q < kElementSamples; ++q)
      dR[q] = v.residuals[kElementSamples * e + q] - w.residuals[kElementSamples * e + q];
    const double area = mesh.area(ei);
    double jn = 0.0;
    for (int i = 0; i < 3; ++i) {
      const int ed = mesh.element_edge(ei, i);
      EdgeJump d = v.jumps[ed];
      for (int q = 0; q < kEdgeSamples; ++q) d.values[q] -= w.jumps[ed].values[q];
      jn += edge_norm_sq(d, false);
    }
    const double H = std::sqrt(area);
    const double g = H * std::sqrt(element_norm_sq(dR.data(), area, false)) + std::sqrt(H) * std::sqrt(jn);
    out[e] = g * g;
  });
  return out;
}

EstimateReport estimate_all(const ProblemSpec& problem, const FeFunction& V, Exec exec,
                            const EstimatorOptions& options) {
  const Mesh& m = V.space->mesh();
  const std::size_t ne = m.num_elements(), nE = m.num_edges();
  EstimateReport rep;
  rep.residuals.resize(kElementSamples * ne);
  rep.jumps.resize(nE);
  kernels::for_each_index(ne, exec, [&](std::size_t e) {
    const auto R = element_residual(problem, V, static_cast<int>(e));
    std::copy(R.begin(), R.end(), rep.residuals.begin() + kElementSamples * e);
  });
  kernels::for_each_index(nE, exec, [&](std::size_t ed) {
    rep.jumps[ed] = jump_residual(problem, V, static_cast<int>(ed), options);
  });
  rep.eta_sq.resize(ne);
  rep.osc_sq.resize(ne);
  kernels::for_each_index(ne, exec, [&](std::size_t e) {
    const LocalTerms t = local_terms(m, static_cast<int>(e), &rep.residuals[kElementSamples * e], rep.jumps);
    rep.eta_sq[e] = t.eta_sq;
    rep.osc_sq[e] = t.osc_sq;
  });
  for (std::size_t e = 0; e < ne; ++e) {
    rep.eta_global_sq += rep.eta_sq[e];
    rep.osc_global_sq += rep.osc_sq[e];
  }
  return rep;
}

void write_estimator_csv(std::ostream& os, const EstimateReport& report) {
  os << "element,eta_sq,osc_sq\n";
  char buf[96];
  for (std::size_t e = 0; e < report.eta_sq.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e, report.eta_sq[e], report.osc_sq[e]);
    os << buf;
  }
}

}  // namespace afem
