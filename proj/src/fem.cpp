#include "afem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_map>

#include "afem/quadrature.hpp"

namespace afem {

FeSpace::FeSpace(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
  const Mesh& m = *mesh_;
  const int nv = static_cast<int>(m.num_vertices());
  const int ne = static_cast<int>(m.num_elements());

  dof_of_vertex_.assign(nv, kBoundary);
  for (int v = 0; v < nv; ++v)
    if (!m.vertex(v).on_boundary) {
      dof_of_vertex_[v] = static_cast<int>(free_vertices_.size());
      free_vertices_.push_back(v);
    }

  geometry_.resize(ne);
  for (int e = 0; e < ne; ++e) {
    auto c = m.corners(e);
    const double a2 = cross(c[1] - c[0], c[2] - c[0]);
    ElementGeometry& g = geometry_[e];
    g.area = 0.5 * a2;
    for (int i = 0; i < 3; ++i) {
      Point p = c[(i + 1) % 3], q = c[(i + 2) % 3];
      g.grad[i] = {(p.y - q.y) / a2, (q.x - p.x) / a2};
    }
  }

  const int n = num_dofs();
  row_ptr_.assign(n + 1, 0);
  std::vector<int> row;
  for (int i = 0; i < n; ++i) {
    row.clear();
    for (int e : m.vertex_elements(free_vertices_[i]))
      for (int v : m.element(e).v)
        if (int d = dof_of_vertex_[v]; d >= 0) row.push_back(d);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    col_.insert(col_.end(), row.begin(), row.end());
    row_ptr_[i + 1] = static_cast<int>(col_.size());
  }

  slot_.assign(9 * static_cast<std::size_t>(ne), -1);
  vec_offsets_.assign(n + 1, 0);
  mat_offsets_.assign(col_.size() + 1, 0);
  for (int e = 0; e < ne; ++e) {
    const auto& v = m.element(e).v;
    for (int i = 0; i < 3; ++i) {
      const int di = dof_of_vertex_[v[i]];
      if (di < 0) continue;
      ++vec_offsets_[di + 1];
      for (int j = 0; j < 3; ++j) {
        const int dj = dof_of_vertex_[v[j]];
        if (dj < 0) continue;
        auto b = col_.begin() + row_ptr_[di], end = col_.begin() + row_ptr_[di + 1];
        const int s = static_cast<int>(std::lower_bound(b, end, dj) - col_.begin());
        slot_[9 * e + 3 * i + j] = s;
        ++mat_offsets_[s + 1];
      }
    }
  }
  for (int i = 0; i < n; ++i) vec_offsets_[i + 1] += vec_offsets_[i];
  for (std::size_t s = 0; s < col_.size(); ++s) mat_offsets_[s + 1] += mat_offsets_[s];
  vec_list_.resize(vec_offsets_[n]);
  mat_list_.resize(mat_offsets_[col_.size()]);
  std::vector<int> vfill(vec_offsets_.begin(), vec_offsets_.end() - 1);
  std::vector<int> mfill(mat_offsets_.begin(), mat_offsets_.end() - 1);
  for (int e = 0; e < ne; ++e) {
    const auto& v = m.element(e).v;
    for (int i = 0; i < 3; ++i) {
      const int di = dof_of_vertex_[v[i]];
      if (di < 0) continue;
      vec_list_[vfill[di]++] = 3 * e + i;
      for (int j = 0; j < 3; ++j) {
        const int s = slot_[9 * e + 3 * i + j];
        if (s >= 0) mat_list_[mfill[s]++] = 9 * e + 3 * i + j;
      }
    }
  }
}

std::shared_ptr<const FeSpace> build_space(std::shared_ptr<const Mesh> mesh) {
  return std::make_shared<const FeSpace>(std::move(mesh));
}

std::shared_ptr<const FeSpace> build_space(const Mesh& mesh) {
  return build_space(std::make_shared<const Mesh>(mesh));
}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> s) : space(std::move(s)) {
  coeffs.assign(space->num_dofs(), 0.0);
}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> s, std::vector<double> c)
    : space(std::move(s)), coeffs(std::move(c)) {
  if (static_cast<int>(coeffs.size()) != space->num_dofs())
    throw std::invalid_argument("coefficient vector does not match the space");
}

double FeFunction::vertex_value(int v) const {
  const int d = space->dof_of_vertex(v);
  return d < 0 ? 0.0 : coeffs[d];
}

Point FeFunction::gradient(int e) const {
  const auto& v = space->mesh().element(e).v;
  const auto& g = space->geometry(e);
  Point r{0.0, 0.0};
  for (int i = 0; i < 3; ++i) r = r + vertex_value(v[i]) * g.grad[i];
  return r;
}

double FeFunction::value(int e, const std::array<double, 3>& bary) const {
  const auto& v = space->mesh().element(e).v;
  return bary[0] * vertex_value(v[0]) + bary[1] * vertex_value(v[1]) + bary[2] * vertex_value(v[2]);
}

namespace {

std::vector<double> scatter_vector(const FeSpace& space, const std::vector<double>& contrib, Exec exec) {
  std::vector<double> out(space.num_dofs(), 0.0);
  if (exec == Exec::parallel) {
    kernels::gather(space.vector_offsets(), space.vector_list(), contrib, out, exec);
  } else {
    const Mesh& m = space.mesh();
    for (std::size_t e = 0; e < m.num_elements(); ++e)
      for (int i = 0; i < 3; ++i)
        if (int d = space.dof_of_vertex(m.element(e).v[i]); d >= 0) out[d] += contrib[3 * e + i];
  }
  return out;
}

CsrMatrix scatter_matrix(const FeSpace& space, const std::vector<double>& contrib, Exec exec) {
  CsrMatrix A;
  A.n = space.num_dofs();
  A.row_ptr.assign(space.row_ptr().begin(), space.row_ptr().end());
  A.col.assign(space.col().begin(), space.col().end());
  A.val.assign(A.col.size(), 0.0);
  A.symmetric = true;
  if (exec == Exec::parallel) {
    kernels::gather(space.matrix_offsets(), space.matrix_list(), contrib, A.val, exec);
  } else {
    for (std::size_t e = 0; e < space.mesh().num_elements(); ++e)
      for (int k = 0; k < 9; ++k)
        if (int s = space.slot(static_cast<int>(e), k / 3, k % 3); s >= 0) A.val[s] += contrib[9 * e + k];
  }
  return A;
}

double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

void local_matrix(const ElementGeometry& g, const Sym2& H, double* out) {
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      const double k = dot(g.grad[i], H.apply(g.grad[j]));
      out[3 * i + j] = k;
      out[3 * j + i] = k;
    }
}

}  // namespace

DiscreteProblem::DiscreteProblem(std::shared_ptr<const FeSpace> space, ProblemSpec problem, Exec exec)
    : space_(std::move(space)), problem_(std::move(problem)), exec_(exec) {
  const Mesh& m = space_->mesh();
  const auto& rule = triangle_rule_deg4();
  element_load_.assign(3 * m.num_elements(), 0.0);
  kernels::for_each_index(m.num_elements(), exec_, [&](std::size_t e) {
    const auto c = m.corners(static_cast<int>(e));
    const double area = space_->geometry(static_cast<int>(e)).area;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double fw = area * rule.weights[q] * problem_.f(rule.map(q, c));
      for (int i = 0; i < 3; ++i) element_load_[3 * e + i] += fw * rule.points[q][i];
    }
  });
  load_ = scatter_vector(*space_, element_load_, exec_);
}

double DiscreteProblem::alpha_integral(int e, double s) const {
  const auto& a = *problem_.coefficient;
  const double area = space_->geometry(e).area;
  if (!a.depends_on_x()) return area * a.alpha(Point{}, s);
  const auto& rule = triangle_rule_deg4();
  const auto c = space_->mesh().corners(e);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.weights[q] * a.alpha(rule.map(q, c), s);
  return area * sum;
}

double DiscreteProblem::d_alpha_integral(int e, double s) const {
  const auto& a = *problem_.coefficient;
  const double area = space_->geometry(e).area;
  if (!a.depends_on_x()) return area * a.d_alpha(Point{}, s);
  const auto& rule = triangle_rule_deg4();
  const auto c = space_->mesh().corners(e);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.weights[q] * a.d_alpha(rule.map(q, c), s);
  return area * sum;
}

double DiscreteProblem::gamma_integral(int e, double s) const {
  const auto& a = *problem_.coefficient;
  const double area = space_->geometry(e).area;
  if (!a.depends_on_x()) return area * a.half_integral(Point{}, s);
  const auto& rule = triangle_rule_deg4();
  const auto c = space_->mesh().corners(e);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.weights[q] * a.half_integral(rule.map(q, c), s);
  return area * sum;
}

std::vector<double> DiscreteProblem::residual(const FeFunction& U) const {
  const Mesh& m = space_->mesh();
  std::vector<double> contrib(3 * m.num_elements());
  kernels::for_each_index(m.num_elements(), exec_, [&](std::size_t e) {
    const int ei = static_cast<int>(e);
    const Point xi = U.gradient(ei);
    const double A = alpha_integral(ei, dot(xi, xi));
    const auto& g = space_->geometry(ei);
    for (int i = 0; i < 3; ++i) contrib[3 * e + i] = A * dot(xi, g.grad[i]) - element_load_[3 * e + i];
  });
  return scatter_vector(*space_, contrib, exec_);
}

CsrMatrix DiscreteProblem::jacobian(const FeFunction& U) const {
  const Mesh& m = space_->mesh();
  std::vector<double> contrib(9 * m.num_elements());
  kernels::for_each_index(m.num_elements(), exec_, [&](std::size_t e) {
    const int ei = static_cast<int>(e);
    const Point xi = U.gradient(ei);
    const double s = dot(xi, xi);
    const double A = alpha_integral(ei, s);
    const double D = d_alpha_integral(ei, s);
    Sym2 H{2.0 * D * xi.x * xi.x + A, 2.0 * D * xi.x * xi.y, 2.0 * D * xi.y * xi.y + A};
    local_matrix(space_->geometry(ei), H, &contrib[9 * e]);
  });
  return scatter_matrix(*space_, contrib, exec_);
}

double DiscreteProblem::energy(const FeFunction& V) const {
  const Mesh& m = space_->mesh();
  std::vector<double> contrib(m.num_elements());
  kernels::for_each_index(m.num_elements(), exec_, [&](std::size_t e) {
    const Point xi = V.gradient(static_cast<int>(e));
    contrib[e] = gamma_integral(static_cast<int>(e), dot(xi, xi));
  });
  std::vector<double> lv(space_->num_dofs());
  for (int i = 0; i < space_->num_dofs(); ++i) lv[i] = load_[i] * V.coeffs[i];
  return kernels::compensated_sum(contrib) - kernels::compensated_sum(lv);
}

std::vector<double> residual_vector(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem,
                                    const FeFunction& U, Exec exec) {
  return DiscreteProblem(std::move(space), problem, exec).residual(U);
}

CsrMatrix jacobian_matrix(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem,
                          const FeFunction& U, Exec exec) {
  return DiscreteProblem(std::move(space), problem, exec).jacobian(U);
}

double energy(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem, const FeFunction& V,
              Exec exec) {
  return DiscreteProblem(std::move(space), problem, exec).energy(V);
}

CsrMatrix stiffness_matrix(std::shared_ptr<const FeSpace> space, Exec exec) {
  const std::size_t ne = space->mesh().num_elements();
  std::vector<double> contrib(9 * ne);
  kernels::for_each_index(ne, exec, [&](std::size_t e) {
    const auto& g = space->geometry(static_cast<int>(e));
    local_matrix(g, Sym2{g.area, 0.0, g.area}, &contrib[9 * e]);
  });
  return scatter_matrix(*space, contrib, exec);
}

double h1_seminorm_diff(const FeFunction& V, const FeFunction& W, Exec exec) {
  if (V.space != W.space) throw std::invalid_argument("functions live in different spaces");
  const FeSpace& space = *V.space;
  std::vector<double> contrib(space.mesh().num_elements());
  kernels::for_each_index(contrib.size(), exec, [&](std::size_t e) {
    const int ei = static_cast<int>(e);
    const Point d = V.gradient(ei) - W.gradient(ei);
    contrib[e] = space.geometry(ei).area * dot(d, d);
  });
  return std::sqrt(ordered_sum(contrib));
}

double h1_error_vs_exact(const FeFunction& V, const ProblemSpec& problem, Exec exec) {
  if (!problem.exact_grad_u) throw ProblemError("problem '" + problem.name + "' has no exact solution");
  const FeSpace& space = *V.space;
  const auto& rule = triangle_rule_deg4();
  const auto& grad_u = *problem.exact_grad_u;
  std::vector<double> contrib(space.mesh().num_elements());
  kernels::for_each_index(contrib.size(), exec, [&](std::size_t e) {
    const int ei = static_cast<int>(e);
    const Point gv = V.gradient(ei);
    const auto c = space.mesh().corners(ei);
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point d = gv - grad_u(rule.map(q, c));
      sum += rule.weights[q] * dot(d, d);
    }
    contrib[e] = space.geometry(ei).area * sum;
  });
  return std::sqrt(ordered_sum(contrib));
}

FeFunction interpolate(std::shared_ptr<const FeSpace> space, const std::function<double(Point)>& fn) {
  FeFunction V(space);
  const auto fv = space->free_vertices();
  for (std::size_t i = 0; i < fv.size(); ++i) {
    const double y = fn(space->mesh().vertex(fv[i]).p);
    if (!std::isfinite(y)) throw ProblemError("interpolated function is not finite at a vertex");
    V.coeffs[i] = y;
  }
  return V;
}

FeFunction transfer(const FeFunction& V, std::shared_ptr<const FeSpace> fine) {
  if (V.space == fine) return V;
  const Mesh& cm = V.space->mesh();
  const Mesh& fm = fine->mesh();
  if (cm.lineage_id() != fm.lineage_id()) throw MeshError("transfer between unrelated meshes");
  std::unordered_map<Lineage, int, LineageHash> coarse;
  coarse.reserve(cm.num_elements());
  for (std::size_t e = 0; e < cm.num_elements(); ++e) coarse.emplace(cm.element(e).lineage, static_cast<int>(e));

  FeFunction W(fine);
  std::vector<char> done(fine->num_dofs(), 0);
  for (std::size_t e = 0; e < fm.num_elements(); ++e) {
    const Element& el = fm.element(e);
    int anc = -1;
    for (int d = el.lineage.depth; d >= 0 && anc < 0; --d)
      if (auto it = coarse.find(el.lineage.prefix(d)); it != coarse.end()) anc = it->second;
    if (anc < 0) throw MeshError("target mesh does not refine the source mesh");
    const auto c = cm.corners(anc);
    const double a2 = cross(c[1] - c[0], c[2] - c[0]);
    for (int v : el.v) {
      const int d = fine->dof_of_vertex(v);
      if (d < 0 || done[d]) continue;
      const Point p = fm.vertex(v).p;
      const double l1 = cross(c[2] - p, c[0] - p) / a2;
      const double l2 = cross(c[0] - p, c[1] - p) / a2;
      W.coeffs[d] = V.value(anc, {1.0 - l1 - l2, l1, l2});
      done[d] = 1;
    }
  }
  return W;
}

void write_solution(std::ostream& os, const FeFunction& U, const std::string& mesh_ref) {
  os << "mesh " << mesh_ref << '\n';
  char buf[64];
  for (std::size_t i = 0; i < U.coeffs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", U.coeffs[i]);
    os << "dof " << i << ' ' << buf << '\n';
  }
}

}  // namespace afem
