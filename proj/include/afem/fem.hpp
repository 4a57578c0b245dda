#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "afem/kernels.hpp"
#include "afem/mesh.hpp"
#include "afem/problem.hpp"
#include "afem/sparse.hpp"

namespace afem {

struct ElementGeometry {
  double area = 0.0;
  std::array<Point, 3> grad;  // gradients of the barycentric coordinates
};

/// P1 Lagrange space with boundary vertices eliminated. Dofs enumerate the
/// interior vertices in vertex-id order.
class FeSpace {
 public:
  static constexpr int kBoundary = -1;

  explicit FeSpace(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  int num_dofs() const { return static_cast<int>(free_vertices_.size()); }
  int dof_of_vertex(int v) const { return dof_of_vertex_[v]; }
  std::span<const int> free_vertices() const { return free_vertices_; }
  const ElementGeometry& geometry(int e) const { return geometry_[e]; }

  std::span<const int> row_ptr() const { return row_ptr_; }
  std::span<const int> col() const { return col_; }
  /// CSR slot of local entry (i,j) of element e, or -1 if either is a boundary vertex.
  int slot(int e, int i, int j) const { return slot_[9 * e + 3 * i + j]; }

  // Contribution lists for deterministic scatter: entries of the per-element
  // buffers (3 per element for vectors, 9 for matrices) in element order.
  std::span<const int> vector_offsets() const { return vec_offsets_; }
  std::span<const int> vector_list() const { return vec_list_; }
  std::span<const int> matrix_offsets() const { return mat_offsets_; }
  std::span<const int> matrix_list() const { return mat_list_; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<int> dof_of_vertex_, free_vertices_;
  std::vector<ElementGeometry> geometry_;
  std::vector<int> row_ptr_, col_, slot_;
  std::vector<int> vec_offsets_, vec_list_, mat_offsets_, mat_list_;
};

std::shared_ptr<const FeSpace> build_space(std::shared_ptr<const Mesh> mesh);
std::shared_ptr<const FeSpace> build_space(const Mesh& mesh);

/// Nodal values at the free vertices; boundary values are implicitly 0.
struct FeFunction {
  std::shared_ptr<const FeSpace> space;
  std::vector<double> coeffs;

  FeFunction() = default;
  explicit FeFunction(std::shared_ptr<const FeSpace> s);
  FeFunction(std::shared_ptr<const FeSpace> s, std::vector<double> c);

  double vertex_value(int v) const;
  Point gradient(int e) const;
  double value(int e, const std::array<double, 3>& bary) const;
};

/// Nonlinear form, its derivative, the load and the energy on one space.
/// The load vector is assembled once on construction.
class DiscreteProblem {
 public:
  DiscreteProblem(std::shared_ptr<const FeSpace> space, ProblemSpec problem, Exec exec = Exec::parallel);

  const FeSpace& space() const { return *space_; }
  std::shared_ptr<const FeSpace> space_ptr() const { return space_; }
  const ProblemSpec& problem() const { return problem_; }
  Exec exec() const { return exec_; }

  /// int f phi_i
  std::span<const double> load() const { return load_; }
  /// a(U; U, phi_i) - L(phi_i)
  std::vector<double> residual(const FeFunction& U) const;
  /// int D^2 gamma(x, grad U) grad phi_j . grad phi_i
  CsrMatrix jacobian(const FeFunction& U) const;
  /// int gamma(x, grad V) - f V
  double energy(const FeFunction& V) const;

 private:
  double alpha_integral(int e, double s) const;
  double d_alpha_integral(int e, double s) const;
  double gamma_integral(int e, double s) const;

  std::shared_ptr<const FeSpace> space_;
  ProblemSpec problem_;
  Exec exec_;
  std::vector<double> element_load_;  // 3 per element
  std::vector<double> load_;
};

std::vector<double> residual_vector(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem,
                                    const FeFunction& U, Exec exec = Exec::parallel);
CsrMatrix jacobian_matrix(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem,
                          const FeFunction& U, Exec exec = Exec::parallel);
double energy(std::shared_ptr<const FeSpace> space, const ProblemSpec& problem, const FeFunction& V,
              Exec exec = Exec::parallel);

/// Poisson stiffness matrix (alpha == 1).
CsrMatrix stiffness_matrix(std::shared_ptr<const FeSpace> space, Exec exec = Exec::parallel);

/// ||grad(V - W)||, V and W in the same space.
double h1_seminorm_diff(const FeFunction& V, const FeFunction& W, Exec exec = Exec::parallel);
/// ||grad(V - u)|| by degree-4 quadrature against the exact gradient.
double h1_error_vs_exact(const FeFunction& V, const ProblemSpec& problem, Exec exec = Exec::parallel);

/// Nodal interpolant; throws ProblemError on non-finite values.
FeFunction interpolate(std::shared_ptr<const FeSpace> space, const std::function<double(Point)>& fn);

/// Prolongation of V into a space whose mesh refines V's mesh. Throws
/// MeshError when the meshes are not nested.
FeFunction transfer(const FeFunction& V, std::shared_ptr<const FeSpace> fine);

/// `dof <index> <value>` lines preceded by a `mesh <ref>` line.
void write_solution(std::ostream& os, const FeFunction& U, const std::string& mesh_ref);

}  // namespace afem
