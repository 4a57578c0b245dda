#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace afem {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the bisection closure exceeds its recursion bound, which
/// signals an initial labeling that is not compatible.
class RefineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vertex {
  Point p;
  bool on_boundary = false;
  // Endpoints of the edge this vertex bisected; {-1,-1} for initial vertices.
  std::array<int, 2> parents{-1, -1};
};

/// Address of an element in the bisection forest rooted at the initial mesh:
/// the root element plus one bit per bisection (0 = child holding v[0],
/// 1 = child holding v[1]).
struct Lineage {
  static constexpr int kMaxDepth = 128;

  int root = -1;
  int depth = 0;
  std::array<std::uint64_t, 2> path{0, 0};

  bool bit(int level) const { return (path[level / 64] >> (level % 64)) & 1u; }
  Lineage child(int which) const;
  Lineage prefix(int d) const;
  bool is_prefix_of(const Lineage& other) const;
  bool operator==(const Lineage& o) const = default;
};

struct LineageHash {
  std::size_t operator()(const Lineage& l) const noexcept;
};

/// Counter-clockwise triangle. The refinement edge is the edge opposite v[2].
struct Element {
  std::array<int, 3> v{};
  int generation = 0;
  Lineage lineage;
};

struct Edge {
  std::array<int, 2> v{};         // v[0] < v[1]
  std::array<int, 2> elem{-1, -1};  // elem[1] == -1 on the boundary
  bool boundary() const { return elem[1] < 0; }
};

using MarkedSet = std::vector<int>;

/// Initial triangulation shared by every mesh of one refinement family.
struct InitialMesh {
  std::uint64_t id = 0;
  std::vector<Point> points;
  std::vector<std::array<int, 3>> triangles;
  double area = 0.0;
};

/// Immutable conforming triangulation. Refinement and overlay return new
/// meshes; all derived adjacency is built on construction.
class Mesh {
 public:
  /// Builds an initial mesh (a new refinement family). Element vertex order
  /// fixes the refinement edges.
  static Mesh make_initial(std::vector<Point> points, std::vector<std::array<int, 3>> triangles);

  Mesh(std::vector<Vertex> vertices, std::vector<Element> elements,
       std::shared_ptr<const InitialMesh> initial);

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vertex& vertex(int i) const { return vertices_[i]; }
  const Element& element(int i) const { return elements_[i]; }
  const Edge& edge(int i) const { return edges_[i]; }

  /// Edge index opposite local vertex i of element e.
  int element_edge(int e, int i) const { return element_edges_[3 * e + i]; }
  std::optional<int> find_edge(int a, int b) const;
  std::span<const int> vertex_elements(int v) const;

  const InitialMesh& initial() const { return *initial_; }
  std::shared_ptr<const InitialMesh> initial_ptr() const { return initial_; }
  std::uint64_t lineage_id() const { return initial_->id; }
  Mesh initial_mesh() const;

  double area(int e) const;
  double total_area() const;
  Point barycenter(int e) const;
  std::array<Point, 3> corners(int e) const;

 private:
  void build_adjacency();

  std::vector<Vertex> vertices_;
  std::vector<Element> elements_;
  std::vector<Edge> edges_;
  std::vector<int> element_edges_;
  std::unordered_map<std::uint64_t, int> edge_index_;
  std::vector<int> vertex_element_offsets_;
  std::vector<int> vertex_element_list_;
  std::shared_ptr<const InitialMesh> initial_;
};

std::uint64_t edge_key(int a, int b);

/// H_T = |T|^{1/2}.
double mesh_size(const Mesh& mesh, int element);

/// Elements sharing at least one vertex with `element` (excluding itself).
std::vector<int> neighbors(const Mesh& mesh, int element);
/// neighbors() plus the element itself, sorted.
std::vector<int> patch(const Mesh& mesh, int element);

struct RefineResult {
  Mesh mesh;
  // For every output element, the input element it descends from.
  std::vector<int> parent;
  // For every input element, whether it was bisected.
  std::vector<char> refined;
};

/// Newest-vertex bisection: every marked element is bisected at least n times,
/// followed by the recursive conformity closure.
RefineResult refine_with_history(const Mesh& mesh, std::span<const int> marked, int n = 1);
Mesh refine(const Mesh& mesh, std::span<const int> marked, int n = 1);
Mesh refine_uniform(const Mesh& mesh, int times = 1);

/// Smallest conforming common refinement of two meshes of the same family.
Mesh overlay(const Mesh& a, const Mesh& b);

struct ConformityReport {
  bool ok = true;
  std::vector<std::string> diagnostics;
};
ConformityReport check_conformity(const Mesh& mesh);

/// diam(T) / inradius(T).
double element_shape_ratio(const Mesh& mesh, int element);
/// Max over elements of diam/inradius.
double shape_regularity(const Mesh& mesh);

/// Runs uniform refinement to detect labelings on which the closure does not
/// terminate within its bound. Returns false instead of throwing.
bool probe_label_compatibility(const Mesh& mesh, int levels = 2);

struct ComplexityAudit {
  std::vector<double> lhs;                  // #T_k - #T_0
  std::vector<double> rhs;                  // sum_{i<k} #M_i
  std::vector<std::optional<double>> ratio; // lhs/rhs, empty when rhs == 0
  std::optional<double> c_s;                // max ratio
};

struct RefineStep {
  std::size_t num_elements = 0;  // #T_k
  std::size_t num_marked = 0;    // #M_k
};
/// `history[k]` is the mesh size and marked count of iteration k; history[0]
/// is the initial mesh.
ComplexityAudit complexity_audit(std::span<const RefineStep> history);

namespace builtin {
/// Unit square as two triangles sharing the diagonal as refinement edge.
Mesh unit_square();
/// (-1,1)^2 minus [0,1)x(-1,0] as six triangles.
Mesh lshape();
/// Square [0,1]^2 split into k x k cells, two triangles each, with
/// compatible labels.
Mesh square_grid(int k);
Mesh by_name(const std::string& name);
}  // namespace builtin

}  // namespace afem
