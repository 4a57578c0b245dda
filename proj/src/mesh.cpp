#include "afem/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace afem {

namespace {

std::atomic<std::uint64_t> next_family_id{1};

constexpr std::size_t kMaxRefinedElements = std::size_t{1} << 26;

double signed_area(Point a, Point b, Point c) { return 0.5 * cross(b - a, c - a); }

}  // namespace

// ---------------------------------------------------------------------------
// Lineage

Lineage Lineage::child(int which) const {
  if (depth >= kMaxDepth) throw RefineError("bisection depth exceeds lineage capacity");
  Lineage c = *this;
  if (which) c.path[depth / 64] |= std::uint64_t{1} << (depth % 64);
  c.depth = depth + 1;
  return c;
}

Lineage Lineage::prefix(int d) const {
  Lineage p;
  p.root = root;
  p.depth = d;
  for (int w = 0; w < 2; ++w) {
    int bits = std::clamp(d - 64 * w, 0, 64);
    if (bits == 64) p.path[w] = path[w];
    else if (bits > 0) p.path[w] = path[w] & ((std::uint64_t{1} << bits) - 1);
  }
  return p;
}

bool Lineage::is_prefix_of(const Lineage& other) const {
  return root == other.root && depth <= other.depth && other.prefix(depth) == *this;
}

std::size_t LineageHash::operator()(const Lineage& l) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(l.root) * 0x9E3779B97F4A7C15ull;
  h ^= static_cast<std::uint64_t>(l.depth) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
  h ^= l.path[0] + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  h ^= l.path[1] + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

std::uint64_t edge_key(int a, int b) {
  auto lo = static_cast<std::uint64_t>(std::min(a, b));
  auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

// ---------------------------------------------------------------------------
// Mesh

Mesh Mesh::make_initial(std::vector<Point> points, std::vector<std::array<int, 3>> triangles) {
  auto init = std::make_shared<InitialMesh>();
  init->id = next_family_id.fetch_add(1);
  const int nv = static_cast<int>(points.size());
  for (const auto& t : triangles) {
    for (int i : t)
      if (i < 0 || i >= nv) throw MeshError("element references unknown vertex " + std::to_string(i));
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw MeshError("element with repeated vertex");
    double a = signed_area(points[t[0]], points[t[1]], points[t[2]]);
    if (!(a > 0.0)) throw MeshError("element is not counter-clockwise or has zero area");
    init->area += a;
  }
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw MeshError("non-finite vertex coordinate");
  init->points = std::move(points);
  init->triangles = std::move(triangles);

  std::vector<Vertex> verts(init->points.size());
  for (std::size_t i = 0; i < verts.size(); ++i) verts[i].p = init->points[i];
  std::vector<Element> elems(init->triangles.size());
  for (std::size_t e = 0; e < elems.size(); ++e) {
    elems[e].v = init->triangles[e];
    elems[e].lineage.root = static_cast<int>(e);
  }
  return Mesh(std::move(verts), std::move(elems), std::move(init));
}

Mesh::Mesh(std::vector<Vertex> vertices, std::vector<Element> elements,
           std::shared_ptr<const InitialMesh> initial)
    : vertices_(std::move(vertices)), elements_(std::move(elements)), initial_(std::move(initial)) {
  build_adjacency();
}

void Mesh::build_adjacency() {
  const int ne = static_cast<int>(elements_.size());
  element_edges_.assign(3 * elements_.size(), -1);
  edge_index_.reserve(3 * elements_.size());
  for (int e = 0; e < ne; ++e) {
    const auto& v = elements_[e].v;
    for (int i = 0; i < 3; ++i) {
      int a = v[(i + 1) % 3], b = v[(i + 2) % 3];
      auto [it, inserted] = edge_index_.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
      if (inserted) {
        Edge ed;
        ed.v = {std::min(a, b), std::max(a, b)};
        ed.elem = {e, -1};
        edges_.push_back(ed);
      } else {
        Edge& ed = edges_[it->second];
        if (ed.elem[1] >= 0)
          throw MeshError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                          ") shared by more than two elements");
        ed.elem[1] = e;
      }
      element_edges_[3 * e + i] = it->second;
    }
  }
  for (auto& v : vertices_) v.on_boundary = false;
  for (const auto& ed : edges_)
    if (ed.boundary()) {
      vertices_[ed.v[0]].on_boundary = true;
      vertices_[ed.v[1]].on_boundary = true;
    }

  const int nv = static_cast<int>(vertices_.size());
  vertex_element_offsets_.assign(nv + 1, 0);
  for (const auto& el : elements_)
    for (int i : el.v) ++vertex_element_offsets_[i + 1];
  for (int i = 0; i < nv; ++i) vertex_element_offsets_[i + 1] += vertex_element_offsets_[i];
  vertex_element_list_.resize(vertex_element_offsets_[nv]);
  std::vector<int> fill(vertex_element_offsets_.begin(), vertex_element_offsets_.end() - 1);
  for (int e = 0; e < ne; ++e)
    for (int i : elements_[e].v) vertex_element_list_[fill[i]++] = e;
}

std::optional<int> Mesh::find_edge(int a, int b) const {
  auto it = edge_index_.find(edge_key(a, b));
  if (it == edge_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const int> Mesh::vertex_elements(int v) const {
  return {vertex_element_list_.data() + vertex_element_offsets_[v],
          static_cast<std::size_t>(vertex_element_offsets_[v + 1] - vertex_element_offsets_[v])};
}

Mesh Mesh::initial_mesh() const {
  std::vector<Vertex> verts(initial_->points.size());
  for (std::size_t i = 0; i < verts.size(); ++i) verts[i].p = initial_->points[i];
  std::vector<Element> elems(initial_->triangles.size());
  for (std::size_t e = 0; e < elems.size(); ++e) {
    elems[e].v = initial_->triangles[e];
    elems[e].lineage.root = static_cast<int>(e);
  }
  return Mesh(std::move(verts), std::move(elems), initial_);
}

std::array<Point, 3> Mesh::corners(int e) const {
  const auto& v = elements_.at(e).v;
  return {vertices_[v[0]].p, vertices_[v[1]].p, vertices_[v[2]].p};
}

double Mesh::area(int e) const {
  auto c = corners(e);
  return signed_area(c[0], c[1], c[2]);
}

double Mesh::total_area() const {
  double s = 0.0;
  for (int e = 0; e < static_cast<int>(elements_.size()); ++e) s += area(e);
  return s;
}

Point Mesh::barycenter(int e) const {
  auto c = corners(e);
  return (1.0 / 3.0) * (c[0] + c[1] + c[2]);
}

double mesh_size(const Mesh& mesh, int element) {
  if (element < 0 || element >= static_cast<int>(mesh.num_elements()))
    throw MeshError("unknown element id " + std::to_string(element));
  return std::sqrt(mesh.area(element));
}

std::vector<int> neighbors(const Mesh& mesh, int element) {
  if (element < 0 || element >= static_cast<int>(mesh.num_elements()))
    throw MeshError("unknown element id " + std::to_string(element));
  std::vector<int> out;
  for (int v : mesh.element(element).v)
    for (int e : mesh.vertex_elements(v))
      if (e != element) out.push_back(e);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> patch(const Mesh& mesh, int element) {
  auto out = neighbors(mesh, element);
  out.insert(std::upper_bound(out.begin(), out.end(), element), element);
  return out;
}

// ---------------------------------------------------------------------------
// Refinement

namespace {

class Bisector {
 public:
  explicit Bisector(const Mesh& mesh)
      : verts_(mesh.vertices()), elems_(mesh.elements()), initial_(mesh.initial_ptr()) {
    const int ne = static_cast<int>(elems_.size());
    alive_.assign(ne, 1);
    origin_.resize(ne);
    remaining_.assign(ne, 0);
    for (int e = 0; e < ne; ++e) origin_[e] = e;
    edge_elems_.reserve(4 * ne);
    for (int e = 0; e < ne; ++e)
      for (int i = 0; i < 3; ++i) attach(e, elems_[e].v[i], elems_[e].v[(i + 1) % 3]);
    depth_bound_ = std::max<int>(ne, 64);
  }

  void set_remaining(int e, int n) { remaining_[e] = std::max(remaining_[e], n); }

  void run() {
    // Children are appended, so a single forward sweep reaches every element
    // that still owes bisections.
    for (std::size_t e = 0; e < elems_.size(); ++e)
      if (alive_[e] && remaining_[e] > 0) bisect(static_cast<int>(e), 0);
  }

  RefineResult finish(std::size_t input_elements) && {
    std::vector<Element> out;
    std::vector<int> parent;
    std::vector<char> refined(input_elements, 0);
    for (std::size_t e = 0; e < elems_.size(); ++e) {
      if (alive_[e]) {
        out.push_back(elems_[e]);
        parent.push_back(origin_[e]);
      } else if (e < input_elements) {
        refined[e] = 1;
      }
    }
    return RefineResult{Mesh(std::move(verts_), std::move(out), initial_), std::move(parent),
                        std::move(refined)};
  }

 private:
  void attach(int e, int a, int b) {
    auto& slot = edge_elems_.try_emplace(edge_key(a, b), std::array<int, 2>{-1, -1}).first->second;
    if (slot[0] < 0) slot[0] = e;
    else slot[1] = e;
  }
  void detach(int e, int a, int b) {
    auto it = edge_elems_.find(edge_key(a, b));
    auto& slot = it->second;
    if (slot[0] == e) slot[0] = slot[1];
    slot[1] = -1;
    if (slot[0] < 0) edge_elems_.erase(it);
  }
  int across(int e, int a, int b) const {
    const auto& slot = edge_elems_.at(edge_key(a, b));
    return slot[0] == e ? slot[1] : slot[0];
  }

  int midpoint(int a, int b) {
    auto [it, inserted] = midpoints_.try_emplace(edge_key(a, b), static_cast<int>(verts_.size()));
    if (inserted) {
      Vertex m;
      m.p = 0.5 * (verts_[a].p + verts_[b].p);
      m.parents = {std::min(a, b), std::max(a, b)};
      verts_.push_back(m);
    }
    return it->second;
  }

  void split(int t, int m) {
    Element parent = elems_[t];
    const auto [v0, v1, v2] = parent.v;
    alive_[t] = 0;
    detach(t, v0, v1);
    detach(t, v1, v2);
    detach(t, v2, v0);
    const int rem = std::max(0, remaining_[t] - 1);
    const std::array<std::array<int, 3>, 2> kids{{{v2, v0, m}, {v1, v2, m}}};
    for (int c = 0; c < 2; ++c) {
      Element child;
      child.v = kids[c];
      child.generation = parent.generation + 1;
      child.lineage = parent.lineage.child(c);
      const int id = static_cast<int>(elems_.size());
      elems_.push_back(child);
      alive_.push_back(1);
      origin_.push_back(origin_[t]);
      remaining_.push_back(rem);
      for (int i = 0; i < 3; ++i) attach(id, child.v[i], child.v[(i + 1) % 3]);
    }
  }

  void bisect(int t, int depth) {
    if (depth > depth_bound_)
      throw RefineError("bisection closure exceeded depth bound " + std::to_string(depth_bound_) +
                        "; initial labeling is not compatible");
    const int a = elems_[t].v[0], b = elems_[t].v[1];
    int nb = across(t, a, b);
    while (nb >= 0 && edge_key(elems_[nb].v[0], elems_[nb].v[1]) != edge_key(a, b)) {
      bisect(nb, depth + 1);
      nb = across(t, a, b);
    }
    const int m = midpoint(a, b);
    split(t, m);
    if (nb >= 0) split(nb, m);
  }

  std::vector<Vertex> verts_;
  std::vector<Element> elems_;
  std::vector<char> alive_;
  std::vector<int> origin_;
  std::vector<int> remaining_;
  std::unordered_map<std::uint64_t, std::array<int, 2>> edge_elems_ = {};
  std::unordered_map<std::uint64_t, int> midpoints_;
  std::shared_ptr<const InitialMesh> initial_;
  int depth_bound_ = 0;
};

}  // namespace

RefineResult refine_with_history(const Mesh& mesh, std::span<const int> marked, int n) {
  if (n < 1) throw RefineError("number of bisections per marked element must be >= 1");
  const int ne = static_cast<int>(mesh.num_elements());
  for (int e : marked) {
    if (e < 0 || e >= ne) throw MeshError("marked element id " + std::to_string(e) + " out of range");
    if (mesh.element(e).generation + n > Lineage::kMaxDepth)
      throw RefineError("bisection depth exceeds lineage capacity");
  }
  // each marked element alone yields 2^n children
  if (std::ldexp(static_cast<double>(marked.size()), n) > static_cast<double>(kMaxRefinedElements))
    throw RefineError(std::to_string(marked.size()) + " elements with " + std::to_string(n) +
                      " bisections each exceed " + std::to_string(kMaxRefinedElements) + " elements");
  Bisector bis(mesh);
  for (int e : marked) bis.set_remaining(e, n);
  bis.run();
  return std::move(bis).finish(mesh.num_elements());
}

Mesh refine(const Mesh& mesh, std::span<const int> marked, int n) {
  return refine_with_history(mesh, marked, n).mesh;
}

Mesh refine_uniform(const Mesh& mesh, int times) {
  Mesh current = mesh;
  for (int i = 0; i < times; ++i) {
    std::vector<int> all(current.num_elements());
    for (std::size_t e = 0; e < all.size(); ++e) all[e] = static_cast<int>(e);
    current = refine(current, all, 1);
  }
  return current;
}

Mesh overlay(const Mesh& a, const Mesh& b) {
  if (a.lineage_id() != b.lineage_id())
    throw MeshError("overlay requires meshes refined from the same initial mesh");
  std::unordered_set<Lineage, LineageHash> interior;
  for (const Mesh* m : {&a, &b})
    for (const auto& el : m->elements())
      for (int d = 0; d < el.lineage.depth; ++d) interior.insert(el.lineage.prefix(d));

  Mesh current = a.initial_mesh();
  for (;;) {
    std::vector<int> marked;
    for (int e = 0; e < static_cast<int>(current.num_elements()); ++e)
      if (interior.count(current.element(e).lineage)) marked.push_back(e);
    if (marked.empty()) break;
    current = refine(current, marked, 1);
  }
  return current;
}

// ---------------------------------------------------------------------------
// Diagnostics

ConformityReport check_conformity(const Mesh& mesh) {
  ConformityReport rep;
  auto fail = [&](std::string msg) {
    rep.ok = false;
    rep.diagnostics.push_back(std::move(msg));
  };
  const int ne = static_cast<int>(mesh.num_elements());
  for (int e = 0; e < ne; ++e)
    if (!(mesh.area(e) > 0.0)) fail("element " + std::to_string(e) + " has non-positive area");

  // Interior edges must be traversed in opposite directions by their two elements.
  auto direction = [&](int e, const Edge& ed) {
    const auto& v = mesh.element(e).v;
    for (int i = 0; i < 3; ++i)
      if (v[i] == ed.v[0] && v[(i + 1) % 3] == ed.v[1]) return 1;
    return -1;
  };
  // Boundary-edge graph, used to find vertices lying inside another boundary edge.
  std::unordered_map<int, std::vector<int>> boundary_adj;
  for (const auto& ed : mesh.edges()) {
    if (ed.boundary()) {
      boundary_adj[ed.v[0]].push_back(ed.v[1]);
      boundary_adj[ed.v[1]].push_back(ed.v[0]);
    } else if (direction(ed.elem[0], ed) == direction(ed.elem[1], ed)) {
      fail("edge (" + std::to_string(ed.v[0]) + "," + std::to_string(ed.v[1]) +
           ") has overlapping incident elements");
    }
  }
  for (const auto& ed : mesh.edges()) {
    if (!ed.boundary()) continue;
    const Point pa = mesh.vertex(ed.v[0]).p, pb = mesh.vertex(ed.v[1]).p;
    const Point d = pb - pa;
    const double len2 = dot(d, d);
    for (int m : boundary_adj[ed.v[0]]) {
      if (m == ed.v[1]) continue;
      const Point q = mesh.vertex(m).p - pa;
      const double t = dot(q, d) / len2;
      const double off = std::abs(cross(d, q)) / std::sqrt(len2);
      if (t > 0.0 && t < 1.0 && off <= 1e-12 * std::sqrt(len2)) {
        fail("hanging vertex " + std::to_string(m) + " on edge (" + std::to_string(ed.v[0]) + "," +
             std::to_string(ed.v[1]) + ")");
        break;
      }
    }
  }
  const double area = mesh.total_area(), expect = mesh.initial().area;
  if (std::abs(area - expect) > 1e-12 * expect)
    fail("element areas sum to " + std::to_string(area) + ", domain area is " + std::to_string(expect));
  return rep;
}

double element_shape_ratio(const Mesh& mesh, int element) {
  auto c = mesh.corners(element);
  const double a = std::sqrt(dot(c[1] - c[2], c[1] - c[2]));
  const double b = std::sqrt(dot(c[2] - c[0], c[2] - c[0]));
  const double d = std::sqrt(dot(c[0] - c[1], c[0] - c[1]));
  const double area = mesh.area(element);
  if (!(area > 0.0)) throw MeshError("degenerate element " + std::to_string(element));
  const double inradius = 2.0 * area / (a + b + d);
  return std::max({a, b, d}) / inradius;
}

double shape_regularity(const Mesh& mesh) {
  double worst = 0.0;
  for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e)
    worst = std::max(worst, element_shape_ratio(mesh, e));
  return worst;
}

bool probe_label_compatibility(const Mesh& mesh, int levels) {
  try {
    Mesh m = mesh;
    for (int i = 0; i < levels; ++i) {
      const std::size_t before = m.num_elements();
      m = refine_uniform(m, 1);
      // A compatible labeling bisects every element exactly once per sweep.
      if (m.num_elements() != 2 * before) return false;
    }
    return check_conformity(m).ok;
  } catch (const RefineError&) {
    return false;
  }
}

ComplexityAudit complexity_audit(std::span<const RefineStep> history) {
  if (history.empty()) throw MeshError("complexity audit needs a non-empty history");
  ComplexityAudit out;
  const double n0 = static_cast<double>(history[0].num_elements);
  double marked = 0.0;
  for (std::size_t k = 1; k < history.size(); ++k) {
    marked += static_cast<double>(history[k - 1].num_marked);
    const double lhs = static_cast<double>(history[k].num_elements) - n0;
    out.lhs.push_back(lhs);
    out.rhs.push_back(marked);
    if (marked > 0.0) {
      out.ratio.push_back(lhs / marked);
      out.c_s = std::max(out.c_s.value_or(0.0), lhs / marked);
    } else {
      out.ratio.push_back(std::nullopt);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in initial meshes

namespace builtin {

Mesh unit_square() {
  // Both triangles carry the diagonal (0,0)-(1,1) as refinement edge.
  return Mesh::make_initial({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{2, 0, 1}, {0, 2, 3}});
}

Mesh lshape() {
  // Three unit cells, each split along the diagonal through the re-entrant
  // corner (0,0); every diagonal is the refinement edge of both halves.
  std::vector<Point> p{{-1, -1}, {0, -1}, {0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}};
  std::vector<std::array<int, 3>> t{
      {2, 0, 1}, {0, 2, 7},  // [-1,0]x[-1,0]
      {2, 6, 7}, {6, 2, 5},  // [-1,0]x[0,1]
      {2, 4, 5}, {4, 2, 3},  // [0,1]x[0,1]
  };
  return Mesh::make_initial(std::move(p), std::move(t));
}

Mesh square_grid(int k) {
  if (k < 1) throw MeshError("grid needs at least one cell per side");
  std::vector<Point> p;
  for (int j = 0; j <= k; ++j)
    for (int i = 0; i <= k; ++i) p.push_back({static_cast<double>(i) / k, static_cast<double>(j) / k});
  auto id = [k](int i, int j) { return j * (k + 1) + i; };
  std::vector<std::array<int, 3>> t;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      t.push_back({c, a, b});
      t.push_back({a, c, d});
    }
  return Mesh::make_initial(std::move(p), std::move(t));
}

Mesh by_name(const std::string& name) {
  if (name == "square") return unit_square();
  if (name == "lshape") return lshape();
  throw MeshError("unknown built-in domain '" + name + "'");
}

}  // namespace builtin

}  // namespace afem
