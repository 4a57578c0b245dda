#include "afem/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace afem {

namespace {

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "afemmesh v1 d=2\n";
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const Point p = mesh.vertex(static_cast<int>(i)).p;
    os << "vertex " << i << ' ' << format17(p.x) << ' ' << format17(p.y) << '\n';
  }
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& v = mesh.element(static_cast<int>(e)).v;
    os << "element " << e << ' ' << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  }
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) throw MeshError("cannot open '" + path + "' for writing");
  write_mesh(os, mesh);
}

Mesh read_mesh(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw MeshError("empty mesh file");
  {
    std::istringstream hs(line);
    std::string magic, version, dim;
    hs >> magic >> version >> dim;
    if (magic != "afemmesh" || version != "v1" || dim != "d=2")
      throw MeshError("bad mesh header '" + line + "'");
  }
  std::map<long, Point> points;
  std::map<long, std::array<long, 3>> tris;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind) || kind[0] == '#') continue;
    long id = 0;
    auto where = [&] { return " (line " + std::to_string(lineno) + ")"; };
    if (kind == "vertex") {
      std::string xs, ys;
      if (!(ls >> id >> xs >> ys)) throw MeshError("malformed vertex" + where());
      try {
        std::size_t px = 0, py = 0;
        Point p{std::stod(xs, &px), std::stod(ys, &py)};
        if (px != xs.size() || py != ys.size()) throw std::invalid_argument("trailing");
        if (!points.emplace(id, p).second) throw MeshError("duplicate vertex id" + where());
      } catch (const std::logic_error&) {
        throw MeshError("bad vertex coordinate" + where());
      }
    } else if (kind == "element") {
      std::array<long, 3> v{};
      if (!(ls >> id >> v[0] >> v[1] >> v[2])) throw MeshError("malformed element" + where());
      if (!tris.emplace(id, v).second) throw MeshError("duplicate element id" + where());
    } else {
      throw MeshError("unknown record '" + kind + "'" + where());
    }
  }
  std::map<long, int> index;
  std::vector<Point> pts;
  for (const auto& [id, p] : points) {
    index[id] = static_cast<int>(pts.size());
    pts.push_back(p);
  }
  std::vector<std::array<int, 3>> elems;
  for (const auto& [id, v] : tris) {
    std::array<int, 3> t{};
    for (int i = 0; i < 3; ++i) {
      auto it = index.find(v[i]);
      if (it == index.end()) throw MeshError("element " + std::to_string(id) + " references unknown vertex");
      t[i] = it->second;
    }
    elems.push_back(t);
  }
  if (elems.empty()) throw MeshError("mesh has no elements");
  return Mesh::make_initial(std::move(pts), std::move(elems));
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MeshError("cannot open mesh file '" + path + "'");
  return read_mesh(is);
}

}  // namespace afem
