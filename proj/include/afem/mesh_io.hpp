#pragma once

#include <iosfwd>
#include <string>

#include "afem/mesh.hpp"

namespace afem {

// Plain-text mesh format:
//   afemmesh v1 d=2
//   vertex <id> <x> <y>
//   element <id> <v0> <v1> <v2>
// The refinement edge of an element is the one opposite v2. Coordinates are
// written with 17 significant digits so reading back is bit-exact.

void write_mesh(std::ostream& os, const Mesh& mesh);
void write_mesh_file(const std::string& path, const Mesh& mesh);

/// Reads a mesh as a new initial triangulation. Throws MeshError on malformed
/// input.
Mesh read_mesh(std::istream& is);
Mesh read_mesh_file(const std::string& path);

}  // namespace afem
