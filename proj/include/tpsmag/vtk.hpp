#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tpsmag/edge_fem.hpp"
#include "tpsmag/mesh.hpp"
#include "tpsmag/vec.hpp"

namespace tpsmag {

/// Legacy VTK unstructured grid, ASCII. Nodal fields become POINT_DATA
/// vectors; edge fields are exported as elementwise-averaged CELL_DATA vectors
/// (value at the tet centroid).
inline std::string vtk_string(const TetMesh& mesh,
                              const std::vector<std::pair<std::string, const NodalField*>>& nodal,
                              const std::vector<std::pair<std::string, const EdgeField*>>& edge = {}) {
  std::string out;
  char buf[256];
  auto emit = [&out](const char* s) { out += s; };
  auto emitf = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    out += buf;
  };

  emit("# vtk DataFile Version 3.0\n");
  emit("tpsmag fields\n");
  emit("ASCII\n");
  emit("DATASET UNSTRUCTURED_GRID\n");
  emitf("POINTS %d double\n", mesh.n_vertices());
  for (const Vec3& p : mesh.vertices) emitf("%.9g %.9g %.9g\n", p.x, p.y, p.z);
  emitf("CELLS %d %d\n", mesh.n_tets(), 5 * mesh.n_tets());
  for (const auto& t : mesh.tets) emitf("4 %d %d %d %d\n", t[0], t[1], t[2], t[3]);
  emitf("CELL_TYPES %d\n", mesh.n_tets());
  for (int t = 0; t < mesh.n_tets(); ++t) emit("10\n");

  if (!nodal.empty()) {
    emitf("POINT_DATA %d\n", mesh.n_vertices());
    for (const auto& [name, field] : nodal) {
      if (static_cast<int>(field->size()) != mesh.n_vertices())
        throw std::invalid_argument("vtk: nodal field size mismatch");
      emitf("VECTORS %s double\n", name.c_str());
      for (const Vec3& v : *field) emitf("%.9g %.9g %.9g\n", v.x, v.y, v.z);
    }
  }
  if (!edge.empty()) {
    emitf("CELL_DATA %d\n", mesh.n_tets());
    for (const auto& [name, field] : edge) {
      if (static_cast<int>(field->size()) != mesh.n_edges())
        throw std::invalid_argument("vtk: edge field size mismatch");
      emitf("VECTORS %s double\n", name.c_str());
      for (int t = 0; t < mesh.n_tets(); ++t) {
        const Vec3 v = edge_field_value(*field, mesh, t, {0.25, 0.25, 0.25, 0.25});
        emitf("%.9g %.9g %.9g\n", v.x, v.y, v.z);
      }
    }
  }
  return out;
}

inline void export_vtk(const TetMesh& mesh,
                       const std::vector<std::pair<std::string, const NodalField*>>& nodal,
                       const std::string& path,
                       const std::vector<std::pair<std::string, const EdgeField*>>& edge = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("export_vtk: cannot open " + path);
  f << vtk_string(mesh, nodal, edge);
}

}  // namespace tpsmag
