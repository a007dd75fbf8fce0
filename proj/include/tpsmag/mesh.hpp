#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpsmag/vec.hpp"

namespace tpsmag {

/// Local vertex pairs of the 6 edges of a tetrahedron.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdgeLocal = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Tetrahedral mesh with edge and boundary-face connectivity.
/// Immutable after construction; safe for concurrent reads.
struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;  // positive signed volume

  // edges as sorted global vertex pairs, duplicate-free
  std::vector<std::array<int, 2>> edges;
  // per tet: edge ids in kTetEdgeLocal order
  std::vector<std::array<int, 6>> tet_edges;
  // +1 if the local pair is ascending in global indices, -1 otherwise
  std::vector<std::array<int, 6>> tet_edge_sign;

  std::vector<std::array<int, 3>> boundary_faces;

  // cached geometry
  std::vector<double> tet_volume;
  std::vector<std::array<Vec3, 4>> grad_lambda;  // barycentric gradients per tet

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tets() const { return static_cast<int>(tets.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  Vec3 point(const std::array<double, 4>& bary, int t) const {
    const auto& k = tets[t];
    return bary[0] * vertices[k[0]] + bary[1] * vertices[k[1]] + bary[2] * vertices[k[2]] +
           bary[3] * vertices[k[3]];
  }

  Vec3 centroid(int t) const { return point({0.25, 0.25, 0.25, 0.25}, t); }

  double total_volume() const {
    double s = 0.0;
    for (double v : tet_volume) s += v;
    return s;
  }
};

inline double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(b - a, cross(c - a, d - a)) / 6.0;
}

/// Fills volumes, barycentric gradients, edge connectivity, and boundary faces.
/// Throws if any tet has nonpositive signed volume.
inline void finalize_connectivity(TetMesh& m) {
  const int nt = m.n_tets();
  m.tet_volume.resize(nt);
  m.grad_lambda.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& k = m.tets[t];
    const Vec3 p0 = m.vertices[k[0]], p1 = m.vertices[k[1]], p2 = m.vertices[k[2]],
               p3 = m.vertices[k[3]];
    const double vol = signed_volume(p0, p1, p2, p3);
    if (!(vol > 0.0)) throw std::invalid_argument("tet with nonpositive signed volume");
    m.tet_volume[t] = vol;
    // grad lambda_a = (opposite face normal) / (3 vol), inward
    const Vec3 e1 = p1 - p0, e2 = p2 - p0, e3 = p3 - p0;
    const double c = 1.0 / (6.0 * vol);
    m.grad_lambda[t][1] = c * cross(e2, e3);
    m.grad_lambda[t][2] = c * cross(e3, e1);
    m.grad_lambda[t][3] = c * cross(e1, e2);
    m.grad_lambda[t][0] = -(m.grad_lambda[t][1] + m.grad_lambda[t][2] + m.grad_lambda[t][3]);
  }

  std::map<std::array<int, 2>, int> edge_id;
  m.tet_edges.assign(nt, {});
  m.tet_edge_sign.assign(nt, {});
  m.edges.clear();
  for (int t = 0; t < nt; ++t) {
    for (int e = 0; e < 6; ++e) {
      int a = m.tets[t][kTetEdgeLocal[e][0]];
      int b = m.tets[t][kTetEdgeLocal[e][1]];
      const int sign = a < b ? 1 : -1;
      if (a > b) std::swap(a, b);
      auto [it, inserted] = edge_id.try_emplace({a, b}, static_cast<int>(m.edges.size()));
      if (inserted) m.edges.push_back({a, b});
      m.tet_edges[t][e] = it->second;
      m.tet_edge_sign[t][e] = sign;
    }
  }

  std::map<std::array<int, 3>, int> face_count;
  static constexpr int faces[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  for (int t = 0; t < nt; ++t) {
    for (const auto& f : faces) {
      std::array<int, 3> key = {m.tets[t][f[0]], m.tets[t][f[1]], m.tets[t][f[2]]};
      std::sort(key.begin(), key.end());
      face_count[key] += 1;
    }
  }
  m.boundary_faces.clear();
  for (const auto& [key, cnt] : face_count)
    if (cnt == 1) m.boundary_faces.push_back(key);
}

/// Kuhn (Freudenthal) split of an axis-aligned box into 6 n^3 path tetrahedra.
/// All dihedral angles are <= pi/2, so the mesh is weakly acute.
inline TetMesh build_cube_mesh(const Vec3& lo, const Vec3& hi, int n) {
  if (n < 1) throw std::invalid_argument("build_cube_mesh: n must be >= 1");
  for (int c = 0; c < 3; ++c)
    if (!(hi[c] > lo[c])) throw std::invalid_argument("build_cube_mesh: degenerate box");

  TetMesh m;
  const int nv = n + 1;
  auto vid = [nv](int i, int j, int k) { return i + nv * (j + nv * k); };
  m.vertices.resize(static_cast<std::size_t>(nv) * nv * nv);
  for (int k = 0; k < nv; ++k)
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nv; ++i)
        m.vertices[vid(i, j, k)] = {lo.x + (hi.x - lo.x) * i / n, lo.y + (hi.y - lo.y) * j / n,
                                    lo.z + (hi.z - lo.z) * k / n};

  // the 6 permutations of (x,y,z); each gives one path simplex per cell
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  m.tets.reserve(static_cast<std::size_t>(6) * n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& p : perms) {
          std::array<int, 3> c = {i, j, k};
          std::array<int, 4> tet;
          tet[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[p[s]] += 1;
            tet[s + 1] = vid(c[0], c[1], c[2]);
          }
          // odd permutations give negative orientation; swap to fix
          if (signed_volume(m.vertices[tet[0]], m.vertices[tet[1]], m.vertices[tet[2]],
                            m.vertices[tet[3]]) < 0.0)
            std::swap(tet[1], tet[2]);
          m.tets.push_back(tet);
        }

  finalize_connectivity(m);
  return m;
}

struct MeshQuality {
  double h_max = 0.0;              // max diameter
  double h_min = 0.0;              // min diameter
  double max_diam_over_vol13 = 0;  // max over tets of diam(K)/|K|^(1/3)
  double uniformity_ratio = 0.0;   // h_max / h_min
};

inline double tet_diameter(const TetMesh& m, int t) {
  double d = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b)
      d = std::max(d, norm(m.vertices[m.tets[t][a]] - m.vertices[m.tets[t][b]]));
  return d;
}

inline MeshQuality mesh_quality(const TetMesh& m) {
  MeshQuality q;
  q.h_min = 1e300;
  for (int t = 0; t < m.n_tets(); ++t) {
    const double d = tet_diameter(m, t);
    q.h_max = std::max(q.h_max, d);
    q.h_min = std::min(q.h_min, d);
    q.max_diam_over_vol13 = std::max(q.max_diam_over_vol13, d / std::cbrt(m.tet_volume[t]));
  }
  q.uniformity_ratio = q.h_max / q.h_min;
  return q;
}

struct AcutenessReport {
  std::vector<double> max_dihedral;  // per tet, radians
  double global_max = 0.0;
  bool weakly_acute = false;  // every dihedral angle <= pi/2 (+1e-12)
};

/// Dihedral angles from pairs of face normals, arccos clamped to [-1,1].
inline AcutenessReport weak_acuteness_report(const TetMesh& m) {
  AcutenessReport r;
  r.max_dihedral.resize(m.n_tets());
  for (int t = 0; t < m.n_tets(); ++t) {
    // inward face normal opposite vertex a is parallel to grad lambda_a
    std::array<Vec3, 4> n;
    for (int a = 0; a < 4; ++a) n[a] = normalized(m.grad_lambda[t][a]);
    double worst = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) {
        const double c = std::clamp(-dot(n[a], n[b]), -1.0, 1.0);
        worst = std::max(worst, std::acos(c));
      }
    r.max_dihedral[t] = worst;
    r.global_max = std::max(r.global_max, worst);
  }
  constexpr double half_pi = 1.5707963267948966;
  r.weakly_acute = r.global_max <= half_pi + 1e-12;
  return r;
}

/// Index map of the tets/vertices of a box-shaped submesh resolved by the mesh.
struct SubMeshMap {
  std::vector<int> inner_tets;
  std::vector<int> inner_vertices;       // global ids, ascending
  std::vector<int> global_to_local;      // -1 outside
  int n_local = 0;
};

/// Tets with all four vertices in the closed box and centroid inside.
/// Throws if the box is not resolved by the mesh (volume mismatch).
inline SubMeshMap extract_submesh(const TetMesh& m, const Vec3& lo, const Vec3& hi) {
  for (int c = 0; c < 3; ++c)
    if (!(hi[c] > lo[c])) throw std::invalid_argument("extract_submesh: degenerate box");

  const double tol = 1e-12;
  auto inside_closed = [&](const Vec3& p) {
    return p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol &&
           p.z >= lo.z - tol && p.z <= hi.z + tol;
  };

  SubMeshMap map;
  map.global_to_local.assign(m.n_vertices(), -1);
  double inner_volume = 0.0;
  for (int t = 0; t < m.n_tets(); ++t) {
    bool all_in = true;
    for (int a = 0; a < 4; ++a)
      if (!inside_closed(m.vertices[m.tets[t][a]])) all_in = false;
    if (all_in && inside_closed(m.centroid(t))) {
      map.inner_tets.push_back(t);
      inner_volume += m.tet_volume[t];
    }
  }
  const double box_volume = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
  if (std::abs(inner_volume - box_volume) > 1e-10 * box_volume)
    throw std::invalid_argument("extract_submesh: box not resolved by the mesh");

  for (int t : map.inner_tets)
    for (int a = 0; a < 4; ++a) map.global_to_local[m.tets[t][a]] = 0;
  for (int v = 0; v < m.n_vertices(); ++v)
    if (map.global_to_local[v] == 0) {
      map.global_to_local[v] = map.n_local++;
      map.inner_vertices.push_back(v);
    }
  return map;
}

/// Standalone mesh of the submesh, with local vertex numbering from the map.
inline TetMesh submesh_as_mesh(const TetMesh& m, const SubMeshMap& map) {
  TetMesh s;
  s.vertices.resize(map.n_local);
  for (int v = 0; v < map.n_local; ++v) s.vertices[v] = m.vertices[map.inner_vertices[v]];
  for (int t : map.inner_tets) {
    std::array<int, 4> tet;
    for (int a = 0; a < 4; ++a) tet[a] = map.global_to_local[m.tets[t][a]];
    s.tets.push_back(tet);
  }
  finalize_connectivity(s);
  return s;
}

}  // namespace tpsmag
