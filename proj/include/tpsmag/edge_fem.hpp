#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tpsmag/fem.hpp"
#include "tpsmag/mesh.hpp"
#include "tpsmag/quadrature.hpp"
#include "tpsmag/sparse.hpp"
#include "tpsmag/vec.hpp"

namespace tpsmag {

// Lowest-order H(curl)-conforming edge elements on tetrahedra.
// Global edge orientation runs from lower to higher vertex index; the basis
// function of edge (a,b) is lambda_a grad(lambda_b) - lambda_b grad(lambda_a),
// with unit circulation along the directed edge.

/// Basis function of local edge e of tet t at barycentric coordinates.
inline Vec3 edge_basis_value(const TetMesh& mesh, int t, int e,
                             const std::array<double, 4>& bary) {
  const int i = kTetEdgeLocal[e][0], j = kTetEdgeLocal[e][1];
  const Vec3 v = bary[i] * mesh.grad_lambda[t][j] - bary[j] * mesh.grad_lambda[t][i];
  return mesh.tet_edge_sign[t][e] * v;
}

/// Elementwise-constant curl of the basis function of local edge e of tet t.
inline Vec3 edge_basis_curl(const TetMesh& mesh, int t, int e) {
  const int i = kTetEdgeLocal[e][0], j = kTetEdgeLocal[e][1];
  return (2.0 * mesh.tet_edge_sign[t][e]) * cross(mesh.grad_lambda[t][i], mesh.grad_lambda[t][j]);
}

inline Vec3 edge_field_value(const EdgeField& h, const TetMesh& mesh, int t,
                             const std::array<double, 4>& bary) {
  Vec3 s{};
  for (int e = 0; e < 6; ++e) s += h[mesh.tet_edges[t][e]] * edge_basis_value(mesh, t, e, bary);
  return s;
}

inline Vec3 edge_field_curl(const EdgeField& h, const TetMesh& mesh, int t) {
  Vec3 s{};
  for (int e = 0; e < 6; ++e) s += h[mesh.tet_edges[t][e]] * edge_basis_curl(mesh, t, e);
  return s;
}

/// Edge mass matrix <u, zeta>_Omega (exact; integrands are degree 2).
inline SparseMatrix assemble_edge_mass(const TetMesh& mesh) {
  const QuadRule& rule = quad_degree2();
  TripletBuffer buf(mesh.n_edges(), mesh.n_edges());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    double loc[6][6] = {};
    for (int q = 0; q < rule.size(); ++q) {
      Vec3 phi[6];
      for (int e = 0; e < 6; ++e) phi[e] = edge_basis_value(mesh, t, e, rule.points[q]);
      const double s = mesh.tet_volume[t] * rule.weights[q];
      for (int e = 0; e < 6; ++e)
        for (int f = 0; f < 6; ++f) loc[e][f] += s * dot(phi[e], phi[f]);
    }
    for (int e = 0; e < 6; ++e)
      for (int f = 0; f < 6; ++f) buf.add(mesh.tet_edges[t][e], mesh.tet_edges[t][f], loc[e][f]);
  }
  return buf.compress();
}

/// Curl-curl matrix <sigma_inv curl u, curl zeta>_Omega with piecewise-constant
/// sigma_inv; exact since the curls are elementwise constant.
inline SparseMatrix assemble_curlcurl(const TetMesh& mesh, const std::vector<double>& sigma_inv) {
  TripletBuffer buf(mesh.n_edges(), mesh.n_edges());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    if (!(sigma_inv[t] > 0.0)) throw std::invalid_argument("assemble_curlcurl: nonpositive sigma");
    Vec3 c[6];
    for (int e = 0; e < 6; ++e) c[e] = edge_basis_curl(mesh, t, e);
    const double s = mesh.tet_volume[t] * sigma_inv[t];
    for (int e = 0; e < 6; ++e)
      for (int f = 0; f < 6; ++f) buf.add(mesh.tet_edges[t][e], mesh.tet_edges[t][f], s * dot(c[e], c[f]));
  }
  return buf.compress();
}

inline SparseMatrix assemble_curlcurl(const TetMesh& mesh, double sigma_inv = 1.0) {
  return assemble_curlcurl(mesh, std::vector<double>(mesh.n_tets(), sigma_inv));
}

/// Interpolation onto edge elements: coefficient = line integral of fn . t
/// along the directed edge, by a 2-point Gauss rule.
inline EdgeField edge_interpolate(const std::function<Vec3(const Vec3&)>& fn,
                                  const TetMesh& mesh) {
  EdgeField h(mesh.n_edges());
  const double g = 0.5 / std::sqrt(3.0);
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Vec3 a = mesh.vertices[mesh.edges[e][0]];
    const Vec3 b = mesh.vertices[mesh.edges[e][1]];
    const Vec3 mid = 0.5 * (a + b), d = b - a;
    h[e] = 0.5 * dot(fn(mid - g * d) + fn(mid + g * d), d);
  }
  return h;
}

/// Pairing <u_nodal, zeta_edge>_omega over the inner tets of a submesh:
/// rows are edge dofs of the full mesh, columns are interleaved nodal dofs of
/// the submesh (3 * local vertex + component).
inline SparseMatrix assemble_edge_nodal_pairing(const TetMesh& mesh, const SubMeshMap& map) {
  const QuadRule& rule = quad_degree2();
  TripletBuffer buf(mesh.n_edges(), 3 * map.n_local);
  for (int t : map.inner_tets) {
    double loc[6][4][3] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const double s = mesh.tet_volume[t] * rule.weights[q];
      const auto& bary = rule.points[q];
      for (int e = 0; e < 6; ++e) {
        const Vec3 phi = edge_basis_value(mesh, t, e, rule.points[q]);
        for (int a = 0; a < 4; ++a)
          for (int c = 0; c < 3; ++c) loc[e][a][c] += s * bary[a] * phi[c];
      }
    }
    for (int e = 0; e < 6; ++e)
      for (int a = 0; a < 4; ++a) {
        const int lv = map.global_to_local[mesh.tets[t][a]];
        for (int c = 0; c < 3; ++c) buf.add(mesh.tet_edges[t][e], 3 * lv + c, loc[e][a][c]);
      }
  }
  return buf.compress();
}

inline double edge_inner(const SparseMatrix& edge_mass, const EdgeField& a, const EdgeField& b) {
  double s = 0.0;
  for (int i = 0; i < edge_mass.rows; ++i)
    for (int p = edge_mass.row_ptr[i]; p < edge_mass.row_ptr[i + 1]; ++p)
      s += edge_mass.val[p] * a[i] * b[edge_mass.col[p]];
  return s;
}

inline double edge_l2_norm(const SparseMatrix& edge_mass, const EdgeField& a) {
  return std::sqrt(std::max(0.0, edge_inner(edge_mass, a, a)));
}

}  // namespace tpsmag
