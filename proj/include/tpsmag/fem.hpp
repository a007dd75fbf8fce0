#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tpsmag/mesh.hpp"
#include "tpsmag/quadrature.hpp"
#include "tpsmag/sparse.hpp"
#include "tpsmag/vec.hpp"

namespace tpsmag {

/// Row c holds the gradient of component c (elementwise constant for P1).
using GradMat = std::array<Vec3, 3>;

inline GradMat field_gradient(const NodalField& f, const TetMesh& mesh, int t) {
  GradMat g{};
  for (int a = 0; a < 4; ++a) {
    const Vec3& gl = mesh.grad_lambda[t][a];
    const Vec3& v = f[mesh.tets[t][a]];
    for (int c = 0; c < 3; ++c) g[c] += v[c] * gl;
  }
  return g;
}

inline double grad_frobenius2(const GradMat& g) { return norm2(g[0]) + norm2(g[1]) + norm2(g[2]); }

/// (u . grad) f, constant per tet.
inline Vec3 directional_derivative(const GradMat& g, const Vec3& u) {
  return {dot(g[0], u), dot(g[1], u), dot(g[2], u)};
}

inline Vec3 field_value(const NodalField& f, const TetMesh& mesh, int t,
                        const std::array<double, 4>& bary) {
  const auto& k = mesh.tets[t];
  return bary[0] * f[k[0]] + bary[1] * f[k[1]] + bary[2] * f[k[2]] + bary[3] * f[k[3]];
}

/// Scalar P1 mass matrix, exact closed form: int lambda_a lambda_b = |K|(1+delta)/20.
inline SparseMatrix assemble_mass_p1(const TetMesh& mesh) {
  TripletBuffer buf(mesh.n_vertices(), mesh.n_vertices());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double v20 = mesh.tet_volume[t] / 20.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        buf.add(mesh.tets[t][a], mesh.tets[t][b], v20 * (a == b ? 2.0 : 1.0));
  }
  return buf.compress();
}

/// Scalar P1 stiffness matrix, exact: |K| grad(lambda_a) . grad(lambda_b).
inline SparseMatrix assemble_stiffness_p1(const TetMesh& mesh) {
  TripletBuffer buf(mesh.n_vertices(), mesh.n_vertices());
  for (int t = 0; t < mesh.n_tets(); ++t)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        buf.add(mesh.tets[t][a], mesh.tets[t][b],
                mesh.tet_volume[t] * dot(mesh.grad_lambda[t][a], mesh.grad_lambda[t][b]));
  return buf.compress();
}

/// Quadrature-sampled scalar data, one value per (tet, quadrature point).
struct QuadScalars {
  int nq = 0;
  std::vector<double> v;
  double& at(int t, int q) { return v[static_cast<std::size_t>(t) * nq + q]; }
  double at(int t, int q) const { return v[static_cast<std::size_t>(t) * nq + q]; }
};

/// Quadrature-sampled vector data.
struct QuadVectors {
  int nq = 0;
  std::vector<Vec3> v;
  Vec3& at(int t, int q) { return v[static_cast<std::size_t>(t) * nq + q]; }
  const Vec3& at(int t, int q) const { return v[static_cast<std::size_t>(t) * nq + q]; }
};

inline QuadScalars sample_scalar(const TetMesh& mesh, const QuadRule& rule,
                                 const std::function<double(const Vec3&)>& fn) {
  QuadScalars s;
  s.nq = rule.size();
  s.v.resize(static_cast<std::size_t>(mesh.n_tets()) * s.nq);
  for (int t = 0; t < mesh.n_tets(); ++t)
    for (int q = 0; q < s.nq; ++q) s.at(t, q) = fn(mesh.point(rule.points[q], t));
  return s;
}

/// Weighted vector mass matrix <w u, phi> on interleaved dofs (3*vertex+component).
/// SPD whenever w > 0 at all quadrature points. Throws on non-finite weights.
inline SparseMatrix assemble_weighted_mass(const TetMesh& mesh, const QuadRule& rule,
                                           const QuadScalars& w) {
  const int n = mesh.n_vertices();
  TripletBuffer buf(3 * n, 3 * n);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double vol = mesh.tet_volume[t];
    double loc[4][4] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const double wq = w.at(t, q);
      if (!std::isfinite(wq)) throw std::invalid_argument("assemble_weighted_mass: non-finite weight");
      const double s = vol * rule.weights[q] * wq;
      const auto& bary = rule.points[q];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) loc[a][b] += s * bary[a] * bary[b];
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 3; ++c)
          buf.add(3 * mesh.tets[t][a] + c, 3 * mesh.tets[t][b] + c, loc[a][b]);
  }
  return buf.compress();
}

/// Cross-term matrix <m x u, phi>; skew-symmetric by construction.
inline SparseMatrix assemble_cross_term(const TetMesh& mesh, const QuadRule& rule,
                                        const NodalField& m) {
  const int n = mesh.n_vertices();
  TripletBuffer buf(3 * n, 3 * n);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double vol = mesh.tet_volume[t];
    // 3x3 block per local vertex pair: int phi_a phi_b [m]_x
    double blk[4][4][3][3] = {};
    for (int q = 0; q < rule.size(); ++q) {
      const Vec3 mq = field_value(m, mesh, t, rule.points[q]);
      const double X[3][3] = {{0, -mq.z, mq.y}, {mq.z, 0, -mq.x}, {-mq.y, mq.x, 0}};
      const double s = vol * rule.weights[q];
      const auto& bary = rule.points[q];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const double sab = s * bary[a] * bary[b];
          for (int c1 = 0; c1 < 3; ++c1)
            for (int c2 = 0; c2 < 3; ++c2) blk[a][b][c1][c2] += sab * X[c1][c2];
        }
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c1 = 0; c1 < 3; ++c1)
          for (int c2 = 0; c2 < 3; ++c2)
            buf.add(3 * mesh.tets[t][a] + c1, 3 * mesh.tets[t][b] + c2, blk[a][b][c1][c2]);
  }
  return buf.compress();
}

/// Adds the scalar matrix S on each of the 3 components: out += s * (S ox I3).
inline void add_componentwise(TripletBuffer& buf, const SparseMatrix& S, double s) {
  for (int i = 0; i < S.rows; ++i)
    for (int p = S.row_ptr[i]; p < S.row_ptr[i + 1]; ++p)
      for (int c = 0; c < 3; ++c) buf.add(3 * i + c, 3 * S.col[p] + c, s * S.val[p]);
}

/// y = (S ox I3) x on interleaved dofs.
inline void apply_componentwise(const SparseMatrix& S, const std::vector<double>& x,
                                std::vector<double>& y) {
  y.assign(3 * S.rows, 0.0);
  for (int i = 0; i < S.rows; ++i)
    for (int p = S.row_ptr[i]; p < S.row_ptr[i + 1]; ++p)
      for (int c = 0; c < 3; ++c) y[3 * i + c] += S.val[p] * x[3 * S.col[p] + c];
}

/// out[3a+c] += int g_c phi_a, with g given at quadrature points.
inline void add_load_quad(const TetMesh& mesh, const QuadRule& rule, const QuadVectors& g,
                          std::vector<double>& out) {
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double vol = mesh.tet_volume[t];
    for (int q = 0; q < rule.size(); ++q) {
      const double s = vol * rule.weights[q];
      const auto& bary = rule.points[q];
      const Vec3& gq = g.at(t, q);
      for (int a = 0; a < 4; ++a) {
        const double sa = s * bary[a];
        for (int c = 0; c < 3; ++c) out[3 * mesh.tets[t][a] + c] += sa * gq[c];
      }
    }
  }
}

/// out[3a+c] += int g_c phi_a for a nodal (P1-interpolated) g.
inline void add_load_nodal(const TetMesh& mesh, const QuadRule& rule, const NodalField& g,
                           std::vector<double>& out) {
  QuadVectors qv;
  qv.nq = rule.size();
  qv.v.resize(static_cast<std::size_t>(mesh.n_tets()) * qv.nq);
  for (int t = 0; t < mesh.n_tets(); ++t)
    for (int q = 0; q < qv.nq; ++q) qv.at(t, q) = field_value(g, mesh, t, rule.points[q]);
  add_load_quad(mesh, rule, qv, out);
}

/// out[3a+c] += int f_c phi_a for a spatially constant f.
inline void add_load_constant(const TetMesh& mesh, const Vec3& f, std::vector<double>& out) {
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double s = mesh.tet_volume[t] / 4.0;
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 3; ++c) out[3 * mesh.tets[t][a] + c] += s * f[c];
  }
}

/// Vector-valued nodal interpolation I_h: values at vertices.
inline NodalField nodal_interpolate(const std::function<Vec3(const Vec3&)>& fn,
                                    const TetMesh& mesh) {
  NodalField f(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    f[v] = fn(mesh.vertices[v]);
    if (!std::isfinite(f[v].x) || !std::isfinite(f[v].y) || !std::isfinite(f[v].z))
      throw std::invalid_argument("nodal_interpolate: non-finite evaluation");
  }
  return f;
}

/// I_h(a x b), cross product taken vertexwise.
inline NodalField nodal_cross(const NodalField& a, const NodalField& b) {
  NodalField f(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) f[i] = cross(a[i], b[i]);
  return f;
}

/// sum_ij S_ij (a_i . b_j) for a scalar matrix S.
inline double mass_inner(const SparseMatrix& S, const NodalField& a, const NodalField& b) {
  double s = 0.0;
  for (int i = 0; i < S.rows; ++i)
    for (int p = S.row_ptr[i]; p < S.row_ptr[i + 1]; ++p) s += S.val[p] * dot(a[i], b[S.col[p]]);
  return s;
}

inline double l2_norm(const SparseMatrix& mass, const NodalField& a) {
  return std::sqrt(std::max(0.0, mass_inner(mass, a, a)));
}

inline double h1_seminorm(const SparseMatrix& stiffness, const NodalField& a) {
  return std::sqrt(std::max(0.0, mass_inner(stiffness, a, a)));
}

}  // namespace tpsmag
