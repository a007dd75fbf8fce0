#pragma once

#include <cstddef>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpsmag/sparse.hpp"

namespace tpsmag {

struct SolverConfig {
  double tol = 1e-12;   // relative residual
  int max_iter = 10000;
  int restart = 50;     // GMRES restart length
  bool jacobi = false;  // optional diagonal preconditioning (CG only)

  void validate() const {
    if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("solver.tol must be in (0,1)");
    if (max_iter < 1) throw std::invalid_argument("solver.max_iter must be >= 1");
    if (restart < 1) throw std::invalid_argument("solver.restart must be >= 1");
  }
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;
};

// Stopping threshold: ||r|| <= tol ||b|| with an absolute floor of
// 1e-14 ||b||_inf, so b = 0 returns x = 0 immediately.
inline double stop_threshold(const std::vector<double>& b, double tol) {
  return std::max(tol * norm2(b), 1e-14 * norm_inf(b));
}

/// Conjugate gradients for SPD operators. Throws on negative curvature or
/// when max_iter is exceeded.
template <class Op>
SolveStats cg(const Op& A, const std::vector<double>& b, std::vector<double>& x,
              const SolverConfig& cfg, const std::vector<double>* inv_diag = nullptr) {
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  SolveStats st;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return st;
  const double thresh = stop_threshold(b, cfg.tol);

  std::vector<double> r = b, z(n), p(n), Ap(n);
  auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (inv_diag) {
      out.resize(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = (*inv_diag)[i] * in[i];
    } else {
      out = in;
    }
  };
  precond(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    A.apply(p, Ap);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) throw SolverError("cg: negative curvature (matrix not SPD)");
    const double alpha = rz / pAp;
    axpy(alpha, p, x);
    axpy(-alpha, Ap, r);
    st.iterations = it;
    st.residual = norm2(r);
    if (st.residual <= thresh) return st;
    precond(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("cg: max iterations exceeded (residual " + std::to_string(st.residual) + ")");
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
/// Throws on stagnation across a restart cycle or when max_iter is exceeded.
template <class Op>
SolveStats gmres(const Op& A, const std::vector<double>& b, std::vector<double>& x,
                 const SolverConfig& cfg) {
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  SolveStats st;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return st;
  const double thresh = stop_threshold(b, cfg.tol);
  const int m = std::min<int>(cfg.restart, static_cast<int>(n));

  std::vector<std::vector<double>> V(m + 1, std::vector<double>(n));
  std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
  std::vector<double> cs(m), sn(m), g(m + 1), r(n), w(n);

  double res = bnorm;
  while (st.iterations < cfg.max_iter) {
    A.apply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double beta = norm2(r);
    st.residual = beta;
    if (beta <= thresh) return st;
    if (st.iterations > 0 && beta >= res * (1.0 - 1e-14))
      throw SolverError("gmres: stagnation across restart");
    res = beta;

    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;

    int j = 0;
    for (; j < m && st.iterations < cfg.max_iter; ++j) {
      st.iterations += 1;
      A.apply(V[j], w);
      for (int i = 0; i <= j; ++i) {
        H[i][j] = dot(w, V[i]);
        axpy(-H[i][j], V[i], w);
      }
      H[j + 1][j] = norm2(w);
      if (H[j + 1][j] > 0.0)
        for (std::size_t i = 0; i < n; ++i) V[j + 1][i] = w[i] / H[j + 1][j];

      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H[i][j] + sn[i] * H[i + 1][j];
        H[i + 1][j] = -sn[i] * H[i][j] + cs[i] * H[i + 1][j];
        H[i][j] = t;
      }
      const double denom = std::hypot(H[j][j], H[j + 1][j]);
      if (denom == 0.0) throw SolverError("gmres: breakdown (singular matrix)");
      cs[j] = H[j][j] / denom;
      sn[j] = H[j + 1][j] / denom;
      H[j][j] = denom;
      H[j + 1][j] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      st.residual = std::abs(g[j + 1]);
      if (st.residual <= thresh) {
        j += 1;
        break;
      }
    }

    // back substitution and update
    std::vector<double> y(j, 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k = i + 1; k < j; ++k) s -= H[i][k] * y[k];
      y[i] = s / H[i][i];
    }
    for (int k = 0; k < j; ++k) axpy(y[k], V[k], x);
    if (st.residual <= thresh) {
      A.apply(x, r);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
      st.residual = norm2(r);
      if (st.residual <= thresh * (1.0 + 1e-6) || st.residual <= thresh) return st;
    }
  }
  throw SolverError("gmres: max iterations exceeded (residual " + std::to_string(st.residual) +
                    ")");
}

/// CG front-end for assembled SPD matrices.
inline std::vector<double> solve_spd(const SparseMatrix& A, const std::vector<double>& b,
                                     const SolverConfig& cfg, SolveStats* stats = nullptr) {
  std::vector<double> x;
  std::vector<double> inv_diag;
  const std::vector<double>* pd = nullptr;
  if (cfg.jacobi) {
    inv_diag.assign(A.rows, 1.0);
    for (int i = 0; i < A.rows; ++i) {
      const double d = A.coeff(i, i);
      if (d > 0.0) inv_diag[i] = 1.0 / d;
    }
    pd = &inv_diag;
  }
  SolveStats st = cg(A, b, x, cfg, pd);
  if (stats) *stats = st;
  return x;
}

/// GMRES front-end for assembled nonsymmetric matrices.
inline std::vector<double> solve_nonsymmetric(const SparseMatrix& A, const std::vector<double>& b,
                                              const SolverConfig& cfg, SolveStats* stats = nullptr) {
  std::vector<double> x;
  SolveStats st = gmres(A, b, x, cfg);
  if (stats) *stats = st;
  return x;
}

}  // namespace tpsmag
