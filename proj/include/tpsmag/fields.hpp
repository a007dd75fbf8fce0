#pragma once

#include <limits>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tpsmag/fem.hpp"
#include "tpsmag/mesh.hpp"
#include "tpsmag/quadrature.hpp"
#include "tpsmag/vec.hpp"

namespace tpsmag {

// ---------------------------------------------------------------------------
// Lower-order effective-field operator pi (linear, self-adjoint, bounded).

struct LowerOrderOp {
  enum class Kind { Zero, Uniaxial };
  Kind kind = Kind::Zero;
  double coeff = 0.0;  // 2K/(mu0 Ms^2) in dimensionless form
  Vec3 axis{0, 0, 1};

  static LowerOrderOp zero() { return {}; }
  static LowerOrderOp uniaxial(double c, const Vec3& a) {
    const double na = norm(a);
    if (!(na > 0.0)) throw std::invalid_argument("uniaxial: zero axis");
    return {Kind::Uniaxial, c, a / na};
  }
};

/// pi(m), vertexwise: c (a.m) a for the uniaxial variant.
inline NodalField eval_pi(const LowerOrderOp& op, const NodalField& m) {
  NodalField out(m.size(), Vec3{});
  if (op.kind == LowerOrderOp::Kind::Uniaxial)
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = (op.coeff * dot(op.axis, m[i])) * op.axis;
  return out;
}

/// 2K/(mu0 Ms^2).
inline double anisotropy_coeff(double K, double Ms, double mu0) { return 2.0 * K / (mu0 * Ms * Ms); }

/// Exchange length sqrt(2A/(mu0 Ms^2)).
inline double exchange_length(double A, double Ms, double mu0) {
  return std::sqrt(2.0 * A / (mu0 * Ms * Ms));
}

// ---------------------------------------------------------------------------
// Slonczewski torque coefficient G.

struct SlonczewskiParams {
  double P = 0.8;                 // polarization, in (0,1]
  double Je = 1e11;               // current density [A/m^2]
  double Ms = 8e5;                // saturation magnetization [A/m]
  double d = 1e-8;                // layer thickness [m]
  double hbar = 1.054571800e-34;  // [J s]
  double e = 1.602176621e-19;     // [C]
  double mu0 = 4e-7 * 3.14159265358979323846;
};

inline double slonczewski_prefactor(const SlonczewskiParams& p) {
  return p.hbar * p.Je / (p.e * p.mu0 * p.Ms * p.Ms * p.d);
}

/// G(x) = pref * [(1+P)^3 (3+x) / (4 P^(3/2)) - 4]^(-1) on [-1,1].
inline double slonczewski_G(double x, const SlonczewskiParams& p) {
  if (!(p.P > 0.0) || p.P > 1.0) throw std::invalid_argument("slonczewski_G: P must be in (0,1]");
  if (x < -1.0 - 1e-12 || x > 1.0 + 1e-12)
    throw std::invalid_argument("slonczewski_G: x outside [-1,1]");
  const double bracket = std::pow(1.0 + p.P, 3) * (3.0 + x) / (4.0 * std::pow(p.P, 1.5));
  if (std::abs(bracket - 4.0) < 1e-14) throw std::domain_error("slonczewski_G: pole at bracket = 4");
  return slonczewski_prefactor(p) / (bracket - 4.0);
}

inline double slonczewski_dG(double x, const SlonczewskiParams& p) {
  const double bracket = std::pow(1.0 + p.P, 3) * (3.0 + x) / (4.0 * std::pow(p.P, 1.5));
  const double db = std::pow(1.0 + p.P, 3) / (4.0 * std::pow(p.P, 1.5));
  return -slonczewski_prefactor(p) * db / ((bracket - 4.0) * (bracket - 4.0));
}

// ---------------------------------------------------------------------------
// Dissipative operator Pi with derivative operator D.

struct DissipativeOp {
  enum class Kind { Zero, Slonczewski, ZhangLi };
  Kind kind = Kind::Zero;

  // Slonczewski
  Vec3 p{1, 0, 0};
  std::function<double(double)> G, dG;

  // Zhang-Li
  Vec3 u{};
  double beta = 0.0;

  static DissipativeOp zero() { return {}; }

  static DissipativeOp slonczewski(const Vec3& pol, std::function<double(double)> g,
                                   std::function<double(double)> dg) {
    DissipativeOp op;
    op.kind = Kind::Slonczewski;
    const double np = norm(pol);
    if (!(np > 0.0)) throw std::invalid_argument("slonczewski: zero polarization");
    op.p = pol / np;
    op.G = std::move(g);
    op.dG = std::move(dg);
    return op;
  }

  static DissipativeOp slonczewski_physical(const Vec3& pol, const SlonczewskiParams& params) {
    return slonczewski(
        pol, [params](double x) { return slonczewski_G(x, params); },
        [params](double x) { return slonczewski_dG(x, params); });
  }

  static DissipativeOp zhang_li(const Vec3& velocity, double b) {
    if (!(b > 0.0)) throw std::invalid_argument("zhang_li: beta must be > 0");
    DissipativeOp op;
    op.kind = Kind::ZhangLi;
    op.u = velocity;
    op.beta = b;
    return op;
  }
};

/// Field samples from Pi or D: vertexwise for Slonczewski (and Zero), at
/// quadrature points for Zhang-Li, whose gradient term is elementwise constant.
struct OpField {
  bool is_quad = false;
  NodalField nodal;
  QuadVectors quad;

  Vec3 at_qp(const TetMesh& mesh, const QuadRule& rule, int t, int q) const {
    if (is_quad) return quad.at(t, q);
    return field_value(nodal, mesh, t, rule.points[q]);
  }

  static OpField zeros(const TetMesh& mesh) {
    OpField f;
    f.nodal.assign(mesh.n_vertices(), Vec3{});
    return f;
  }
};

inline void check_slonczewski_domain(const DissipativeOp& op, const NodalField& m) {
  for (const auto& v : m)
    if (std::abs(dot(v, op.p)) > 1.0 + 1e-12)
      throw std::domain_error("slonczewski: |m.p| > 1 at a vertex");
}

/// Pi(m): Slonczewski G(m.p) m x p (vertexwise); Zhang-Li m x (u.grad)m + beta (u.grad)m.
inline OpField eval_Pi(const DissipativeOp& op, const NodalField& m, const TetMesh& mesh,
                       const QuadRule& rule) {
  OpField out;
  switch (op.kind) {
    case DissipativeOp::Kind::Zero:
      out.nodal.assign(m.size(), Vec3{});
      return out;
    case DissipativeOp::Kind::Slonczewski: {
      check_slonczewski_domain(op, m);
      out.nodal.resize(m.size());
      for (std::size_t i = 0; i < m.size(); ++i)
        out.nodal[i] = op.G(std::clamp(dot(m[i], op.p), -1.0, 1.0)) * cross(m[i], op.p);
      return out;
    }
    case DissipativeOp::Kind::ZhangLi: {
      out.is_quad = true;
      out.quad.nq = rule.size();
      out.quad.v.resize(static_cast<std::size_t>(mesh.n_tets()) * rule.size());
      for (int t = 0; t < mesh.n_tets(); ++t) {
        const GradMat g = field_gradient(m, mesh, t);
        const Vec3 ug = directional_derivative(g, op.u);
        for (int q = 0; q < rule.size(); ++q) {
          const Vec3 mq = field_value(m, mesh, t, rule.points[q]);
          out.quad.at(t, q) = cross(mq, ug) + op.beta * ug;
        }
      }
      return out;
    }
  }
  return out;
}

/// Gateaux derivative D(m; psi) of Pi, linear in psi.
inline OpField eval_D(const DissipativeOp& op, const NodalField& m, const NodalField& psi,
                      const TetMesh& mesh, const QuadRule& rule) {
  OpField out;
  switch (op.kind) {
    case DissipativeOp::Kind::Zero:
      out.nodal.assign(m.size(), Vec3{});
      return out;
    case DissipativeOp::Kind::Slonczewski: {
      check_slonczewski_domain(op, m);
      out.nodal.resize(m.size());
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double x = std::clamp(dot(m[i], op.p), -1.0, 1.0);
        out.nodal[i] =
            (op.dG(x) * dot(psi[i], op.p)) * cross(m[i], op.p) + op.G(x) * cross(psi[i], op.p);
      }
      return out;
    }
    case DissipativeOp::Kind::ZhangLi: {
      out.is_quad = true;
      out.quad.nq = rule.size();
      out.quad.v.resize(static_cast<std::size_t>(mesh.n_tets()) * rule.size());
      for (int t = 0; t < mesh.n_tets(); ++t) {
        const Vec3 ugm = directional_derivative(field_gradient(m, mesh, t), op.u);
        const Vec3 ugp = directional_derivative(field_gradient(psi, mesh, t), op.u);
        for (int q = 0; q < rule.size(); ++q) {
          const Vec3 mq = field_value(m, mesh, t, rule.points[q]);
          const Vec3 pq = field_value(psi, mesh, t, rule.points[q]);
          out.quad.at(t, q) = cross(pq, ugm) + cross(mq, ugp) + op.beta * ugp;
        }
      }
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-step approximations of pi(m(t_{i+1/2})) and Pi(m(t_{i+1/2})).

enum class FieldStrategy { FI, AB, EE };

/// FI (step 0): pi(m_i) + (k/2) pi(v); AB (i>=1): (3/2) pi(m_i) - (1/2) pi(m_{i-1});
/// EE: pi(m_i). The FI contribution is affine in v; pass the current iterate.
inline NodalField build_pi_step(FieldStrategy strategy, const LowerOrderOp& op,
                                const NodalField* v, const NodalField& m_i,
                                const NodalField* m_prev, double k) {
  switch (strategy) {
    case FieldStrategy::FI: {
      if (!v) throw std::invalid_argument("build_pi_step: FI requires v");
      NodalField out = eval_pi(op, m_i);
      const NodalField pv = eval_pi(op, *v);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += (0.5 * k) * pv[i];
      return out;
    }
    case FieldStrategy::AB: {
      if (!m_prev) throw std::invalid_argument("build_pi_step: AB requires m_prev");
      NodalField out = eval_pi(op, m_i);
      const NodalField pp = eval_pi(op, *m_prev);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.5 * out[i] - 0.5 * pp[i];
      return out;
    }
    case FieldStrategy::EE:
      return eval_pi(op, m_i);
  }
  return {};
}

/// FI (step 0): Pi(m_i) + (k/2) D(m_i; v); AB (i>=1): Pi(m_i) + (1/2) D(m_i; m_i)
/// - (1/2) D(m_i; m_{i-1}); EE: Pi(m_i).
inline OpField build_Pi_step(FieldStrategy strategy, const DissipativeOp& op, const NodalField* v,
                             const NodalField& m_i, const NodalField* m_prev, double k,
                             const TetMesh& mesh, const QuadRule& rule) {
  OpField out = eval_Pi(op, m_i, mesh, rule);
  auto add_scaled = [](OpField& acc, const OpField& d, double s) {
    if (acc.is_quad) {
      for (std::size_t i = 0; i < acc.quad.v.size(); ++i) acc.quad.v[i] += s * d.quad.v[i];
    } else {
      for (std::size_t i = 0; i < acc.nodal.size(); ++i) acc.nodal[i] += s * d.nodal[i];
    }
  };
  switch (strategy) {
    case FieldStrategy::FI: {
      if (!v) throw std::invalid_argument("build_Pi_step: FI requires v");
      add_scaled(out, eval_D(op, m_i, *v, mesh, rule), 0.5 * k);
      return out;
    }
    case FieldStrategy::AB: {
      if (!m_prev) throw std::invalid_argument("build_Pi_step: AB requires m_prev");
      add_scaled(out, eval_D(op, m_i, m_i, mesh, rule), 0.5);
      add_scaled(out, eval_D(op, m_i, *m_prev, mesh, rule), -0.5);
      return out;
    }
    case FieldStrategy::EE:
      return out;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Applied field f(t), spatially uniform, C^1 in time.

struct AppliedField {
  enum class Kind { Constant, Ramp, Samples };
  Kind kind = Kind::Constant;

  Vec3 value{};  // Constant

  // Ramp: the six-branch schedule on s = t / time_scale in [0,7], x-component
  // rising 0 -> 30, holding, and returning to 0; C^1 across breakpoints.
  double time_scale = 1.0;
  double amplitude = 1.0;  // multiplies the schedule

  // Samples: C^1 cubic Hermite through (t_j, f_j) with finite-difference slopes
  std::vector<double> ts;
  std::vector<Vec3> fs;

  static AppliedField constant(const Vec3& v) {
    AppliedField f;
    f.value = v;
    return f;
  }
  static AppliedField ramp(double time_scale = 1.0, double amplitude = 1.0) {
    if (!(time_scale > 0.0)) throw std::invalid_argument("ramp: time_scale must be > 0");
    AppliedField f;
    f.kind = Kind::Ramp;
    f.time_scale = time_scale;
    f.amplitude = amplitude;
    return f;
  }
  static AppliedField samples(std::vector<double> t, std::vector<Vec3> v) {
    if (t.size() < 2 || t.size() != v.size())
      throw std::invalid_argument("samples: need >= 2 matching samples");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1])) throw std::invalid_argument("samples: times must increase");
    AppliedField f;
    f.kind = Kind::Samples;
    f.ts = std::move(t);
    f.fs = std::move(v);
    return f;
  }

  /// Largest admissible evaluation time (infinity for constants).
  double max_time() const {
    switch (kind) {
      case Kind::Constant: return std::numeric_limits<double>::infinity();
      case Kind::Ramp: return 7.0 * time_scale;
      case Kind::Samples: return ts.back();
    }
    return 0.0;
  }
};

inline double ramp_profile(double s) {
  if (s <= 1.0) return 15.0 * s * s;
  if (s <= 2.0) return 30.0 - 15.0 * (s - 2.0) * (s - 2.0);
  if (s <= 4.0) return 30.0;
  if (s <= 5.0) return 30.0 - 15.0 * (s - 4.0) * (s - 4.0);
  if (s <= 6.0) return 15.0 * (s - 6.0) * (s - 6.0);
  return 0.0;
}

inline Vec3 eval_applied(const AppliedField& f, double t) {
  if (t < -1e-14 || t > f.max_time() * (1.0 + 1e-14) + 1e-14)
    throw std::domain_error("eval_applied: t outside [0, T]");
  switch (f.kind) {
    case AppliedField::Kind::Constant:
      return f.value;
    case AppliedField::Kind::Ramp:
      return {f.amplitude * ramp_profile(t / f.time_scale), 0.0, 0.0};
    case AppliedField::Kind::Samples: {
      const auto& ts = f.ts;
      if (t <= ts.front()) return f.fs.front();
      if (t >= ts.back()) return f.fs.back();
      std::size_t j = 1;
      while (ts[j] < t) ++j;
      const std::size_t i = j - 1;
      const double h = ts[j] - ts[i];
      const double s = (t - ts[i]) / h;
      auto slope = [&](std::size_t a) -> Vec3 {
        if (a == 0) return (f.fs[1] - f.fs[0]) / (ts[1] - ts[0]);
        if (a + 1 == ts.size()) return (f.fs[a] - f.fs[a - 1]) / (ts[a] - ts[a - 1]);
        return (f.fs[a + 1] - f.fs[a - 1]) / (ts[a + 1] - ts[a - 1]);
      };
      const Vec3 m0 = slope(i), m1 = slope(j);
      const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
      const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
      return h00 * f.fs[i] + (h * h10) * m0 + h01 * f.fs[j] + (h * h11) * m1;
    }
  }
  return {};
}

}  // namespace tpsmag
