#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tpsmag/fem.hpp"
#include "tpsmag/fields.hpp"
#include "tpsmag/mesh.hpp"
#include "tpsmag/solvers.hpp"
#include "tpsmag/sparse.hpp"
#include "tpsmag/vec.hpp"

namespace tpsmag {

// ---------------------------------------------------------------------------
// Stabilization functions rho(k), M(k) and the weight function W_M(s).

struct RhoChoice {
  enum class Kind { Canonical, PowerLaw, Zero };
  Kind kind = Kind::Canonical;
  double delta = 0.0;  // rho(k) = k^delta for PowerLaw

  static RhoChoice canonical() { return {}; }
  static RhoChoice power(double d) { return {Kind::PowerLaw, d}; }
  static RhoChoice zero() { return {Kind::Zero, 0.0}; }
};

struct MChoice {
  enum class Kind { Canonical, Constant };
  Kind kind = Kind::Canonical;
  double value = 0.0;  // for Constant

  static MChoice canonical() { return {}; }
  static MChoice constant(double m) { return {Kind::Constant, m}; }
};

/// rho(k) = |k log k| for the canonical choice (natural log), k in (0,1).
inline double rho_value(const RhoChoice& c, double k) {
  if (!(k > 0.0)) throw std::domain_error("rho: k must be > 0");
  switch (c.kind) {
    case RhoChoice::Kind::Canonical:
      if (k >= 1.0) throw std::domain_error("rho: canonical choice requires k < 1");
      return std::abs(k * std::log(k));
    case RhoChoice::Kind::PowerLaw:
      return std::pow(k, c.delta);
    case RhoChoice::Kind::Zero:
      return 0.0;
  }
  return 0.0;
}

/// M(k) = |k log k|^(-1) for the canonical choice, k in (0,1).
inline double M_value(const MChoice& c, double k) {
  if (!(k > 0.0)) throw std::domain_error("M: k must be > 0");
  switch (c.kind) {
    case MChoice::Kind::Canonical:
      if (k >= 1.0) throw std::domain_error("M: canonical choice requires k < 1");
      return 1.0 / std::abs(k * std::log(k));
    case MChoice::Kind::Constant:
      return c.value;
  }
  return 0.0;
}

/// W_M(s): alpha + (k/2) min(s, M) for s >= 0,
///         alpha / (1 + (k/(2 alpha)) min(-s, M)) for s < 0. Strictly positive.
inline double weight(double s, double k, double M_of_k, double alpha) {
  if (s >= 0.0) return alpha + 0.5 * k * std::min(s, M_of_k);
  return alpha / (1.0 + (0.5 * k / alpha) * std::min(-s, M_of_k));
}

// ---------------------------------------------------------------------------
// Scheme configuration.

enum class Variant { TPS1, TPS2 };

struct SchemeConfig {
  double alpha = 1.0;
  double lex2 = 1.0;  // exchange length squared
  double k = 0.0;     // time step
  double T = 0.0;     // final time
  Variant variant = Variant::TPS2;
  FieldStrategy strategy = FieldStrategy::AB;
  RhoChoice rho = RhoChoice::canonical();
  MChoice M = MChoice::canonical();
  double fixpoint_tol = 1e-10;
  int fixpoint_max = 200;
  bool record_fixpoint_diffs = false;
  SolverConfig solver;

  /// rho used by the scheme; TPS1 collapses W = alpha and rho = 0.
  double rho_k() const { return variant == Variant::TPS1 ? 0.0 : rho_value(rho, k); }

  /// Throws unless alpha in (0,1], lex2 > 0, 0 < k, and (TPS2) the guard
  /// M(k) k / 2 < alpha / 2 holds, which keeps W >= alpha/2.
  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("scheme.alpha must be in (0,1]");
    if (!(lex2 > 0.0)) throw std::invalid_argument("scheme.lex2 must be > 0");
    if (!(k > 0.0)) throw std::invalid_argument("scheme.k must be > 0");
    if (!(T > 0.0)) throw std::invalid_argument("scheme.T must be > 0");
    if (!(fixpoint_tol > 0.0)) throw std::invalid_argument("scheme.fixpoint_tol must be > 0");
    solver.validate();
    if (variant == Variant::TPS2) {
      const double Mk = M_value(M, k);
      if (!(Mk > 0.0)) throw std::invalid_argument("scheme: M(k) must be > 0");
      if (!(Mk * k / 2.0 < alpha / 2.0))
        throw std::invalid_argument("scheme: time step too large, M(k) k / 2 >= alpha / 2");
      rho_value(rho, k);  // domain check
    }
  }
};

struct LlgOperators {
  LowerOrderOp pi;
  DissipativeOp Pi;
  AppliedField f = AppliedField::constant({0, 0, 0});
};

// ---------------------------------------------------------------------------
// State, reports, workspace.

struct LlgState {
  NodalField m_prev, m_curr;  // unit at nodes; m_prev = m_curr at step 0
  NodalField v_last;
  int index = 0;

  static LlgState initial(NodalField m0) {
    LlgState s;
    s.m_prev = m0;
    s.m_curr = std::move(m0);
    s.v_last.assign(s.m_curr.size(), Vec3{});
    return s;
  }
};

struct StepReport {
  int index = 0;
  double t_end = 0.0;
  double lambda_min = 0.0, lambda_max = 0.0;
  double max_unit_violation = 0.0;
  double max_tangency = 0.0;  // max nodal |m.v| after the solve
  double v_norm = 0.0;        // L2 norm of v
  int krylov_solves = 0;
  int krylov_iterations = 0;
  int fixpoint_iterations = 0;
  std::vector<double> fixpoint_diffs;  // filled when record_fixpoint_diffs is set

  // discrete energy inequality of the LLG step (exchange + weighted velocity
  // + stabilization vs. lower-order power input), 1e-9 slack
  double ledger_lhs = 0.0, ledger_rhs = 0.0;
  bool ledger_ok = true;

  // energies after the step
  double e_exchange = 0.0, e_lower = 0.0, e_zeeman = 0.0, e_field = 0.0, e_total = 0.0;
  double avg_mx = 0.0, avg_my = 0.0;

  // eddy-current ledgers, filled by coupled steps
  double ledger62i_lhs = 0.0, ledger62i_rhs = 0.0;
  bool ledger62i_ok = true;
  double ledger62ii_lhs = 0.0, ledger62ii_rhs = 0.0;
  bool ledger62ii_ok = true;
};

struct LlgWorkspace {
  const TetMesh* mesh = nullptr;
  const QuadRule* rule = &quad_degree2();
  SparseMatrix mass;       // scalar P1 mass
  SparseMatrix stiffness;  // scalar P1 stiffness
  double volume = 0.0;
};

inline LlgWorkspace make_llg_workspace(const TetMesh& mesh) {
  LlgWorkspace ws;
  ws.mesh = &mesh;
  ws.mass = assemble_mass_p1(mesh);
  ws.stiffness = assemble_stiffness_p1(mesh);
  ws.volume = mesh.total_volume();
  return ws;
}

// ---------------------------------------------------------------------------
// Step (a): lambda = -lex2 |grad m|^2 + (f + pi(m) + Pi(m) [+ h]) . m at
// quadrature points; |grad m|^2 is elementwise constant, the rest is
// P1-interpolated, an edge field h is evaluated directly.

inline QuadScalars compute_lambda(const LlgWorkspace& ws, const SchemeConfig& cfg,
                                  const NodalField& m, const Vec3& f_t, const LowerOrderOp& pi_op,
                                  const DissipativeOp& Pi_op,
                                  const QuadVectors* h_at_qp = nullptr) {
  const TetMesh& mesh = *ws.mesh;
  const QuadRule& rule = *ws.rule;
  const NodalField pim = eval_pi(pi_op, m);
  const OpField Pim = eval_Pi(Pi_op, m, mesh, rule);
  QuadScalars lam;
  lam.nq = rule.size();
  lam.v.resize(static_cast<std::size_t>(mesh.n_tets()) * lam.nq);
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double g2 = grad_frobenius2(field_gradient(m, mesh, t));
    for (int q = 0; q < lam.nq; ++q) {
      const Vec3 mq = field_value(m, mesh, t, rule.points[q]);
      Vec3 field = f_t + field_value(pim, mesh, t, rule.points[q]) + Pim.at_qp(mesh, rule, t, q);
      if (h_at_qp) field += h_at_qp->at(t, q);
      lam.at(t, q) = -cfg.lex2 * g2 + dot(field, mq);
    }
  }
  return lam;
}

// ---------------------------------------------------------------------------
// Tangent space: per-vertex orthonormal pair spanning the plane orthogonal to m.

struct TangentBasis {
  std::vector<Vec3> t1, t2;
  int n() const { return static_cast<int>(t1.size()); }
};

/// Crosses m with the coordinate axis least aligned with it; deterministic.
inline TangentBasis tangent_basis(const NodalField& m) {
  TangentBasis b;
  b.t1.resize(m.size());
  b.t2.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Vec3& mi = m[i];
    int best = 0;
    double best_abs = std::abs(mi.x);
    if (std::abs(mi.y) < best_abs) { best = 1; best_abs = std::abs(mi.y); }
    if (std::abs(mi.z) < best_abs) { best = 2; }
    Vec3 e{};
    e[best] = 1.0;
    b.t1[i] = normalized(cross(mi, e));
    b.t2[i] = cross(normalized(mi), b.t1[i]);
  }
  return b;
}

/// B^T A B on the 2n tangent dofs, A given on interleaved 3n dofs.
inline SparseMatrix reduce_to_tangent(const SparseMatrix& A, const TangentBasis& basis) {
  const int n = basis.n();
  TripletBuffer buf(2 * n, 2 * n);
  for (int row = 0; row < A.rows; ++row) {
    const int a = row / 3, c1 = row % 3;
    for (int p = A.row_ptr[row]; p < A.row_ptr[row + 1]; ++p) {
      const int b = A.col[p] / 3, c2 = A.col[p] % 3;
      const double v = A.val[p];
      buf.add(2 * a + 0, 2 * b + 0, basis.t1[a][c1] * v * basis.t1[b][c2]);
      buf.add(2 * a + 0, 2 * b + 1, basis.t1[a][c1] * v * basis.t2[b][c2]);
      buf.add(2 * a + 1, 2 * b + 0, basis.t2[a][c1] * v * basis.t1[b][c2]);
      buf.add(2 * a + 1, 2 * b + 1, basis.t2[a][c1] * v * basis.t2[b][c2]);
    }
  }
  return buf.compress();
}

inline std::vector<double> reduce_vector(const std::vector<double>& b, const TangentBasis& basis) {
  const int n = basis.n();
  std::vector<double> r(2 * n);
  for (int a = 0; a < n; ++a) {
    const Vec3 ba{b[3 * a], b[3 * a + 1], b[3 * a + 2]};
    r[2 * a + 0] = dot(basis.t1[a], ba);
    r[2 * a + 1] = dot(basis.t2[a], ba);
  }
  return r;
}

inline NodalField expand_vector(const std::vector<double>& x, const TangentBasis& basis) {
  const int n = basis.n();
  NodalField v(n);
  for (int a = 0; a < n; ++a) v[a] = x[2 * a] * basis.t1[a] + x[2 * a + 1] * basis.t2[a];
  return v;
}

// ---------------------------------------------------------------------------
// The linear system of step (b) and its right-hand side.

struct LlgSystem {
  SparseMatrix weighted_mass;  // <W(lambda) u, phi>, 3n x 3n
  SparseMatrix full;           // + cross term + (lex2/2) k (1+rho) stiffness
  TangentBasis basis;
  SparseMatrix reduced;        // 2n x 2n
};

inline LlgSystem build_llg_system(const LlgWorkspace& ws, const SchemeConfig& cfg,
                                  const NodalField& m, const QuadScalars& lambda) {
  const TetMesh& mesh = *ws.mesh;
  const QuadRule& rule = *ws.rule;
  LlgSystem sys;

  QuadScalars w;
  w.nq = lambda.nq;
  w.v.resize(lambda.v.size());
  if (cfg.variant == Variant::TPS1) {
    std::fill(w.v.begin(), w.v.end(), cfg.alpha);
  } else {
    const double Mk = M_value(cfg.M, cfg.k);
    for (std::size_t i = 0; i < lambda.v.size(); ++i)
      w.v[i] = weight(lambda.v[i], cfg.k, Mk, cfg.alpha);
  }
  sys.weighted_mass = assemble_weighted_mass(mesh, rule, w);

  const SparseMatrix cross_term = assemble_cross_term(mesh, rule, m);
  const double stiff_coef = 0.5 * cfg.lex2 * cfg.k * (1.0 + cfg.rho_k());
  TripletBuffer buf(3 * mesh.n_vertices(), 3 * mesh.n_vertices());
  auto add_all = [&buf](const SparseMatrix& A, double s) {
    for (int i = 0; i < A.rows; ++i)
      for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p) buf.add(i, A.col[p], s * A.val[p]);
  };
  add_all(sys.weighted_mass, 1.0);
  add_all(cross_term, 1.0);
  add_componentwise(buf, ws.stiffness, stiff_coef);
  sys.full = buf.compress();

  sys.basis = tangent_basis(m);
  sys.reduced = reduce_to_tangent(sys.full, sys.basis);
  return sys;
}

struct LlgRhs {
  std::vector<double> exchange;  // -lex2 (S ox I3) m
  std::vector<double> lower;     // <f(t_mid), phi> + <pi^i, phi> + <Pi^i, phi>
};

/// v_iter is the current iterate for the affine-in-v FI operators (null for AB/EE).
inline LlgRhs build_llg_rhs(const LlgWorkspace& ws, const SchemeConfig& cfg,
                            FieldStrategy strategy, const LlgOperators& ops, const NodalField& m,
                            const NodalField& m_prev, double t_i, const NodalField* v_iter) {
  const TetMesh& mesh = *ws.mesh;
  const QuadRule& rule = *ws.rule;
  const int n3 = 3 * mesh.n_vertices();
  LlgRhs rhs;

  std::vector<double> m_flat;
  flatten(m, m_flat);
  apply_componentwise(ws.stiffness, m_flat, rhs.exchange);
  for (double& v : rhs.exchange) v *= -cfg.lex2;

  rhs.lower.assign(n3, 0.0);
  add_load_constant(mesh, eval_applied(ops.f, t_i + 0.5 * cfg.k), rhs.lower);
  if (ops.pi.kind != LowerOrderOp::Kind::Zero) {
    const NodalField pi_step = build_pi_step(strategy, ops.pi, v_iter, m, &m_prev, cfg.k);
    add_load_nodal(mesh, rule, pi_step, rhs.lower);
  }
  if (ops.Pi.kind != DissipativeOp::Kind::Zero) {
    const OpField Pi_step = build_Pi_step(strategy, ops.Pi, v_iter, m, &m_prev, cfg.k, mesh, rule);
    if (Pi_step.is_quad)
      add_load_quad(mesh, rule, Pi_step.quad, rhs.lower);
    else
      add_load_nodal(mesh, rule, Pi_step.nodal, rhs.lower);
  }
  return rhs;
}

/// Solves the reduced 2n tangent system; the returned v is nodally orthogonal
/// to m by construction of the basis.
inline NodalField solve_tangent_step(const LlgSystem& sys, const std::vector<double>& rhs_full,
                                     const SolverConfig& solver, SolveStats* stats = nullptr) {
  const std::vector<double> r = reduce_vector(rhs_full, sys.basis);
  std::vector<double> x;
  SolveStats st = gmres(sys.reduced, r, x, solver);
  if (stats) *stats = st;
  return expand_vector(x, sys.basis);
}

/// Step (c): nodal projection (m + k v) / |m + k v|. Unit at nodes; throws if
/// |m + k v| < 1 - 1e-10 at a node, which signals a tangency violation upstream.
inline NodalField project_update(const NodalField& m, const NodalField& v, double k) {
  NodalField out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Vec3 w = m[i] + k * v[i];
    const double n = norm(w);
    if (n < 1.0 - 1e-10) throw std::runtime_error("project_update: |m + k v| < 1 at a node");
    out[i] = w / n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// One step of the integrator: (a) lambda, (b) constrained solve, (c) projection.
// FI evaluates the affine right-hand side by the fixpoint iteration
// eta^0 = 0, eta^(l+1) solving the system with the operators at eta^l, stopped
// when || eta^(l+1) - eta^l ||_L2 <= fixpoint_tol.

namespace detail {

inline double ledger_lhs(const LlgWorkspace& ws, const SchemeConfig& cfg, const NodalField& m_old,
                         const NodalField& m_new, const NodalField& v,
                         const SparseMatrix& weighted_mass) {
  std::vector<double> v_flat, tmp;
  flatten(v, v_flat);
  weighted_mass.apply(v_flat, tmp);
  const double wvv = dot(v_flat, tmp);
  const double ex_new = h1_seminorm(ws.stiffness, m_new), ex_old = h1_seminorm(ws.stiffness, m_old);
  const double dt_ex = 0.5 * cfg.lex2 * (ex_new * ex_new - ex_old * ex_old) / cfg.k;
  const double rho_term =
      0.5 * cfg.lex2 * cfg.k * cfg.rho_k() * std::pow(h1_seminorm(ws.stiffness, v), 2);
  return dt_ex + wvv + rho_term;
}

}  // namespace detail

struct LlgStepOptions {
  FieldStrategy strategy = FieldStrategy::AB;
  Variant variant = Variant::TPS2;
  const std::vector<double>* extra_load = nullptr;  // e.g. the <h^Theta, phi> pairing
  const QuadVectors* h_at_qp = nullptr;             // h contribution to lambda
};

inline StepReport llg_step(LlgState& state, const SchemeConfig& cfg_in, const LlgOperators& ops,
                           const LlgWorkspace& ws, const LlgStepOptions& opt) {
  SchemeConfig cfg = cfg_in;
  cfg.variant = opt.variant;
  cfg.strategy = opt.strategy;

  const double t_i = state.index * cfg.k;
  StepReport rep;
  rep.index = state.index;
  rep.t_end = t_i + cfg.k;

  const QuadScalars lambda = compute_lambda(ws, cfg, state.m_curr, eval_applied(ops.f, t_i),
                                            ops.pi, ops.Pi, opt.h_at_qp);
  rep.lambda_min = *std::min_element(lambda.v.begin(), lambda.v.end());
  rep.lambda_max = *std::max_element(lambda.v.begin(), lambda.v.end());

  const LlgSystem sys = build_llg_system(ws, cfg, state.m_curr, lambda);

  NodalField v;
  if (cfg.strategy == FieldStrategy::FI) {
    NodalField eta(state.m_curr.size(), Vec3{});
    int sweeps = 0;
    for (;;) {
      if (sweeps >= cfg.fixpoint_max)
        throw std::runtime_error("llg_step: fixpoint did not contract (k too large?)");
      const LlgRhs rhs =
          build_llg_rhs(ws, cfg, FieldStrategy::FI, ops, state.m_curr, state.m_prev, t_i, &eta);
      std::vector<double> b = rhs.exchange;
      axpy(1.0, rhs.lower, b);
      if (opt.extra_load) axpy(1.0, *opt.extra_load, b);
      SolveStats st;
      NodalField eta_next = solve_tangent_step(sys, b, cfg.solver, &st);
      rep.krylov_solves += 1;
      rep.krylov_iterations += st.iterations;
      sweeps += 1;
      const double diff = l2_norm(ws.mass, eta_next - eta);
      eta = std::move(eta_next);
      if (cfg.record_fixpoint_diffs) rep.fixpoint_diffs.push_back(diff);
      if (diff <= cfg.fixpoint_tol) break;
    }
    rep.fixpoint_iterations = sweeps;
    v = std::move(eta);
  } else {
    const LlgRhs rhs =
        build_llg_rhs(ws, cfg, cfg.strategy, ops, state.m_curr, state.m_prev, t_i, nullptr);
    std::vector<double> b = rhs.exchange;
    axpy(1.0, rhs.lower, b);
    if (opt.extra_load) axpy(1.0, *opt.extra_load, b);
    SolveStats st;
    v = solve_tangent_step(sys, b, cfg.solver, &st);
    rep.krylov_solves = 1;
    rep.krylov_iterations = st.iterations;
  }

  rep.max_tangency = max_nodal_dot(state.m_curr, v);
  rep.v_norm = l2_norm(ws.mass, v);

  const NodalField m_new = project_update(state.m_curr, v, cfg.k);
  rep.max_unit_violation = max_unit_violation(m_new);

  // ledger: lower-order power input evaluated at the converged v
  {
    const NodalField* vi = cfg.strategy == FieldStrategy::FI ? &v : nullptr;
    const LlgRhs rhs =
        build_llg_rhs(ws, cfg, cfg.strategy, ops, state.m_curr, state.m_prev, t_i, vi);
    std::vector<double> v_flat;
    flatten(v, v_flat);
    rep.ledger_rhs = dot(rhs.lower, v_flat);
    rep.ledger_lhs = detail::ledger_lhs(ws, cfg, state.m_curr, m_new, v, sys.weighted_mass);
    rep.ledger_ok = rep.ledger_lhs <= rep.ledger_rhs + 1e-9;
  }

  state.m_prev = std::move(state.m_curr);
  state.m_curr = m_new;
  state.v_last = std::move(v);
  state.index += 1;
  return rep;
}

inline StepReport llg_step(LlgState& state, const SchemeConfig& cfg, const LlgOperators& ops,
                           const LlgWorkspace& ws) {
  LlgStepOptions opt;
  // first step runs fully implicit TPS2 to preserve second-order convergence
  opt.strategy = state.index == 0 ? FieldStrategy::FI : cfg.strategy;
  opt.variant = state.index == 0 ? Variant::TPS2 : cfg.variant;
  return llg_step(state, cfg, ops, ws, opt);
}

// ---------------------------------------------------------------------------
// Trajectories.

struct Trajectory {
  std::vector<double> times;
  std::vector<NodalField> m;
  std::vector<EdgeField> h;  // empty for pure LLG runs
};

inline Vec3 integral_field(const SparseMatrix& mass, const NodalField& m) {
  Vec3 s{};
  for (int i = 0; i < mass.rows; ++i)
    for (int p = mass.row_ptr[i]; p < mass.row_ptr[i + 1]; ++p) s += mass.val[p] * m[mass.col[p]];
  return s;
}

/// Runs N = T/k steps; samples m every sample_every steps (and at t = 0, T).
inline Trajectory run_llg(const NodalField& m0, const SchemeConfig& cfg, const LlgOperators& ops,
                          const LlgWorkspace& ws, int sample_every = 1,
                          const std::function<void(const StepReport&)>& on_step = nullptr) {
  cfg.validate();
  const int N = static_cast<int>(std::llround(cfg.T / cfg.k));
  if (N < 1 || std::abs(N * cfg.k - cfg.T) > 1e-9 * cfg.T)
    throw std::invalid_argument("run_llg: T must be an integer multiple of k");

  LlgState state = LlgState::initial(m0);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.m.push_back(state.m_curr);
  for (int i = 0; i < N; ++i) {
    StepReport rep = llg_step(state, cfg, ops, ws);
    if (on_step) {
      rep.e_exchange = 0.5 * cfg.lex2 * std::pow(h1_seminorm(ws.stiffness, state.m_curr), 2);
      const NodalField pim = eval_pi(ops.pi, state.m_curr);
      rep.e_lower = -0.5 * mass_inner(ws.mass, pim, state.m_curr);
      rep.e_zeeman = -dot(eval_applied(ops.f, rep.t_end), integral_field(ws.mass, state.m_curr));
      rep.e_total = rep.e_exchange + rep.e_lower + rep.e_zeeman;
      const Vec3 avg = integral_field(ws.mass, state.m_curr) / ws.volume;
      rep.avg_mx = avg.x;
      rep.avg_my = avg.y;
      on_step(rep);
    }
    if ((i + 1) % sample_every == 0 || i + 1 == N) {
      traj.times.push_back(rep.t_end);
      traj.m.push_back(state.m_curr);
    }
  }
  return traj;
}

}  // namespace tpsmag
