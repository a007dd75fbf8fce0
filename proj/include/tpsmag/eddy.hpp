#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "tpsmag/edge_fem.hpp"
#include "tpsmag/fem.hpp"
#include "tpsmag/mesh.hpp"
#include "tpsmag/solvers.hpp"
#include "tpsmag/tps.hpp"
#include "tpsmag/vec.hpp"

namespace tpsmag {

// ---------------------------------------------------------------------------
// Coupling schedules Theta for the two-step treatment of h in the LLG part:
// row (Theta_1, Theta_2, Theta_3) weights (h^{i-1}, h^i, h^{i+1}), summing to 1.
//   FC   : (0, 1/2, 1/2) midpoint at every step (fully coupled)
//   DC-2 : midpoint at i = 0, Adams-Bashforth (-1/2, 3/2, 0) for i >= 1
//   DC-1 : (0, 1, 0) explicit Euler at every step
//   SF   : DC-2 schedule, but the eddy right-hand side uses v instead of d_t m

enum class Coupling { FC, DC2, DC1, SF };

inline std::array<double, 3> theta_row(Coupling c, int i) {
  switch (c) {
    case Coupling::FC: return {0.0, 0.5, 0.5};
    case Coupling::DC2:
    case Coupling::SF: return i == 0 ? std::array<double, 3>{0.0, 0.5, 0.5}
                                     : std::array<double, 3>{-0.5, 1.5, 0.0};
    case Coupling::DC1: return {0.0, 1.0, 0.0};
  }
  return {};
}

/// Theta-combined field; needs h_mid whenever Theta_3 != 0 (h^{i+1} = 2 h_mid - h^i).
inline EdgeField theta_field(Coupling c, int i, const EdgeField& h_curr, const EdgeField& h_prev,
                             const EdgeField* h_mid = nullptr) {
  const auto th = theta_row(c, i);
  EdgeField out(h_curr.size(), 0.0);
  if (th[2] != 0.0) {
    if (!h_mid) throw std::invalid_argument("theta_field: schedule needs h_mid");
    for (std::size_t e = 0; e < out.size(); ++e)
      out[e] = th[2] * (2.0 * (*h_mid)[e] - h_curr[e]) + th[1] * h_curr[e] + th[0] * h_prev[e];
  } else {
    for (std::size_t e = 0; e < out.size(); ++e) out[e] = th[1] * h_curr[e] + th[0] * h_prev[e];
  }
  return out;
}

// ---------------------------------------------------------------------------

struct EllgConfig {
  SchemeConfig scheme;
  double mu0 = 1.0;
  double sigma_inner = 1.0;  // conductivity on omega
  double sigma_outer = 1.0;  // conductivity on Omega \ omega
  Coupling coupling = Coupling::DC2;

  void validate() const {
    scheme.validate();
    if (!(mu0 > 0.0)) throw std::invalid_argument("ellg.mu0 must be > 0");
    if (!(sigma_inner > 0.0) || !(sigma_outer > 0.0))
      throw std::invalid_argument("ellg.sigma must be >= sigma_0 > 0");
  }
};

/// Geometry and immutable matrices for a run on Omega with ferromagnet omega.
struct EllgWorkspace {
  const TetMesh* omega_big = nullptr;  // conductor Omega
  SubMeshMap map;
  std::unique_ptr<TetMesh> omega;      // ferromagnet, local numbering
  LlgWorkspace llg;                    // P1 matrices on omega

  std::vector<double> sigma;           // per tet of Omega
  SparseMatrix edge_mass;              // <u, zeta>_Omega
  SparseMatrix curlcurl;               // <sigma^-1 curl u, curl zeta>_Omega
  SparseMatrix curlcurl_unit;          // sigma = 1, for H(curl) norms
  SparseMatrix pairing;                // <u_omega, zeta>_omega, edges x 3 n_omega
};

inline EllgWorkspace make_ellg_workspace(const TetMesh& omega_big, const Vec3& inner_lo,
                                         const Vec3& inner_hi, const EllgConfig& cfg) {
  EllgWorkspace ws;
  ws.omega_big = &omega_big;
  ws.map = extract_submesh(omega_big, inner_lo, inner_hi);
  ws.omega = std::make_unique<TetMesh>(submesh_as_mesh(omega_big, ws.map));
  ws.llg = make_llg_workspace(*ws.omega);

  ws.sigma.assign(omega_big.n_tets(), cfg.sigma_outer);
  for (int t : ws.map.inner_tets) ws.sigma[t] = cfg.sigma_inner;
  std::vector<double> sigma_inv(ws.sigma.size());
  for (std::size_t t = 0; t < ws.sigma.size(); ++t) sigma_inv[t] = 1.0 / ws.sigma[t];

  ws.edge_mass = assemble_edge_mass(omega_big);
  ws.curlcurl = assemble_curlcurl(omega_big, sigma_inv);
  ws.curlcurl_unit = assemble_curlcurl(omega_big, 1.0);
  ws.pairing = assemble_edge_nodal_pairing(omega_big, ws.map);
  return ws;
}

struct EllgState {
  LlgState llg;
  EdgeField h_prev, h_curr;  // h_prev = h_curr at step 0
  EdgeField h_mid_last;      // nu of the most recent step

  static EllgState initial(NodalField m0, EdgeField h0) {
    EllgState s;
    s.llg = LlgState::initial(std::move(m0));
    s.h_prev = h0;
    s.h_curr = std::move(h0);
    return s;
  }
};

/// <u, zeta_E>_omega load vector on nodal dofs: P^T h.
inline std::vector<double> pairing_load(const EllgWorkspace& ws, const EdgeField& h) {
  std::vector<double> out(ws.pairing.cols, 0.0);
  ws.pairing.apply_transpose_add(h, out);
  return out;
}

/// <u, h>_omega for nodal u (flattened) and edge h.
inline double pairing_inner(const EllgWorkspace& ws, const std::vector<double>& u_flat,
                            const EdgeField& h) {
  std::vector<double> Pu;
  ws.pairing.apply(u_flat, Pu);
  return dot(Pu, h);
}

/// Edge field evaluated at the quadrature points of the omega tets.
inline QuadVectors edge_field_at_omega_qp(const EllgWorkspace& ws, const EdgeField& h) {
  const QuadRule& rule = *ws.llg.rule;
  QuadVectors qv;
  qv.nq = rule.size();
  qv.v.resize(static_cast<std::size_t>(ws.map.inner_tets.size()) * qv.nq);
  for (std::size_t tl = 0; tl < ws.map.inner_tets.size(); ++tl) {
    const int tg = ws.map.inner_tets[tl];
    for (int q = 0; q < qv.nq; ++q)
      qv.at(static_cast<int>(tl), q) = edge_field_value(h, *ws.omega_big, tg, rule.points[q]);
  }
  return qv;
}

/// (2 mu0 / k) <nu, zeta> + <sigma^-1 curl nu, curl zeta>; SPD.
inline SparseMatrix build_eddy_system(const EllgWorkspace& ws, const EllgConfig& cfg) {
  return sparse_add(ws.edge_mass, ws.curlcurl, 2.0 * cfg.mu0 / cfg.scheme.k, 1.0);
}

/// Midpoint eddy solve: rhs -mu0 <u, zeta>_omega + (2 mu0 / k) <h_curr, zeta>_Omega,
/// where u is d_t m (default) or v (SF). Recovery: h_next = 2 nu - h_curr.
inline EdgeField solve_midpoint_eddy(const EllgWorkspace& ws, const EllgConfig& cfg,
                                     const SparseMatrix& eddy_system,
                                     const std::vector<double>& u_flat, const EdgeField& h_curr,
                                     SolveStats* stats = nullptr) {
  std::vector<double> b(ws.edge_mass.rows, 0.0);
  ws.pairing.apply_add(u_flat, b, -cfg.mu0);
  ws.edge_mass.apply_add(h_curr, b, 2.0 * cfg.mu0 / cfg.scheme.k);
  std::vector<double> nu;
  SolveStats st = cg(eddy_system, b, nu, cfg.scheme.solver);
  if (stats) *stats = st;
  return nu;
}

// ---------------------------------------------------------------------------
// Coupled step of the decoupled/coupled ELLG integrator.

namespace detail {

inline std::vector<double> flat_diff_scaled(const NodalField& a, const NodalField& b, double s) {
  std::vector<double> out(3 * a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int c = 0; c < 3; ++c) out[3 * i + c] = s * (a[i][c] - b[i][c]);
  return out;
}

inline double edge_quadratic(const SparseMatrix& A, const EdgeField& h) {
  std::vector<double> Ah;
  A.apply(h, Ah);
  return dot(h, Ah);
}

}  // namespace detail

struct EddyLedger {
  double lhs = 0.0, rhs = 0.0;
  bool ok = true;
};

/// mu0 ||d_t h||^2_Omega + d_t ||sigma^-1/2 curl h||^2_Omega <= mu0 ||d_t m||^2_omega.
inline EddyLedger energy_dissipation_check_h(const EllgWorkspace& ws, const EdgeField& h_before,
                                             const EdgeField& h_after, const NodalField& m_before,
                                             const NodalField& m_after, double k, double mu0,
                                             double slack = 1e-9) {
  EddyLedger led;
  EdgeField dth(h_after.size());
  for (std::size_t e = 0; e < dth.size(); ++e) dth[e] = (h_after[e] - h_before[e]) / k;
  NodalField dtm(m_after.size());
  for (std::size_t i = 0; i < dtm.size(); ++i) dtm[i] = (m_after[i] - m_before[i]) / k;
  led.lhs = mu0 * detail::edge_quadratic(ws.edge_mass, dth) +
            (detail::edge_quadratic(ws.curlcurl, h_after) -
             detail::edge_quadratic(ws.curlcurl, h_before)) / k;
  led.rhs = mu0 * mass_inner(ws.llg.mass, dtm, dtm);
  led.ok = led.lhs <= led.rhs + slack;
  return led;
}

inline StepReport coupled_step(EllgState& state, const EllgConfig& cfg, const LlgOperators& ops,
                               const EllgWorkspace& ws, const SparseMatrix& eddy_system) {
  const SchemeConfig& scheme = cfg.scheme;
  const double k = scheme.k;
  const int i = state.llg.index;
  const double t_i = i * k;
  const auto th = theta_row(cfg.coupling, i);
  const bool implicit_h = th[2] != 0.0;

  StepReport rep;
  const NodalField m_old = state.llg.m_curr;
  EdgeField h_mid;

  if (!implicit_h) {
    // decoupled: (b) with Theta-combined h, (c), then (d)
    EdgeField h_comb = theta_field(cfg.coupling, i, state.h_curr, state.h_prev);
    const std::vector<double> extra = pairing_load(ws, h_comb);
    const QuadVectors h_qp = edge_field_at_omega_qp(ws, state.h_curr);

    LlgStepOptions opt;
    opt.strategy = scheme.strategy;
    opt.variant = scheme.variant;
    opt.extra_load = &extra;
    opt.h_at_qp = &h_qp;
    rep = llg_step(state.llg, scheme, ops, ws.llg, opt);

    const bool use_v = cfg.coupling == Coupling::SF;
    const std::vector<double> u_flat =
        use_v ? [&] { std::vector<double> f; flatten(state.llg.v_last, f); return f; }()
              : detail::flat_diff_scaled(state.llg.m_curr, m_old, 1.0 / k);
    SolveStats st;
    h_mid = solve_midpoint_eddy(ws, cfg, eddy_system, u_flat, state.h_curr, &st);
    rep.krylov_solves += 1;
    rep.krylov_iterations += st.iterations;

    // Theta-combined field minus midpoint, for the coupled energy ledger
    std::vector<double> v_flat;
    flatten(state.llg.v_last, v_flat);
    EdgeField diff(h_mid.size());
    for (std::size_t e = 0; e < diff.size(); ++e) diff[e] = h_comb[e] - h_mid[e];
    const std::vector<double> dtm_flat =
        detail::flat_diff_scaled(state.llg.m_curr, m_old, 1.0 / k);
    std::vector<double> vmdt(v_flat.size());
    for (std::size_t j = 0; j < v_flat.size(); ++j) vmdt[j] = v_flat[j] - dtm_flat[j];
    // under SF the eddy equation is tested with v, so the v - d_t m
    // correction is already absorbed there
    rep.ledger62i_rhs = rep.ledger_rhs + (use_v ? 0.0 : pairing_inner(ws, vmdt, h_mid)) +
                        pairing_inner(ws, v_flat, diff);
  } else {
    // fully coupled midpoint: joint fixpoint with eta^0 = 0, nu^0 = h_curr
    const FieldStrategy strategy = i == 0 ? FieldStrategy::FI : scheme.strategy;
    SchemeConfig sc = scheme;
    sc.strategy = strategy;

    const QuadVectors h_qp = edge_field_at_omega_qp(ws, state.h_curr);
    const QuadScalars lambda = compute_lambda(ws.llg, sc, state.llg.m_curr,
                                              eval_applied(ops.f, t_i), ops.pi, ops.Pi, &h_qp);
    rep.lambda_min = *std::min_element(lambda.v.begin(), lambda.v.end());
    rep.lambda_max = *std::max_element(lambda.v.begin(), lambda.v.end());
    const LlgSystem sys = build_llg_system(ws.llg, sc, state.llg.m_curr, lambda);

    // Theta-split load: 2 Theta_3 <nu, phi> + <(Theta_2 - Theta_3) h^i + Theta_1 h^{i-1}, phi>
    EdgeField h_static(state.h_curr.size());
    for (std::size_t e = 0; e < h_static.size(); ++e)
      h_static[e] = (th[1] - th[2]) * state.h_curr[e] + th[0] * state.h_prev[e];
    const std::vector<double> static_load = pairing_load(ws, h_static);

    std::vector<double> m_flat;
    flatten(state.llg.m_curr, m_flat);

    NodalField eta(state.llg.m_curr.size(), Vec3{});
    EdgeField nu = state.h_curr;
    int sweeps = 0;
    const bool sf = cfg.coupling == Coupling::SF;
    for (;;) {
      if (sweeps >= sc.fixpoint_max)
        throw std::runtime_error("coupled_step: fixpoint did not contract (k too large?)");
      const LlgRhs rhs = build_llg_rhs(ws.llg, sc, strategy, ops, state.llg.m_curr,
                                       state.llg.m_prev, t_i, &eta);
      std::vector<double> b = rhs.exchange;
      axpy(1.0, rhs.lower, b);
      axpy(1.0, static_load, b);
      std::vector<double> Pnu(ws.pairing.cols, 0.0);
      ws.pairing.apply_transpose_add(nu, Pnu);
      axpy(2.0 * th[2], Pnu, b);

      SolveStats st;
      NodalField eta_next = solve_tangent_step(sys, b, sc.solver, &st);
      rep.krylov_solves += 1;
      rep.krylov_iterations += st.iterations;

      std::vector<double> u_flat;
      if (sf) {
        flatten(eta_next, u_flat);
      } else {
        const NodalField m_trial = project_update(state.llg.m_curr, eta_next, k);
        u_flat = detail::flat_diff_scaled(m_trial, state.llg.m_curr, 1.0 / k);
      }
      SolveStats st2;
      EdgeField nu_next = solve_midpoint_eddy(ws, cfg, eddy_system, u_flat, state.h_curr, &st2);
      rep.krylov_solves += 1;
      rep.krylov_iterations += st2.iterations;

      sweeps += 1;
      EdgeField dnu(nu.size());
      for (std::size_t e = 0; e < nu.size(); ++e) dnu[e] = nu_next[e] - nu[e];
      const double diff =
          l2_norm(ws.llg.mass, eta_next - eta) + edge_l2_norm(ws.edge_mass, dnu);
      eta = std::move(eta_next);
      nu = std::move(nu_next);
      if (sc.record_fixpoint_diffs) rep.fixpoint_diffs.push_back(diff);
      if (diff <= sc.fixpoint_tol) break;
    }
    rep.fixpoint_iterations = sweeps;
    rep.index = i;
    rep.t_end = t_i + k;

    rep.max_tangency = max_nodal_dot(state.llg.m_curr, eta);
    rep.v_norm = l2_norm(ws.llg.mass, eta);
    const NodalField m_new = project_update(state.llg.m_curr, eta, k);
    rep.max_unit_violation = max_unit_violation(m_new);

    {
      const NodalField* vi = strategy == FieldStrategy::FI ? &eta : nullptr;
      const LlgRhs rhs = build_llg_rhs(ws.llg, sc, strategy, ops, state.llg.m_curr,
                                       state.llg.m_prev, t_i, vi);
      std::vector<double> v_flat;
      flatten(eta, v_flat);
      rep.ledger_rhs = dot(rhs.lower, v_flat);
      rep.ledger_lhs = detail::ledger_lhs(ws.llg, sc, state.llg.m_curr, m_new, eta,
                                          sys.weighted_mass);
      rep.ledger_ok = rep.ledger_lhs <= rep.ledger_rhs + 1e-9;

      // Theta-combined h equals nu up to the static part; ledger terms as in
      // the decoupled branch
      EdgeField h_comb = theta_field(cfg.coupling, i, state.h_curr, state.h_prev, &nu);
      EdgeField diff_h(nu.size());
      for (std::size_t e = 0; e < nu.size(); ++e) diff_h[e] = h_comb[e] - nu[e];
      const std::vector<double> dtm_flat = detail::flat_diff_scaled(m_new, state.llg.m_curr, 1.0 / k);
      std::vector<double> vmdt(v_flat.size());
      for (std::size_t j = 0; j < v_flat.size(); ++j) vmdt[j] = v_flat[j] - dtm_flat[j];
      rep.ledger62i_rhs = rep.ledger_rhs + (sf ? 0.0 : pairing_inner(ws, vmdt, nu)) +
                          pairing_inner(ws, v_flat, diff_h);
    }

    state.llg.m_prev = state.llg.m_curr;
    state.llg.m_curr = m_new;
    state.llg.v_last = std::move(eta);
    state.llg.index += 1;
    h_mid = nu;
  }

  // recovery h^{i+1} := 2 nu - h^i and eddy-side ledgers
  EdgeField h_next(h_mid.size());
  for (std::size_t e = 0; e < h_mid.size(); ++e) h_next[e] = 2.0 * h_mid[e] - state.h_curr[e];

  rep.ledger62i_lhs = rep.ledger_lhs +
                      (detail::edge_quadratic(ws.edge_mass, h_next) -
                       detail::edge_quadratic(ws.edge_mass, state.h_curr)) / (2.0 * k) +
                      (1.0 / cfg.mu0) * detail::edge_quadratic(ws.curlcurl, h_mid);
  rep.ledger62i_ok = rep.ledger62i_lhs <= rep.ledger62i_rhs + 1e-9;

  const EddyLedger led2 = energy_dissipation_check_h(ws, state.h_curr, h_next, state.llg.m_prev,
                                                     state.llg.m_curr, k, cfg.mu0);
  rep.ledger62ii_lhs = led2.lhs;
  rep.ledger62ii_rhs = led2.rhs;
  rep.ledger62ii_ok = led2.ok;

  rep.e_field = 0.5 * detail::edge_quadratic(ws.edge_mass, h_next);

  state.h_mid_last = std::move(h_mid);
  state.h_prev = std::move(state.h_curr);
  state.h_curr = std::move(h_next);
  return rep;
}

/// Runs N = T/k coupled steps; samples (m, h) every sample_every steps.
inline Trajectory run_ellg(const NodalField& m0, const EdgeField& h0, const EllgConfig& cfg,
                           const LlgOperators& ops, const EllgWorkspace& ws, int sample_every = 1,
                           const std::function<void(const StepReport&)>& on_step = nullptr) {
  cfg.validate();
  const SchemeConfig& scheme = cfg.scheme;
  const int N = static_cast<int>(std::llround(scheme.T / scheme.k));
  if (N < 1 || std::abs(N * scheme.k - scheme.T) > 1e-9 * scheme.T)
    throw std::invalid_argument("run_ellg: T must be an integer multiple of k");

  const SparseMatrix eddy_system = build_eddy_system(ws, cfg);
  EllgState state = EllgState::initial(m0, h0);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.m.push_back(state.llg.m_curr);
  traj.h.push_back(state.h_curr);
  for (int i = 0; i < N; ++i) {
    StepReport rep = coupled_step(state, cfg, ops, ws, eddy_system);
    if (on_step) {
      rep.e_exchange =
          0.5 * scheme.lex2 * std::pow(h1_seminorm(ws.llg.stiffness, state.llg.m_curr), 2);
      const NodalField pim = eval_pi(ops.pi, state.llg.m_curr);
      rep.e_lower = -0.5 * mass_inner(ws.llg.mass, pim, state.llg.m_curr);
      rep.e_zeeman =
          -dot(eval_applied(ops.f, rep.t_end), integral_field(ws.llg.mass, state.llg.m_curr));
      rep.e_total = rep.e_exchange + rep.e_lower + rep.e_zeeman + rep.e_field;
      const Vec3 avg = integral_field(ws.llg.mass, state.llg.m_curr) / ws.llg.volume;
      rep.avg_mx = avg.x;
      rep.avg_my = avg.y;
      on_step(rep);
    }
    if ((i + 1) % sample_every == 0 || i + 1 == N) {
      traj.times.push_back(rep.t_end);
      traj.m.push_back(state.llg.m_curr);
      traj.h.push_back(state.h_curr);
    }
  }
  return traj;
}

}  // namespace tpsmag
