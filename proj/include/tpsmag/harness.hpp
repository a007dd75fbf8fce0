#pragma once

#include <mutex>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tpsmag/config.hpp"
#include "tpsmag/diagnostics.hpp"
#include "tpsmag/eddy.hpp"
#include "tpsmag/tps.hpp"
#include "tpsmag/vtk.hpp"

namespace tpsmag {

// ---------------------------------------------------------------------------
// Convergence studies: reference solve at k_ref, then k = 2^l k_ref for
// l = 1..levels, fitted orders from the reference errors.

struct ConvergenceCell {
  std::string label;
  EocTable m_errors;          // max_j of the m-norm over the run's time grid
  EocTable h_errors;          // ELLG only
  long ledger_violations = 0; // LLG energy ledger
  long ledger62ii_violations = 0;
  bool solve_counts_ok = true;  // decoupled steps issue the expected solve count
};

struct ConvergenceStudy {
  std::string preset;
  std::vector<std::string> notes;  // echoed into output headers
  std::vector<ConvergenceCell> cells;
};

struct LlgRatesParams {
  int n = 4;
  double T = 1.0;
  int n_ref = 2560;  // k_ref = T / n_ref
  int levels = 5;
  double alpha = 1.0;
  double lex2 = 1.0;
  Vec3 f{-2.0, -0.5, 0.0};
  double anis_coeff = 1.0;
  Vec3 anis_axis{1.0, 1.0, 1.0};
  double solver_tol = 1e-12;
};

namespace detail {

inline NodalField smooth_m0(const TetMesh& mesh) {
  constexpr double pi = 3.14159265358979323846;
  return nodal_interpolate(
      [&](const Vec3& p) {
        return normalized(Vec3{1.0, 0.5 * std::sin(pi * p.x), 0.5 * std::cos(pi * p.y)});
      },
      mesh);
}

inline void run_parallel(std::vector<std::function<void()>>& jobs, int threads) {
  if (threads <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::vector<std::thread> pool;
  std::size_t next = 0;
  std::mutex mu;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t mine;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= jobs.size()) return;
          mine = next++;
        }
        jobs[mine]();
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Temporal convergence of the LLG integrator for the five strategy/variant
/// combinations, reference errors in H1(omega) against a fully implicit
/// reference solve at k_ref.
inline ConvergenceStudy converge_llg_rates(const LlgRatesParams& p, int threads = 1,
                                           std::ostream* log = nullptr) {
  const TetMesh mesh = build_cube_mesh({0, 0, 0}, {1, 1, 1}, p.n);
  const LlgWorkspace ws = make_llg_workspace(mesh);
  const NodalField m0 = detail::smooth_m0(mesh);

  SchemeConfig base;
  base.alpha = p.alpha;
  base.lex2 = p.lex2;
  base.T = p.T;
  base.solver.tol = p.solver_tol;

  LlgOperators ops;
  ops.pi = LowerOrderOp::uniaxial(p.anis_coeff, p.anis_axis);
  ops.f = AppliedField::constant(p.f);

  const double k_ref = p.T / p.n_ref;
  SchemeConfig ref_cfg = base;
  ref_cfg.k = k_ref;
  ref_cfg.variant = Variant::TPS2;
  ref_cfg.strategy = FieldStrategy::FI;
  if (log) *log << "reference: TPS2 fully implicit, k_ref = " << k_ref << "\n";
  const Trajectory ref = run_llg(m0, ref_cfg, ops, ws, 2);

  struct CellSpec {
    const char* label;
    Variant variant;
    FieldStrategy strategy;
  };
  const CellSpec specs[] = {{"TPS2", Variant::TPS2, FieldStrategy::FI},
                            {"TPS2+AB", Variant::TPS2, FieldStrategy::AB},
                            {"TPS2+EE", Variant::TPS2, FieldStrategy::EE},
                            {"TPS1+AB", Variant::TPS1, FieldStrategy::AB},
                            {"TPS1+EE", Variant::TPS1, FieldStrategy::EE}};

  ConvergenceStudy study;
  study.preset = "llg-rates";
  study.notes = {"omega=(0,1)^3 Kuhn n=" + std::to_string(p.n),
                 "uniaxial anisotropy in place of the stray field",
                 "k_ref=" + std::to_string(k_ref)};
  study.cells.resize(std::size(specs));

  std::vector<std::function<void()>> jobs;
  for (std::size_t s = 0; s < std::size(specs); ++s) {
    jobs.emplace_back([&, s] {
      ConvergenceCell cell;
      cell.label = specs[s].label;
      for (int l = p.levels; l >= 1; --l) {
        SchemeConfig cfg = base;
        cfg.k = k_ref * std::pow(2.0, l);
        cfg.variant = specs[s].variant;
        cfg.strategy = specs[s].strategy;
        long violations = 0;
        const Trajectory traj = run_llg(m0, cfg, ops, ws, 1, [&](const StepReport& r) {
          if (!r.ledger_ok) violations += 1;
        });
        cell.ledger_violations += violations;
        cell.m_errors.push(cfg.k, reference_error(ref, traj, ErrorNorm::H1Omega, ws));
      }
      study.cells[s] = std::move(cell);
      if (log) *log << "  cell " << specs[s].label << " done\n";
    });
  }
  detail::run_parallel(jobs, threads);
  return study;
}

/// Effect of the stabilization rho(k) = k^delta on the TPS2+AB order,
/// reference errors in L2(omega).
inline ConvergenceStudy converge_rho_study(const LlgRatesParams& p, std::vector<double> deltas,
                                           int threads = 1, std::ostream* log = nullptr) {
  const TetMesh mesh = build_cube_mesh({0, 0, 0}, {1, 1, 1}, p.n);
  const LlgWorkspace ws = make_llg_workspace(mesh);
  const NodalField m0 = detail::smooth_m0(mesh);

  SchemeConfig base;
  base.alpha = p.alpha;
  base.lex2 = p.lex2;
  base.T = p.T;
  base.solver.tol = p.solver_tol;

  LlgOperators ops;
  ops.pi = LowerOrderOp::uniaxial(p.anis_coeff, p.anis_axis);
  ops.f = AppliedField::constant(p.f);

  const double k_ref = p.T / p.n_ref;
  SchemeConfig ref_cfg = base;
  ref_cfg.k = k_ref;
  ref_cfg.variant = Variant::TPS2;
  ref_cfg.strategy = FieldStrategy::FI;
  if (log) *log << "reference: TPS2 fully implicit, k_ref = " << k_ref << "\n";
  const Trajectory ref = run_llg(m0, ref_cfg, ops, ws, 2);

  ConvergenceStudy study;
  study.preset = "rho-study";
  study.notes = {"TPS2+AB with rho(k)=k^delta, M(k)=|k log k|^-1",
                 "k_ref=" + std::to_string(k_ref)};
  study.cells.resize(deltas.size());

  std::vector<std::function<void()>> jobs;
  for (std::size_t s = 0; s < deltas.size(); ++s) {
    jobs.emplace_back([&, s] {
      ConvergenceCell cell;
      std::ostringstream label;
      label << "rho=k^" << deltas[s];
      cell.label = label.str();
      for (int l = p.levels; l >= 1; --l) {
        SchemeConfig cfg = base;
        cfg.k = k_ref * std::pow(2.0, l);
        cfg.variant = Variant::TPS2;
        cfg.strategy = FieldStrategy::AB;
        cfg.rho = RhoChoice::power(deltas[s]);
        const Trajectory traj = run_llg(m0, cfg, ops, ws, 1);
        cell.m_errors.push(cfg.k, reference_error(ref, traj, ErrorNorm::L2Omega, ws));
      }
      study.cells[s] = std::move(cell);
      if (log) *log << "  cell " << cell.label << " done\n";
    });
  }
  detail::run_parallel(jobs, threads);
  return study;
}

struct EllgRatesParams {
  int n = 8;  // subdivisions of Omega = (0,1)^3; omega = (0.375,0.625)^3
  double T = 1.75;
  int n_ref = 2560;
  int levels = 5;
  double alpha = 1.0;
  double lex2 = 1.0;
  double mu0 = 1.0;
  double sigma_inner = 100.0;
  double sigma_outer = 1.0;
  double solver_tol = 1e-12;
};

/// Temporal convergence of the coupled integrator for FC, DC-2, DC-1, SF;
/// reference errors in max H1(omega) for m and max H(curl)(Omega) for h
/// against a DC-2 reference at k_ref.
inline ConvergenceStudy converge_ellg_rates(const EllgRatesParams& p, int threads = 1,
                                            std::ostream* log = nullptr) {
  const TetMesh omega_big = build_cube_mesh({0, 0, 0}, {1, 1, 1}, p.n);
  EllgConfig base;
  base.scheme.alpha = p.alpha;
  base.scheme.lex2 = p.lex2;
  base.scheme.T = p.T;
  base.scheme.strategy = FieldStrategy::AB;
  base.scheme.solver.tol = p.solver_tol;
  base.mu0 = p.mu0;
  base.sigma_inner = p.sigma_inner;
  base.sigma_outer = p.sigma_outer;

  const Vec3 inner_lo{0.375, 0.375, 0.375}, inner_hi{0.625, 0.625, 0.625};
  const EllgWorkspace ws = make_ellg_workspace(omega_big, inner_lo, inner_hi, base);

  LlgOperators ops;  // pi = Pi = 0, fully reproducible setting
  ops.f = AppliedField::ramp(p.T / 7.0);

  const NodalField m0(ws.omega->n_vertices(), normalized(Vec3{-1, -1, -1}));
  const Vec3 mval = m0.front();
  const EdgeField h0 = edge_interpolate(
      [&](const Vec3& pt) -> Vec3 {
        const double tol = 1e-12;
        const bool in = pt.x >= inner_lo.x - tol && pt.x <= inner_hi.x + tol &&
                        pt.y >= inner_lo.y - tol && pt.y <= inner_hi.y + tol &&
                        pt.z >= inner_lo.z - tol && pt.z <= inner_hi.z + tol;
        return in ? -mval : Vec3{0, 0, 0};
      },
      omega_big);

  const double k_ref = p.T / p.n_ref;
  EllgConfig ref_cfg = base;
  ref_cfg.scheme.k = k_ref;
  ref_cfg.coupling = Coupling::DC2;
  if (log) *log << "reference: DC-2, k_ref = " << k_ref << "\n";
  const Trajectory ref = run_ellg(m0, h0, ref_cfg, ops, ws, 2);

  struct CellSpec {
    const char* label;
    Coupling coupling;
  };
  const CellSpec specs[] = {{"FC", Coupling::FC},
                            {"DC-2", Coupling::DC2},
                            {"DC-1", Coupling::DC1},
                            {"SF", Coupling::SF}};

  ConvergenceStudy study;
  study.preset = "ellg-rates";
  study.notes = {"Omega=(0,1)^3 Kuhn n=" + std::to_string(p.n) +
                     ", omega=(0.375,0.625)^3 (centered, side 0.25)",
                 "ramp applied field compressed to T=" + std::to_string(p.T),
                 "pi = Pi = 0", "k_ref=" + std::to_string(k_ref)};
  study.cells.resize(std::size(specs));

  std::vector<std::function<void()>> jobs;
  for (std::size_t s = 0; s < std::size(specs); ++s) {
    jobs.emplace_back([&, s] {
      ConvergenceCell cell;
      cell.label = specs[s].label;
      for (int l = p.levels; l >= 1; --l) {
        EllgConfig cfg = base;
        cfg.scheme.k = k_ref * std::pow(2.0, l);
        cfg.coupling = specs[s].coupling;
        long v51 = 0, v62 = 0;
        bool counts_ok = true;
        const bool decoupled = specs[s].coupling == Coupling::DC2 ||
                               specs[s].coupling == Coupling::DC1 ||
                               specs[s].coupling == Coupling::SF;
        const Trajectory traj = run_ellg(m0, h0, cfg, ops, ws, 1, [&](const StepReport& r) {
          if (!r.ledger_ok) v51 += 1;
          if (!r.ledger62ii_ok) v62 += 1;
          if (decoupled && r.index >= 1 && r.krylov_solves != 2) counts_ok = false;
        });
        cell.ledger_violations += v51;
        cell.ledger62ii_violations += v62;
        cell.solve_counts_ok = cell.solve_counts_ok && counts_ok;
        cell.m_errors.push(cfg.scheme.k, reference_error(ref, traj, ErrorNorm::H1Omega, ws.llg));
        cell.h_errors.push(cfg.scheme.k,
                           reference_error(ref, traj, ErrorNorm::HcurlOmegaBig, ws.llg, &ws));
      }
      study.cells[s] = std::move(cell);
      if (log) *log << "  cell " << specs[s].label << " done\n";
    });
  }
  detail::run_parallel(jobs, threads);
  return study;
}

// ---------------------------------------------------------------------------
// Printing and CSV output.

inline void print_study(const ConvergenceStudy& study, std::ostream& out) {
  out << "preset: " << study.preset << "\n";
  for (const auto& note : study.notes) out << "# " << note << "\n";
  for (const auto& cell : study.cells) {
    out << "\n[" << cell.label << "]\n";
    const bool with_h = !cell.h_errors.ks.empty();
    out << "        k            err_m";
    if (with_h) out << "            err_h";
    out << "\n";
    const auto om = cell.m_errors.orders();
    const auto oh = cell.h_errors.orders();
    for (std::size_t j = 0; j < cell.m_errors.ks.size(); ++j) {
      char buf[160];
      if (with_h)
        std::snprintf(buf, sizeof buf, "%13.6e %16.9e %16.9e\n", cell.m_errors.ks[j],
                      cell.m_errors.errors[j], cell.h_errors.errors[j]);
      else
        std::snprintf(buf, sizeof buf, "%13.6e %16.9e\n", cell.m_errors.ks[j],
                      cell.m_errors.errors[j]);
      out << buf;
      if (j < om.size()) {
        char ob[160];
        if (with_h)
          std::snprintf(ob, sizeof ob, "%13s %16.3f %16.3f\n", "order", om[j], oh[j]);
        else
          std::snprintf(ob, sizeof ob, "%13s %16.3f\n", "order", om[j]);
        out << ob;
      }
    }
    char fit[160];
    if (with_h)
      std::snprintf(fit, sizeof fit, "fitted order: m %.3f, h %.3f\n", cell.m_errors.fitted_order(),
                    cell.h_errors.fitted_order());
    else
      std::snprintf(fit, sizeof fit, "fitted order: m %.3f\n", cell.m_errors.fitted_order());
    out << fit;
  }
}

inline void write_study_csv(const ConvergenceStudy& study, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  for (const auto& note : study.notes) f << "# " << note << "\n";
  f << "preset,cell,k,err_m,err_h,fitted_order_m,fitted_order_h\n";
  for (const auto& cell : study.cells) {
    const bool with_h = !cell.h_errors.ks.empty();
    for (std::size_t j = 0; j < cell.m_errors.ks.size(); ++j) {
      f << study.preset << "," << cell.label << "," << cell.m_errors.ks[j] << ","
        << cell.m_errors.errors[j] << ",";
      if (with_h) f << cell.h_errors.errors[j];
      f << "," << cell.m_errors.fitted_order() << ",";
      if (with_h) f << cell.h_errors.fitted_order();
      f << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Single run driven by a RunConfig: trajectory CSV plus optional VTK snapshots.

inline int run_from_config(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  const TetMesh mesh = build_cube_mesh(cfg.mesh_lo, cfg.mesh_hi, cfg.mesh_n);
  LlgOperators ops{cfg.pi, cfg.Pi, cfg.f};

  std::ofstream csv(fs::path(cfg.out_dir) / "trajectory.csv");
  csv << "# tpsmag run: n=" << cfg.mesh_n << " k=" << cfg.scheme.k << " T=" << cfg.scheme.T
      << (cfg.ellg ? " ellg" : " llg") << "\n";
  csv << report_csv_header() << "\n";

  int snapshot = 0;
  if (cfg.ellg) {
    const EllgConfig ecfg = cfg.ellg_config();
    const EllgWorkspace ws = make_ellg_workspace(mesh, cfg.inner_lo, cfg.inner_hi, ecfg);
    const NodalField m0 = initial_magnetization(cfg, *ws.omega);
    const EdgeField h0 = initial_h(cfg, mesh, m0);
    EllgState state = EllgState::initial(m0, h0);
    const SparseMatrix eddy_system = build_eddy_system(ws, ecfg);
    const int N = static_cast<int>(std::llround(ecfg.scheme.T / ecfg.scheme.k));
    for (int i = 0; i < N; ++i) {
      StepReport rep = coupled_step(state, ecfg, ops, ws, eddy_system);
      rep.e_exchange = 0.5 * ecfg.scheme.lex2 *
                       std::pow(h1_seminorm(ws.llg.stiffness, state.llg.m_curr), 2);
      rep.e_lower = -0.5 * mass_inner(ws.llg.mass, eval_pi(ops.pi, state.llg.m_curr),
                                      state.llg.m_curr);
      rep.e_zeeman = -dot(eval_applied(ops.f, rep.t_end),
                          integral_field(ws.llg.mass, state.llg.m_curr));
      rep.e_total = rep.e_exchange + rep.e_lower + rep.e_zeeman + rep.e_field;
      const Vec3 avg = integral_field(ws.llg.mass, state.llg.m_curr) / ws.llg.volume;
      rep.avg_mx = avg.x;
      rep.avg_my = avg.y;
      csv << report_csv_row(rep) << "\n";
      if ((i + 1) % cfg.sample_every == 0 || i + 1 == N) {
        if (cfg.write_vtk) {
          std::ostringstream name;
          name << "fields_" << snapshot++ << ".vtk";
          NodalField m_big(mesh.n_vertices(), Vec3{});
          for (int v = 0; v < ws.map.n_local; ++v)
            m_big[ws.map.inner_vertices[v]] = state.llg.m_curr[v];
          export_vtk(mesh, {{"m", &m_big}}, (fs::path(cfg.out_dir) / name.str()).string(),
                     {{"h", &state.h_curr}});
        }
      }
    }
    log << "ellg run finished: " << N << " steps\n";
  } else {
    const LlgWorkspace ws = make_llg_workspace(mesh);
    const NodalField m0 = initial_magnetization(cfg, mesh);
    LlgState state = LlgState::initial(m0);
    const int N = static_cast<int>(std::llround(cfg.scheme.T / cfg.scheme.k));
    for (int i = 0; i < N; ++i) {
      StepReport rep = llg_step(state, cfg.scheme, ops, ws);
      rep.e_exchange =
          0.5 * cfg.scheme.lex2 * std::pow(h1_seminorm(ws.stiffness, state.m_curr), 2);
      rep.e_lower = -0.5 * mass_inner(ws.mass, eval_pi(ops.pi, state.m_curr), state.m_curr);
      rep.e_zeeman = -dot(eval_applied(ops.f, rep.t_end), integral_field(ws.mass, state.m_curr));
      rep.e_total = rep.e_exchange + rep.e_lower + rep.e_zeeman;
      const Vec3 avg = integral_field(ws.mass, state.m_curr) / ws.volume;
      rep.avg_mx = avg.x;
      rep.avg_my = avg.y;
      csv << report_csv_row(rep) << "\n";
      if (((i + 1) % cfg.sample_every == 0 || i + 1 == N) && cfg.write_vtk) {
        std::ostringstream name;
        name << "fields_" << snapshot++ << ".vtk";
        export_vtk(mesh, {{"m", &state.m_curr}}, (fs::path(cfg.out_dir) / name.str()).string());
      }
    }
    log << "llg run finished: " << N << " steps\n";
  }
  return 0;
}

}  // namespace tpsmag
