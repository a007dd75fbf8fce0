#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpsmag/eddy.hpp"
#include "tpsmag/fem.hpp"
#include "tpsmag/fields.hpp"
#include "tpsmag/tps.hpp"
#include "tpsmag/vec.hpp"

namespace tpsmag {

// ---------------------------------------------------------------------------
// Energies.

struct EnergyBreakdown {
  double exchange = 0.0;  // (lex2/2) ||grad m||^2
  double lower = 0.0;     // -(1/2) <pi(m), m>
  double zeeman = 0.0;    // -<f, m>
  double field = 0.0;     // (1/2) ||h||^2_Omega
  double total = 0.0;
};

inline EnergyBreakdown energy(const LlgWorkspace& ws, double lex2, const NodalField& m,
                              const LowerOrderOp& pi_op, const Vec3& f,
                              const EllgWorkspace* ellg = nullptr, const EdgeField* h = nullptr) {
  EnergyBreakdown e;
  const double ex = h1_seminorm(ws.stiffness, m);
  e.exchange = 0.5 * lex2 * ex * ex;
  e.lower = -0.5 * mass_inner(ws.mass, eval_pi(pi_op, m), m);
  e.zeeman = -dot(f, integral_field(ws.mass, m));
  if (ellg && h) {
    const double hn = edge_l2_norm(ellg->edge_mass, *h);
    e.field = 0.5 * hn * hn;
  }
  e.total = e.exchange + e.lower + e.zeeman + e.field;
  return e;
}

// ---------------------------------------------------------------------------
// Reference errors and experimental orders of convergence.

enum class ErrorNorm { L2Omega, H1Omega, HcurlOmegaBig };

/// max over shared sample times of the requested discrete norm of the
/// difference. Both trajectories must be sampled on the same mesh; the
/// comparison runs over the coarser trajectory's time grid.
inline double reference_error(const Trajectory& ref, const Trajectory& traj, ErrorNorm norm_kind,
                              const LlgWorkspace& ws, const EllgWorkspace* ellg = nullptr) {
  if (traj.times.empty() || ref.times.empty())
    throw std::invalid_argument("reference_error: empty trajectory");
  double worst = 0.0;
  std::size_t jr = 0;
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    const double t = traj.times[j];
    while (jr < ref.times.size() && ref.times[jr] < t - 1e-9) ++jr;
    if (jr >= ref.times.size() || std::abs(ref.times[jr] - t) > 1e-9)
      throw std::invalid_argument("reference_error: time grids do not nest");
    double err = 0.0;
    switch (norm_kind) {
      case ErrorNorm::L2Omega: {
        if (ref.m[jr].size() != traj.m[j].size())
          throw std::invalid_argument("reference_error: mesh mismatch");
        err = l2_norm(ws.mass, ref.m[jr] - traj.m[j]);
        break;
      }
      case ErrorNorm::H1Omega: {
        if (ref.m[jr].size() != traj.m[j].size())
          throw std::invalid_argument("reference_error: mesh mismatch");
        const NodalField d = ref.m[jr] - traj.m[j];
        const double l2 = l2_norm(ws.mass, d), h1 = h1_seminorm(ws.stiffness, d);
        err = std::sqrt(l2 * l2 + h1 * h1);
        break;
      }
      case ErrorNorm::HcurlOmegaBig: {
        if (!ellg) throw std::invalid_argument("reference_error: H(curl) norm needs workspace");
        if (ref.h[jr].size() != traj.h[j].size())
          throw std::invalid_argument("reference_error: mesh mismatch");
        EdgeField d(traj.h[j].size());
        for (std::size_t e = 0; e < d.size(); ++e) d[e] = ref.h[jr][e] - traj.h[j][e];
        std::vector<double> tmp;
        ellg->edge_mass.apply(d, tmp);
        const double l2 = dot(d, tmp);
        ellg->curlcurl_unit.apply(d, tmp);
        err = std::sqrt(l2 + dot(d, tmp));
        break;
      }
    }
    worst = std::max(worst, err);
  }
  return worst;
}

struct EocTable {
  std::vector<double> ks;      // strictly decreasing
  std::vector<double> errors;  // positive

  void push(double k, double e) {
    if (!ks.empty() && !(k < ks.back())) throw std::invalid_argument("eoc: k must decrease");
    if (!(e > 0.0)) throw std::invalid_argument("eoc: errors must be positive");
    ks.push_back(k);
    errors.push_back(e);
  }

  /// Fitted orders between consecutive rows: log(e_j/e_{j+1}) / log(k_j/k_{j+1}).
  std::vector<double> orders() const {
    std::vector<double> o;
    for (std::size_t j = 0; j + 1 < ks.size(); ++j)
      o.push_back(std::log(errors[j] / errors[j + 1]) / std::log(ks[j] / ks[j + 1]));
    return o;
  }

  /// Least-squares slope of log(error) against log(k).
  double fitted_order() const {
    const std::size_t n = ks.size();
    if (n < 2) throw std::invalid_argument("eoc: need at least two rows");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = std::log(ks[j]), y = std::log(errors[j]);
      sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
};

// ---------------------------------------------------------------------------
// Constraint diagnostics and spatial averages.

struct ConstraintReport {
  double max_unit_violation = 0.0;  // max nodal ||m| - 1|
  double max_tangency = 0.0;        // max nodal |m . v|
};

inline ConstraintReport constraint_report(const NodalField& m, const NodalField& v) {
  return {max_unit_violation(m), max_nodal_dot(m, v)};
}

inline double spatial_average(const LlgWorkspace& ws, const NodalField& m, int component) {
  return integral_field(ws.mass, m)[component] / ws.volume;
}

// ---------------------------------------------------------------------------
// CSV streaming of step reports (RFC-4180-style, header row).

inline std::string report_csv_header() {
  return "t,e_exchange,e_lower,e_zeeman,e_field,e_total,max_unit_violation,max_tangency,"
         "avg_mx,avg_my,lambda_min,lambda_max,v_norm,krylov_solves,fixpoint_iterations,"
         "ledger_ok,ledger62i_ok,ledger62ii_ok";
}

inline std::string report_csv_row(const StepReport& r) {
  char buf[640];
  std::snprintf(buf, sizeof buf,
                "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.3e,%.3e,%.12g,%.12g,%.12g,%.12g,%.12g,"
                "%d,%d,%d,%d,%d",
                r.t_end, r.e_exchange, r.e_lower, r.e_zeeman, r.e_field, r.e_total,
                r.max_unit_violation, r.max_tangency, r.avg_mx, r.avg_my, r.lambda_min,
                r.lambda_max, r.v_norm, r.krylov_solves, r.fixpoint_iterations,
                r.ledger_ok ? 1 : 0, r.ledger62i_ok ? 1 : 0, r.ledger62ii_ok ? 1 : 0);
  return buf;
}

}  // namespace tpsmag
