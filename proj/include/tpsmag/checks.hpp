#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tpsmag/eddy.hpp"
#include "tpsmag/tps.hpp"

namespace tpsmag {

// Randomized verification of the two weight-function bounds:
//   (i)  |W_M(s) - alpha| <= M k / 2 for all s,
//   (ii) |alpha + (k/2) s - W_M(s)| <= B^2 k^2 / (2 alpha) for B <= M,
//        k < alpha / B, |s| <= B.
// The comparisons allow a 4-ulp rounding margin on the magnitudes involved;
// the bounds themselves are exact in real arithmetic.

struct WeightBoundReport {
  long samples = 0;
  long violations_i = 0;
  long violations_ii = 0;
  double worst_excess_i = 0.0;
  double worst_excess_ii = 0.0;
};

inline WeightBoundReport weight_bound_suite(long n_samples, unsigned seed = 12345) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(std::log(lo) + uni(rng) * (std::log(hi) - std::log(lo)));
  };
  constexpr double eps = 2.220446049250313e-16;

  WeightBoundReport rep;
  rep.samples = n_samples;
  for (long i = 0; i < n_samples; ++i) {
    // bound (i): free s, any M, any k with a guard keeping W positive-scale
    {
      const double alpha = 0.05 + 0.95 * uni(rng);
      const double M = log_uniform(1e-3, 1e3);
      const double k = log_uniform(1e-6, 0.5);
      const double s = (uni(rng) < 0.5 ? -1.0 : 1.0) * log_uniform(1e-8, 1e6);
      const double W = weight(s, k, M, alpha);
      const double lhs = std::abs(W - alpha);
      const double bound = 0.5 * M * k;
      const double excess = lhs - bound - 4.0 * eps * (alpha + bound);
      if (excess > 0.0) {
        rep.violations_i += 1;
        rep.worst_excess_i = std::max(rep.worst_excess_i, excess);
      }
    }
    // bound (ii): B <= M, k < alpha / B, |s| <= B
    {
      const double alpha = 0.05 + 0.95 * uni(rng);
      const double B = log_uniform(1e-3, 1e3);
      const double M = B * (1.0 + 9.0 * uni(rng));
      const double k = (alpha / B) * (0.999 * uni(rng));
      if (!(k > 0.0)) continue;
      const double s = (2.0 * uni(rng) - 1.0) * B;
      const double W = weight(s, k, M, alpha);
      const double lhs = std::abs(alpha + 0.5 * k * s - W);
      const double bound = B * B * k * k / (2.0 * alpha);
      const double excess = lhs - bound - 4.0 * eps * (alpha + 0.5 * k * B + bound);
      if (excess > 0.0) {
        rep.violations_ii += 1;
        rep.worst_excess_ii = std::max(rep.worst_excess_ii, excess);
      }
    }
  }
  return rep;
}

/// Theta rows of every schedule sum to 1 for every step index.
inline bool theta_rows_sum_to_one(int max_index = 16) {
  for (Coupling c : {Coupling::FC, Coupling::DC2, Coupling::DC1, Coupling::SF})
    for (int i = 0; i <= max_index; ++i) {
      const auto th = theta_row(c, i);
      if (th[0] + th[1] + th[2] != 1.0) return false;
    }
  return true;
}

/// Negative control for the eddy energy ledger: a corrupted h_next must be
/// flagged. Returns true when the check catches the corruption.
inline bool ledger_negative_control() {
  const TetMesh omega_big = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  EllgConfig cfg;
  cfg.scheme.k = 1e-3;
  cfg.scheme.T = 1e-3;
  const EllgWorkspace ws =
      make_ellg_workspace(omega_big, {0, 0, 0}, {0.5, 0.5, 0.5}, cfg);
  const NodalField m(ws.omega->n_vertices(), Vec3{1, 0, 0});
  EdgeField h_before(omega_big.n_edges(), 0.0);
  EdgeField h_after = edge_interpolate([](const Vec3&) { return Vec3{0, 0, 3.0}; }, omega_big);
  // static m with a large jump in h: mu0 ||d_t h||^2 alone breaks the bound
  const EddyLedger led =
      energy_dissipation_check_h(ws, h_before, h_after, m, m, cfg.scheme.k, cfg.mu0);
  return !led.ok;
}

}  // namespace tpsmag
