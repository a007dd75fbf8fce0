#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace tpsmag {

/// Tetrahedron quadrature rule in barycentric coordinates.
/// Weights sum to 1; an integral over K is |K| * sum_q w_q f(x_q).
struct QuadRule {
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

/// 4-point rule, exact for polynomials of degree 2.
inline const QuadRule& quad_degree2() {
  static const QuadRule rule = [] {
    QuadRule r;
    const double a = 0.5854101966249685;  // (5 + 3 sqrt(5)) / 20
    const double b = 0.1381966011250105;  // (5 - sqrt(5)) / 20
    for (int i = 0; i < 4; ++i) {
      std::array<double, 4> p{b, b, b, b};
      p[i] = a;
      r.points.push_back(p);
      r.weights.push_back(0.25);
    }
    return r;
  }();
  return rule;
}

/// 11-point Keast rule, exact for polynomials of degree 4 (one negative weight).
inline const QuadRule& quad_degree4() {
  static const QuadRule rule = [] {
    QuadRule r;
    // centroid
    r.points.push_back({0.25, 0.25, 0.25, 0.25});
    r.weights.push_back(6.0 * (-74.0 / 5625.0));
    // (a,b,b,b) with a = 11/14
    const double a = 11.0 / 14.0, b = 1.0 / 14.0;
    for (int i = 0; i < 4; ++i) {
      std::array<double, 4> p{b, b, b, b};
      p[i] = a;
      r.points.push_back(p);
      r.weights.push_back(6.0 * (343.0 / 45000.0));
    }
    // (c,c,d,d) permutations with c,d = (1 +- sqrt(5/14))/4
    const double s = 0.3994035761667992;  // (1 + sqrt(5/14)) / 4
    const double t = 0.1005964238332008;  // (1 - sqrt(5/14)) / 4
    const int idx[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& ij : idx) {
      std::array<double, 4> p{t, t, t, t};
      p[ij[0]] = s;
      p[ij[1]] = s;
      r.points.push_back(p);
      r.weights.push_back(6.0 * (56.0 / 2250.0));
    }
    return r;
  }();
  return rule;
}

}  // namespace tpsmag
