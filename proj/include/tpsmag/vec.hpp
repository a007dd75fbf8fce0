#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace tpsmag {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double norm2(const Vec3& a) { return dot(a, a); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

/// One 3-vector per vertex of the governing mesh (P1 vector field).
using NodalField = std::vector<Vec3>;

/// One coefficient per edge dof (lowest-order H(curl) field).
using EdgeField = std::vector<double>;

inline NodalField operator*(double s, NodalField f) {
  for (auto& v : f) v *= s;
  return f;
}

inline NodalField operator+(NodalField a, const NodalField& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline NodalField operator-(NodalField a, const NodalField& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

/// max over nodes of ||m| - 1|.
inline double max_unit_violation(const NodalField& m) {
  double worst = 0.0;
  for (const auto& v : m) worst = std::max(worst, std::abs(norm(v) - 1.0));
  return worst;
}

/// max over nodes of |a(z) . b(z)|.
inline double max_nodal_dot(const NodalField& a, const NodalField& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(dot(a[i], b[i])));
  return worst;
}

inline void flatten(const NodalField& f, std::vector<double>& out) {
  out.resize(3 * f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[3 * i + 0] = f[i].x;
    out[3 * i + 1] = f[i].y;
    out[3 * i + 2] = f[i].z;
  }
}

inline NodalField unflatten(const std::vector<double>& x) {
  NodalField f(x.size() / 3);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = {x[3 * i], x[3 * i + 1], x[3 * i + 2]};
  return f;
}

}  // namespace tpsmag
