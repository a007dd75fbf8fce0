#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tpsmag/fem.hpp"
#include "tpsmag/mesh.hpp"
#include "tpsmag/quadrature.hpp"

using namespace tpsmag;

namespace {

TetMesh reference_tet() {
  TetMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.tets = {{0, 1, 2, 3}};
  finalize_connectivity(m);
  return m;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// int over the reference tet of x^a y^b z^c = a! b! c! / (a+b+c+3)!
double monomial_integral(int a, int b, int c) {
  return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
}

double rule_integral(const TetMesh& m, const QuadRule& rule, int a, int b, int c) {
  double s = 0.0;
  for (int q = 0; q < rule.size(); ++q) {
    const Vec3 p = m.point(rule.points[q], 0);
    s += rule.weights[q] * std::pow(p.x, a) * std::pow(p.y, b) * std::pow(p.z, c);
  }
  return s * m.tet_volume[0];
}

NodalField random_field(int n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  NodalField f(n);
  for (auto& v : f) v = {g(rng), g(rng), g(rng)};
  return f;
}

}  // namespace

TEST_CASE("quadrature rules integrate monomials exactly up to their degree") {
  const TetMesh m = reference_tet();
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c) {
        const int deg = a + b + c;
        if (deg <= 2)
          CHECK(rule_integral(m, quad_degree2(), a, b, c) ==
                Catch::Approx(monomial_integral(a, b, c)).margin(1e-15));
        CHECK(rule_integral(m, quad_degree4(), a, b, c) ==
              Catch::Approx(monomial_integral(a, b, c)).margin(1e-15));
      }
}

TEST_CASE("P1 stiffness: row sums vanish, constants annihilated") {
  const TetMesh ref = reference_tet();
  const SparseMatrix S1 = assemble_stiffness_p1(ref);
  for (int i = 0; i < S1.rows; ++i) {
    double row = 0.0;
    for (int p = S1.row_ptr[i]; p < S1.row_ptr[i + 1]; ++p) row += S1.val[p];
    CHECK(row == Catch::Approx(0.0).margin(1e-14));
  }

  const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const SparseMatrix S = assemble_stiffness_p1(m);
  std::vector<double> ones(m.n_vertices(), 1.0), y;
  S.apply(ones, y);
  CHECK(norm_inf(y) <= 1e-12);
  CHECK(S.asymmetry_max() <= 1e-12 * S.max_abs());

  // x-constant vector field (1,0,0) has zero stiffness energy
  const NodalField cf(m.n_vertices(), Vec3{1, 0, 0});
  CHECK(std::abs(h1_seminorm(S, cf)) <= 1e-12);
}

TEST_CASE("P1 mass: entries sum to the volume") {
  const TetMesh ref = reference_tet();
  const SparseMatrix M = assemble_mass_p1(ref);
  double total = 0.0;
  for (double v : M.val) total += v;
  CHECK(total == Catch::Approx(ref.tet_volume[0]).epsilon(1e-14));
  CHECK(M.asymmetry_max() == 0.0);
}

TEST_CASE("weighted mass: w = 1 reproduces the mass matrix, w = alpha scales it") {
  const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const QuadRule& rule = quad_degree2();
  const SparseMatrix M = assemble_mass_p1(m);

  QuadScalars w;
  w.nq = rule.size();
  w.v.assign(static_cast<std::size_t>(m.n_tets()) * w.nq, 1.0);
  const SparseMatrix W1 = assemble_weighted_mass(m, rule, w);
  for (int i = 0; i < M.rows; ++i)
    for (int p = M.row_ptr[i]; p < M.row_ptr[i + 1]; ++p)
      for (int c = 0; c < 3; ++c)
        CHECK(W1.coeff(3 * i + c, 3 * M.col[p] + c) == Catch::Approx(M.val[p]).margin(1e-14));

  const double alpha = 0.37;
  for (auto& x : w.v) x = alpha;
  const SparseMatrix Wa = assemble_weighted_mass(m, rule, w);
  CHECK(Wa.coeff(0, 0) == Catch::Approx(alpha * M.coeff(0, 0)).epsilon(1e-13));

  w.v[3] = std::nan("");
  CHECK_THROWS(assemble_weighted_mass(m, rule, w));
}

TEST_CASE("weighted mass with positive weight passes an SPD probe") {
  const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const QuadRule& rule = quad_degree2();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(0.1, 3.0);
  QuadScalars w;
  w.nq = rule.size();
  w.v.resize(static_cast<std::size_t>(m.n_tets()) * w.nq);
  for (auto& x : w.v) x = uni(rng);
  const SparseMatrix W = assemble_weighted_mass(m, rule, w);
  CHECK(W.asymmetry_max() <= 1e-12 * W.max_abs());
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(W.rows), y;
    for (auto& v : x) v = g(rng);
    W.apply(x, y);
    CHECK(dot(x, y) > 0.0);
  }
}

TEST_CASE("cross term: skew-symmetric, vanishing quadratic form, constant-field pairing") {
  const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const QuadRule& rule = quad_degree2();
  NodalField mm = random_field(m.n_vertices(), 3);
  for (auto& v : mm) v = normalized(v);
  const SparseMatrix A = assemble_cross_term(m, rule, mm);

  // A = -A^T
  const SparseMatrix At = A.transposed();
  double worst = 0.0;
  for (int i = 0; i < A.rows; ++i)
    for (int p = A.row_ptr[i]; p < A.row_ptr[i + 1]; ++p)
      worst = std::max(worst, std::abs(A.val[p] + At.coeff(i, A.col[p])));
  CHECK(worst <= 1e-12 * A.max_abs());

  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(A.rows), y;
    for (auto& v : x) v = g(rng);
    A.apply(x, y);
    CHECK(std::abs(dot(x, y)) <= 1e-12 * A.max_abs() * dot(x, x));
  }

  // m = (0,0,1): <m x ex, ey> integrates to the domain volume
  const NodalField ez(m.n_vertices(), Vec3{0, 0, 1});
  const SparseMatrix Az = assemble_cross_term(m, rule, ez);
  std::vector<double> ex(Az.rows, 0.0), ey(Az.rows, 0.0);
  for (int v = 0; v < m.n_vertices(); ++v) {
    ex[3 * v + 0] = 1.0;
    ey[3 * v + 1] = 1.0;
  }
  std::vector<double> Aex;
  Az.apply(ex, Aex);
  CHECK(dot(ey, Aex) == Catch::Approx(1.0).epsilon(1e-12));
  // and the (1,0,0)-against-(1,0,0) pairing vanishes (orthogonality)
  CHECK(dot(ex, Aex) == Catch::Approx(0.0).margin(1e-13));
}

TEST_CASE("nodal interpolation: identity on P1, vertexwise cross products") {
  const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const NodalField f = nodal_interpolate(
      [](const Vec3& p) { return Vec3{1 + 2 * p.x, p.y - p.z, 0.5 * p.z}; }, m);
  for (int v = 0; v < m.n_vertices(); ++v) {
    const Vec3 p = m.vertices[v];
    CHECK(f[v].x == Catch::Approx(1 + 2 * p.x).margin(1e-15));
  }

  NodalField a = random_field(m.n_vertices(), 5), b = a;
  const NodalField c = nodal_cross(a, b);
  for (const auto& v : c) CHECK(norm(v) <= 1e-14);

  CHECK_THROWS(nodal_interpolate([](const Vec3&) { return Vec3{std::nan(""), 0, 0}; }, m));
}

TEST_CASE("nodal interpolation of bounded products: sqrt(5) stability") {
  const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const SparseMatrix M = assemble_mass_p1(m);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double bound = std::sqrt(5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const NodalField phi = random_field(m.n_vertices(), 100 + trial);
    NodalField w(phi.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = uni(rng) * phi[i];
    const double np = l2_norm(M, phi);
    CHECK(l2_norm(M, w) <= bound * np * (1.0 + 1e-12));
  }
}

TEST_CASE("degree-2 to degree-4 difference of variable-coefficient forms is O(h^2)") {
  // quadratic-form metric against a fixed smooth field
  auto form_diff = [](int n) {
    const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, n);
    auto weights = [&](const QuadRule& rule) {
      return sample_scalar(m, rule, [](const Vec3& p) { return std::exp(p.x + 0.5 * p.y); });
    };
    const SparseMatrix A2 = assemble_weighted_mass(m, quad_degree2(), weights(quad_degree2()));
    const SparseMatrix A4 = assemble_weighted_mass(m, quad_degree4(), weights(quad_degree4()));
    const NodalField u = nodal_interpolate(
        [](const Vec3& p) {
          return Vec3{std::sin(p.x + p.y), std::cos(p.z), p.x * p.y};
        },
        m);
    std::vector<double> x, y2, y4;
    flatten(u, x);
    A2.apply(x, y2);
    A4.apply(x, y4);
    return std::abs(dot(x, y2) - dot(x, y4)) / std::abs(dot(x, y4));
  };
  const double d2 = form_diff(2), d4 = form_diff(4);
  CHECK(d4 < d2 / 3.9);  // at least O(h^2); symmetric meshes do better
}

TEST_CASE("load vectors: constant field against P1 basis integrates exactly") {
  const TetMesh m = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const Vec3 f{-2.0, -0.5, 0.0};
  std::vector<double> b(3 * m.n_vertices(), 0.0);
  add_load_constant(m, f, b);
  // sum over vertices of int f phi_a = f |omega| per component
  Vec3 total{};
  for (int v = 0; v < m.n_vertices(); ++v)
    total += Vec3{b[3 * v], b[3 * v + 1], b[3 * v + 2]};
  CHECK(total.x == Catch::Approx(-2.0).epsilon(1e-13));
  CHECK(total.y == Catch::Approx(-0.5).epsilon(1e-13));
  CHECK(total.z == Catch::Approx(0.0).margin(1e-14));

  // nodal path agrees with the constant path
  std::vector<double> bn(3 * m.n_vertices(), 0.0);
  add_load_nodal(m, quad_degree2(), NodalField(m.n_vertices(), f), bn);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(bn[i] == Catch::Approx(b[i]).margin(1e-14));
}
