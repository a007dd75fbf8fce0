#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tpsmag/fem.hpp"
#include "tpsmag/fields.hpp"
#include "tpsmag/mesh.hpp"

using namespace tpsmag;

namespace {

TetMesh reference_tet() {
  TetMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.tets = {{0, 1, 2, 3}};
  finalize_connectivity(m);
  return m;
}

NodalField random_unit_field(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  NodalField f(n);
  for (auto& v : f) v = normalized(Vec3{g(rng), g(rng), g(rng)});
  return f;
}

}  // namespace

TEST_CASE("uniaxial anisotropy operator") {
  const Vec3 axis{0, 0, 1};
  const LowerOrderOp op = LowerOrderOp::uniaxial(0.8, axis);

  SECTION("m perpendicular to the axis gives zero") {
    const NodalField m(5, Vec3{1, 0, 0});
    const NodalField out = eval_pi(op, m);
    for (const auto& v : out) CHECK(norm(v) <= 1e-15);
  }

  SECTION("m along the axis gives c_K a") {
    const NodalField m(5, axis);
    const NodalField out = eval_pi(op, m);
    for (const auto& v : out) CHECK(v.z == Catch::Approx(0.8).margin(1e-15));
  }

  SECTION("permalloy constants give c_K ~ 1.2434e-3") {
    const double cK = anisotropy_coeff(5.0e2, 8.0e5, 4e-7 * 3.14159265358979323846);
    CHECK(cK == Catch::Approx(1.2434e-3).epsilon(1e-4));
  }

  SECTION("pointwise bound |pi(phi)| <= c_K |phi|") {
    const NodalField phi = random_unit_field(40, 3);
    const NodalField out = eval_pi(op, phi);
    for (std::size_t i = 0; i < phi.size(); ++i) CHECK(norm(out[i]) <= 0.8 * norm(phi[i]) + 1e-15);
  }

  SECTION("zero variant returns zero and axis is normalized") {
    const NodalField m(3, Vec3{1, 1, 1});
    for (const auto& v : eval_pi(LowerOrderOp::zero(), m)) CHECK(norm(v) == 0.0);
    const LowerOrderOp scaled = LowerOrderOp::uniaxial(1.0, {0, 0, 5});
    CHECK(norm(scaled.axis) == Catch::Approx(1.0).margin(1e-15));
    CHECK_THROWS(LowerOrderOp::uniaxial(1.0, {0, 0, 0}));
  }
}

TEST_CASE("anisotropy is self-adjoint in L2 on random field pairs") {
  const TetMesh mesh = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 2);
  const SparseMatrix M = assemble_mass_p1(mesh);
  const LowerOrderOp op = LowerOrderOp::uniaxial(1.3, {1, 2, -1});
  for (int trial = 0; trial < 100; ++trial) {
    const NodalField phi = random_unit_field(mesh.n_vertices(), 100 + trial);
    const NodalField psi = random_unit_field(mesh.n_vertices(), 900 + trial);
    const double a = mass_inner(M, eval_pi(op, phi), psi);
    const double b = mass_inner(M, phi, eval_pi(op, psi));
    CHECK(std::abs(a - b) <= 1e-12 * l2_norm(M, phi) * l2_norm(M, psi) + 1e-15);
  }
}

TEST_CASE("slonczewski coefficient G") {
  SlonczewskiParams p;  // defaults: P = 0.8, Je = 1e11, Ms = 8e5, d = 1e-8

  SECTION("bracket at x = 1 is ~8.1505 and the prefactor ~8.18e-3") {
    const double pref = slonczewski_prefactor(p);
    CHECK(pref == Catch::Approx(8.1842e-3).epsilon(1e-3));
    const double G1 = slonczewski_G(1.0, p);
    CHECK(pref / G1 == Catch::Approx(8.150467779 - 4.0).epsilon(1e-8));
  }

  SECTION("finite and continuous over [-1,1]: bracket stays above the pole") {
    // the bracket at x = -1 is (1.8)^3 2 / (4 * 0.8^1.5) ~ 4.075 > 4
    CHECK(slonczewski_prefactor(p) / slonczewski_G(-1.0, p) > 0.0);
    double prev = slonczewski_G(-1.0, p);
    const double step = 2.0 / 200.0;
    for (int i = 1; i <= 200; ++i) {
      const double x = -1.0 + step * i;
      const double g = slonczewski_G(x, p);
      CHECK(std::isfinite(g));
      CHECK(g > 0.0);  // pole never crossed
      CHECK(g < prev);  // G decreases in x
      const double dmax = std::max(std::abs(slonczewski_dG(x, p)),
                                   std::abs(slonczewski_dG(x - step, p)));
      CHECK(std::abs(g - prev) <= 1.2 * dmax * step + 1e-15);
      prev = g;
    }
  }

  SECTION("dG matches finite differences of G") {
    const double eps = 1e-7;
    for (double x : {-0.9, -0.3, 0.0, 0.4, 0.9}) {
      const double fd = (slonczewski_G(x + eps, p) - slonczewski_G(x - eps, p)) / (2 * eps);
      CHECK(slonczewski_dG(x, p) == Catch::Approx(fd).epsilon(1e-5));
    }
  }

  SECTION("domain errors") {
    SlonczewskiParams bad = p;
    bad.P = 0.0;
    CHECK_THROWS(slonczewski_G(0.0, bad));
    CHECK_THROWS(slonczewski_G(1.5, p));
  }
}

TEST_CASE("dissipative operator Pi") {
  const TetMesh mesh = reference_tet();
  const QuadRule& rule = quad_degree2();

  SECTION("slonczewski vanishes for m parallel to p") {
    const DissipativeOp op = DissipativeOp::slonczewski(
        {1, 0, 0}, [](double) { return 2.0; }, [](double) { return 0.0; });
    const NodalField m(mesh.n_vertices(), Vec3{1, 0, 0});
    const OpField out = eval_Pi(op, m, mesh, rule);
    REQUIRE_FALSE(out.is_quad);
    for (const auto& v : out.nodal) CHECK(norm(v) <= 1e-15);
  }

  SECTION("slonczewski domain guard |m.p| <= 1") {
    const DissipativeOp op = DissipativeOp::slonczewski(
        {1, 0, 0}, [](double) { return 1.0; }, [](double) { return 0.0; });
    const NodalField m(mesh.n_vertices(), Vec3{1.5, 0, 0});
    CHECK_THROWS(eval_Pi(op, m, mesh, rule));
  }

  SECTION("zhang-li vanishes for constant m") {
    const DissipativeOp op = DissipativeOp::zhang_li({1, 0, 0}, 0.05);
    const NodalField m(mesh.n_vertices(), Vec3{0, 0, 1});
    const OpField out = eval_Pi(op, m, mesh, rule);
    REQUIRE(out.is_quad);
    for (const auto& v : out.quad.v) CHECK(norm(v) <= 1e-15);
  }

  SECTION("zhang-li on a linear-in-x profile matches the barycentric gradient oracle") {
    // m = m0 + x d with the P1 interpolation exact for linear fields
    const Vec3 m0{0, 0, 1}, d{0, 0.25, 0};
    NodalField m(mesh.n_vertices());
    for (int v = 0; v < mesh.n_vertices(); ++v) m[v] = m0 + mesh.vertices[v].x * d;
    const Vec3 u{1, 0, 0};
    const DissipativeOp op = DissipativeOp::zhang_li(u, 0.05);
    const OpField out = eval_Pi(op, m, mesh, rule);
    REQUIRE(out.is_quad);
    for (int q = 0; q < rule.size(); ++q) {
      const Vec3 mq = field_value(m, mesh, 0, rule.points[q]);
      const Vec3 expect = cross(mq, d) + 0.05 * d;  // (u.grad)m = d for u = ex
      const Vec3 got = out.quad.at(0, q);
      CHECK(norm(got - expect) <= 1e-14);
    }
  }
}

TEST_CASE("derivative operator D") {
  const TetMesh mesh = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 1);
  const QuadRule& rule = quad_degree2();
  const DissipativeOp slon = DissipativeOp::slonczewski(
      {0, 0, 1}, [](double x) { return 1.0 + 0.3 * x; }, [](double) { return 0.3; });
  const DissipativeOp zl = DissipativeOp::zhang_li({1, 0.5, 0}, 0.05);

  SECTION("psi = 0 gives zero") {
    const NodalField m = random_unit_field(mesh.n_vertices(), 4);
    const NodalField zero(mesh.n_vertices(), Vec3{});
    for (const DissipativeOp* op : {&slon, &zl}) {
      const OpField out = eval_D(*op, m, zero, mesh, rule);
      const double worst = out.is_quad
                               ? [&] { double w = 0; for (auto& v : out.quad.v) w = std::max(w, norm(v)); return w; }()
                               : [&] { double w = 0; for (auto& v : out.nodal) w = std::max(w, norm(v)); return w; }();
      CHECK(worst <= 1e-15);
    }
  }

  SECTION("constant G with m, psi parallel to p gives zero") {
    const DissipativeOp cg = DissipativeOp::slonczewski(
        {0, 0, 1}, [](double) { return 2.0; }, [](double) { return 0.0; });
    const NodalField m(mesh.n_vertices(), Vec3{0, 0, 1});
    const NodalField psi(mesh.n_vertices(), Vec3{0, 0, -0.5});
    const OpField out = eval_D(cg, m, psi, mesh, rule);
    for (const auto& v : out.nodal) CHECK(norm(v) <= 1e-15);
  }

  SECTION("linearity in psi to 1e-12") {
    const NodalField m = random_unit_field(mesh.n_vertices(), 8);
    const NodalField p1 = random_unit_field(mesh.n_vertices(), 9);
    const NodalField p2 = random_unit_field(mesh.n_vertices(), 10);
    const double a = 0.7, b = -1.3;
    NodalField combo(p1.size());
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * p1[i] + b * p2[i];
    for (const DissipativeOp* op : {&slon, &zl}) {
      const OpField d1 = eval_D(*op, m, p1, mesh, rule);
      const OpField d2 = eval_D(*op, m, p2, mesh, rule);
      const OpField dc = eval_D(*op, m, combo, mesh, rule);
      if (dc.is_quad) {
        for (std::size_t i = 0; i < dc.quad.v.size(); ++i)
          CHECK(norm(dc.quad.v[i] - (a * d1.quad.v[i] + b * d2.quad.v[i])) <= 1e-12);
      } else {
        for (std::size_t i = 0; i < dc.nodal.size(); ++i)
          CHECK(norm(dc.nodal[i] - (a * d1.nodal[i] + b * d2.nodal[i])) <= 1e-12);
      }
    }
  }

  SECTION("D is the Gateaux derivative of Pi (finite differences)") {
    // m(s) = normalize(a + s b) vertexwise, with analytic derivative
    const NodalField a = random_unit_field(mesh.n_vertices(), 12);
    const NodalField b = random_unit_field(mesh.n_vertices(), 13);
    auto m_of = [&](double s) {
      NodalField m(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) m[i] = normalized(a[i] + s * b[i]);
      return m;
    };
    auto dm_of = [&](double s) {
      NodalField dm(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 c = a[i] + s * b[i];
        const Vec3 ch = normalized(c);
        dm[i] = (b[i] - dot(b[i], ch) * ch) / norm(c);
      }
      return dm;
    };
    const double s0 = 0.2;
    const NodalField m = m_of(s0), dm = dm_of(s0);
    for (const DissipativeOp* op : {&slon, &zl}) {
      double prev_err = -1.0;
      for (double eps : {1e-2, 1e-3, 1e-4}) {
        const OpField base = eval_Pi(*op, m, mesh, rule);
        const OpField bumped = eval_Pi(*op, m_of(s0 + eps), mesh, rule);
        const OpField deriv = eval_D(*op, m, dm, mesh, rule);
        double err = 0.0;
        if (base.is_quad) {
          for (std::size_t i = 0; i < base.quad.v.size(); ++i)
            err = std::max(err, norm((bumped.quad.v[i] - base.quad.v[i]) / eps - deriv.quad.v[i]));
        } else {
          for (std::size_t i = 0; i < base.nodal.size(); ++i)
            err = std::max(err, norm((bumped.nodal[i] - base.nodal[i]) / eps - deriv.nodal[i]));
        }
        if (prev_err > 0.0) CHECK(err < prev_err / 5.0);  // first order: factor ~10
        prev_err = err;
      }
    }
  }
}

TEST_CASE("per-step operator combinations") {
  const TetMesh mesh = build_cube_mesh({0, 0, 0}, {1, 1, 1}, 1);
  const QuadRule& rule = quad_degree2();
  const Vec3 axis{0, 0, 1};
  const LowerOrderOp pi_op = LowerOrderOp::uniaxial(0.9, axis);
  const double k = 0.01;

  SECTION("AB telescopes when m_i = m_prev") {
    const NodalField m = random_unit_field(mesh.n_vertices(), 20);
    const NodalField ab = build_pi_step(FieldStrategy::AB, pi_op, nullptr, m, &m, k);
    const NodalField direct = eval_pi(pi_op, m);
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(norm(ab[i] - direct[i]) <= 1e-15);
  }

  SECTION("FI with v = 0 reduces to pi(m_i)") {
    const NodalField m = random_unit_field(mesh.n_vertices(), 21);
    const NodalField zero(m.size(), Vec3{});
    const NodalField fi = build_pi_step(FieldStrategy::FI, pi_op, &zero, m, &m, k);
    const NodalField direct = eval_pi(pi_op, m);
    for (std::size_t i = 0; i < fi.size(); ++i) CHECK(norm(fi[i] - direct[i]) <= 1e-15);
  }

  SECTION("AB with m = a, m_prev = -a gives 2 c_K a") {
    const NodalField m(mesh.n_vertices(), axis);
    NodalField mp(mesh.n_vertices(), -axis);
    const NodalField ab = build_pi_step(FieldStrategy::AB, pi_op, nullptr, m, &mp, k);
    for (const auto& v : ab) CHECK(v.z == Catch::Approx(2.0 * 0.9).margin(1e-14));
  }

  SECTION("Pi combinations: zero op, AB telescoping, FI parallel case") {
    const NodalField m(mesh.n_vertices(), Vec3{0, 0, 1});
    const OpField z = build_Pi_step(FieldStrategy::AB, DissipativeOp::zero(), nullptr, m, &m, k,
                                    mesh, rule);
    for (const auto& v : z.nodal) CHECK(norm(v) == 0.0);

    const DissipativeOp slon = DissipativeOp::slonczewski(
        {0, 0, 1}, [](double x) { return 1.0 + x; }, [](double) { return 1.0; });
    const NodalField mr = random_unit_field(mesh.n_vertices(), 22);
    const OpField ab = build_Pi_step(FieldStrategy::AB, slon, nullptr, mr, &mr, k, mesh, rule);
    const OpField direct = eval_Pi(slon, mr, mesh, rule);
    for (std::size_t i = 0; i < ab.nodal.size(); ++i)
      CHECK(norm(ab.nodal[i] - direct.nodal[i]) <= 1e-14);

    const NodalField vpar(mesh.n_vertices(), Vec3{0, 0, 2});
    const OpField fi = build_Pi_step(FieldStrategy::FI, slon, &vpar, m, &m, k, mesh, rule);
    for (const auto& v : fi.nodal) CHECK(norm(v) <= 1e-15);
  }

  SECTION("missing history raises") {
    const NodalField m = random_unit_field(mesh.n_vertices(), 23);
    CHECK_THROWS(build_pi_step(FieldStrategy::AB, pi_op, nullptr, m, nullptr, k));
    CHECK_THROWS(build_pi_step(FieldStrategy::FI, pi_op, nullptr, m, &m, k));
  }
}

TEST_CASE("applied field schedules") {
  SECTION("ramp hits both branches at the breakpoints") {
    const AppliedField f = AppliedField::ramp(1.0);
    CHECK(eval_applied(f, 1.0).x == Catch::Approx(15.0).margin(1e-12));
    CHECK(eval_applied(f, 3.0).x == Catch::Approx(30.0).margin(1e-12));
    CHECK(eval_applied(f, 7.0).x == Catch::Approx(0.0).margin(1e-12));
    CHECK_THROWS(eval_applied(f, 7.5));
    CHECK_THROWS(eval_applied(f, -0.1));
  }

  SECTION("ramp is C1: derivative at t = 2 vanishes from both sides") {
    const AppliedField f = AppliedField::ramp(1.0);
    const double eps = 1e-6;
    const double dl = (eval_applied(f, 2.0).x - eval_applied(f, 2.0 - eps).x) / eps;
    const double dr = (eval_applied(f, 2.0 + eps).x - eval_applied(f, 2.0).x) / eps;
    CHECK(std::abs(dl) <= 2e-5);
    CHECK(std::abs(dr) <= 2e-5);
    // derivative jumps across every breakpoint are O(eps)
    for (double tb : {1.0, 2.0, 4.0, 5.0, 6.0}) {
      const double a = (eval_applied(f, tb).x - eval_applied(f, tb - eps).x) / eps;
      const double b = (eval_applied(f, tb + eps).x - eval_applied(f, tb).x) / eps;
      CHECK(std::abs(a - b) <= 100 * eps);
    }
  }

  SECTION("time-scaled ramp compresses the schedule") {
    const AppliedField f = AppliedField::ramp(0.25, 2.0);
    CHECK(f.max_time() == Catch::Approx(1.75));
    CHECK(eval_applied(f, 0.75).x == Catch::Approx(60.0).margin(1e-12));  // s = 3, doubled
  }

  SECTION("sample interpolation is C1 and interpolatory") {
    const AppliedField f = AppliedField::samples(
        {0.0, 1.0, 2.0, 3.0}, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0}});
    CHECK(norm(eval_applied(f, 1.0) - Vec3{1, 0, 0}) <= 1e-14);
    const double eps = 1e-6;
    const Vec3 dl = (eval_applied(f, 1.0) - eval_applied(f, 1.0 - eps)) / eps;
    const Vec3 dr = (eval_applied(f, 1.0 + eps) - eval_applied(f, 1.0)) / eps;
    CHECK(norm(dl - dr) <= 1e-4);
    CHECK_THROWS(eval_applied(f, 3.5));
    CHECK_THROWS(AppliedField::samples({0.0, 0.0}, {{0, 0, 0}, {1, 0, 0}}));
  }

  SECTION("constant field evaluates anywhere in [0, inf)") {
    const AppliedField f = AppliedField::constant({-2, -0.5, 0});
    CHECK(eval_applied(f, 1e6).x == -2.0);
    CHECK_THROWS(eval_applied(f, -1.0));
  }
}
