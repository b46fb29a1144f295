#include <doctest.h>

#include "steadytube/steady.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace steadytube;

namespace {

const double kE = std::numbers::e;

SystemDef unit_linear() { return make_linear(Mat::Identity(2, 2), Mat::Identity(1, 1)); }

Vec v1(double a) { return Vec::Constant(1, a); }

}  // namespace

TEST_CASE("resolve_hyperbolic inverts the mass flux") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 1.0});
  CHECK(resolve_hyperbolic(iso, v1(2.0), v1(1.0), v1(1.0))[0] == doctest::Approx(0.5).epsilon(1e-12));
  const SystemDef full = make_full_gas({0.4, 1.0, 1.0});
  const Vec rho = resolve_hyperbolic(full, Vec{{0.84307, 1.0}}, v1(1.0), v1(1.0));
  CHECK(rho[0] == doctest::Approx(1.0 / 0.84307).epsilon(1e-12));
  CHECK(std::abs(rho[0] - 1.18614) < 1e-4);
}

TEST_CASE("resolve_hyperbolic reports unreachable flux levels") {
  // f_I = exp(u_I) never reaches a negative level
  SystemDef sys = unit_linear();
  sys.f = [](const Vec& u) { return Vec{{std::exp(u[0]), u[1]}}; };
  sys.jac_f_fn = [](const Vec& u) { return Mat{{std::exp(u[0]), 0.0}, {0.0, 1.0}}; };
  CHECK_THROWS_AS(resolve_hyperbolic(sys, v1(0.0), v1(-1.0), v1(0.0)), NumericalError);
}

TEST_CASE("shooting: constant and linear examples") {
  const SystemDef lin = unit_linear();
  const Shot flat = shoot(lin, Vec::Zero(2), v1(0.0));
  CHECK(flat.reached_end());
  CHECK(flat.ii.back().norm() == 0.0);
  const double c2 = 1.0 / (kE - 1.0);
  CHECK(std::abs(c2 - 0.58198) < 1e-5);
  const Shot s = shoot(lin, Vec::Zero(2), v1(c2));
  CHECK(std::abs(s.ii.back()[0] - 1.0) < 1e-6);
  CHECK(std::abs((*phi(lin, Vec::Zero(2), v1(1.0), v1(c2)))[0]) < 1e-6);
  CHECK((*phi(lin, Vec::Zero(2), v1(1.0), v1(0.0)))[0] == doctest::Approx(-1.0));
  CHECK((*phi(lin, Vec::Zero(2), v1(0.0), v1(0.0))).norm() == 0.0);
}

TEST_CASE("Phi is undefined when the shot leaves the domain") {
  // the energy is driven through zero
  const SystemDef gas = make_full_gas({0.4, 1.0, 1.0});
  const Vec c2{{0.0, -50.0}};
  CHECK(shoot(gas, Vec{{1.0, 0.5, 1.0}}, c2).status() == ode::Status::left_domain);
  CHECK_FALSE(phi(gas, Vec{{1.0, 0.5, 1.0}}, Vec{{0.6, 1.1}}, c2).has_value());
}

TEST_CASE("dPhi for the scalar linear example is e - 1") {
  const Mat j = jacobian_dphi(unit_linear(), Vec::Zero(2), v1(0.0));
  CHECK(j(0, 0) == doctest::Approx(kE - 1.0).epsilon(1e-7));
  const SteadyProfile c = constant_profile(unit_linear(), Vec::Zero(2));
  CHECK(c.det_dphi == doctest::Approx(kE - 1.0).epsilon(1e-12));
}

TEST_CASE("finite-difference dPhi matches the closed form on random linear systems") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    Mat a(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = u(rng);
    a(0, 0) = 1.5;
    const Mat b = Mat::Identity(2, 2) * 1.2;
    const SystemDef sys = make_linear(a, b);
    const Vec u0 = Vec::Zero(3);
    const Mat fd = jacobian_dphi(sys, u0, Vec::Zero(2));
    const Mat exact = constant_profile(sys, u0).dphi;
    CHECK((fd - exact).norm() / exact.norm() < 1e-6);
  }
}

TEST_CASE("solve_steady: linear and constant data") {
  const SystemDef lin = unit_linear();
  const SteadyProfile p = solve_steady(lin, Vec::Zero(2), v1(1.0), v1(0.0));
  CHECK(p.converged);
  CHECK(p.constants.c2[0] == doctest::Approx(1.0 / (kE - 1.0)).epsilon(1e-9));
  CHECK(p.state(0.0).norm() == 0.0);
  const SteadyProfile c = solve_steady(make_isentropic_ns({2.0, 1.0, 0.3}), Vec{{1.0, 0.5}}, v1(0.5), v1(0.0));
  CHECK(c.converged);
  CHECK(c.iterations <= 1);
  CHECK(c.constants.c2.norm() <= 1e-10);
}

TEST_CASE("linear closed form") {
  const LinearClosedForm a = linear_closed_form(Mat::Identity(2, 2), Mat::Identity(1, 1), Vec::Zero(2), v1(1.0));
  CHECK(a.c_tilde[0] == doctest::Approx(1.0 / (kE - 1.0)).epsilon(1e-12));
  CHECK(a.profile.state(1.0)[1] == doctest::Approx(1.0).epsilon(1e-12));
  // nilpotent reduced matrix: pure integrator
  const LinearClosedForm z = linear_closed_form(Mat{{1.0, 0.0}, {0.0, 0.0}}, Mat::Identity(1, 1), Vec{{0.0, 0.2}},
                                                v1(0.7));
  CHECK(z.c_tilde[0] == doctest::Approx(0.5).epsilon(1e-12));
  // rotation: singular map at 2 pi i
  const SystemDef rot = make_rotation_example();
  try {
    linear_closed_form(rot.jac_f(Vec::Zero(2)), Mat::Identity(2, 2), Vec::Zero(2), Vec::Ones(2));
    FAIL("expected a singular-map error");
  } catch (const SingularMapError& e) {
    CHECK(std::abs(std::abs(e.eigenvalue().imag()) - 2.0 * std::numbers::pi) < 1e-8);
  }
}

TEST_CASE("profile invariants: root consistency, boundary data and mass flux") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 0.1});
  const Vec u0{{1.0, 0.5}};
  const SteadyProfile p = solve_steady(iso, u0, v1(0.7), v1(0.0));
  REQUIRE(p.converged);
  CHECK((p.state(0.0) - u0).norm() == 0.0);
  CHECK(std::abs(p.state(1.0)[1] - 0.7) <= 1e-9 * 1.7);
  CHECK((*phi(iso, u0, v1(0.7), p.constants.c2)).norm() <= 1e-9 * 1.7);
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const Vec u = p.state(i / 200.0);
    worst = std::max(worst, std::abs(u[0] * u[1] - 0.5));
  }
  CHECK(worst <= 1e-8);
  const SystemDef full = make_full_gas({0.4, 1.0, 1.0});
  const SteadyProfile q = solve_steady(full, Vec{{1.0, 0.5, 1.0}}, Vec{{0.6, 1.1}}, Vec::Zero(2));
  REQUIRE(q.converged);
  worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const Vec u = q.state(i / 200.0);
    worst = std::max(worst, std::abs(u[0] * u[1] - 0.5));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("constant states of symmetrisable systems give c2 = 0 with positive det dPhi") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0.4, 2.0);
  for (int k = 0; k < 5; ++k) {
    const Vec iso{{pos(rng), pos(rng)}};
    const SystemDef s = make_isentropic_ns({2.0, 1.0, 0.5});
    const SteadyProfile p = solve_steady(s, iso, iso.tail(1), v1(0.0));
    CHECK(p.constants.c2.norm() == 0.0);
    CHECK(p.det_dphi > 0.0);
    CHECK(constant_profile(s, iso).det_dphi > 0.0);
    const Vec full{{pos(rng), pos(rng), pos(rng)}};
    const SystemDef f = make_full_gas({0.4, 1.0, 1.0});
    CHECK(constant_profile(f, full).det_dphi > 0.0);
  }
}

TEST_CASE("isentropic shock data at nu = 0.01 converge to a shock-type profile") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 0.01});
  const SteadyProfile p = solve_steady(iso, Vec{{0.5, 2.0}}, v1(0.84307), v1(-1e-10));
  REQUIRE(p.converged);
  CHECK(p.residual <= 1e-9 * 1.85);
  const double mid = 0.5 * (0.5 + 1.0 / 0.84307);
  double x_cross = -1.0;
  for (int i = 0; i < 2000; ++i) {
    const double x = i / 2000.0;
    if (p.state(x)[0] < mid && p.state(x + 1.0 / 2000.0)[0] >= mid) x_cross = x;
  }
  CHECK(x_cross > 0.05);
  CHECK(x_cross < 0.95);
}

TEST_CASE("entropy dissipation") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 0.2});
  const EntropyDiagnostic flat = entropy_dissipation(iso, constant_profile(iso, Vec{{1.0, 0.5}}));
  CHECK(std::abs(flat.boundary_term) <= 1e-14);
  CHECK(std::abs(flat.min_integrand) <= 1e-14);
  for (double u1 : {0.4, 0.45, 0.6}) {
    const SteadyProfile p = solve_steady(iso, Vec{{1.0, 0.5}}, v1(u1), v1(0.0));
    REQUIRE(p.converged);
    const EntropyDiagnostic d = entropy_dissipation(iso, p);
    CHECK(d.min_integrand >= -1e-10);
    CHECK(d.boundary_term <= 1e-10);
    CHECK(std::abs(d.dissipation + d.boundary_term) <= 1e-6 * (1.0 + std::abs(d.dissipation)));
  }
  CHECK_THROWS_AS(entropy_dissipation(unit_linear(), constant_profile(unit_linear(), Vec::Zero(2))),
                  UnsupportedError);
}

TEST_CASE("Brouwer degree probe") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 1.0});
  DegreeOptions opt;
  opt.n_starts = 16;
  const DegreeResult flat = brouwer_degree(iso, Vec{{1.0, 0.5}}, v1(0.5), v1(-1.0), v1(1.0), opt);
  CHECK(flat.degree == 1);
  REQUIRE(flat.roots.size() == 1);
  CHECK(flat.roots[0].c2.norm() <= 1e-8);
  const DegreeResult far = brouwer_degree(iso, Vec{{1.0, 0.5}}, v1(0.5), v1(5.0), v1(6.0), opt);
  CHECK(far.degree == 0);
  CHECK(far.roots.empty());
  opt.jobs = 3;
  const DegreeResult par = brouwer_degree(iso, Vec{{1.0, 0.5}}, v1(0.55), v1(-1.0), v1(1.0), opt);
  opt.jobs = 1;
  const DegreeResult seq = brouwer_degree(iso, Vec{{1.0, 0.5}}, v1(0.55), v1(-1.0), v1(1.0), opt);
  CHECK(par.degree == seq.degree);
  REQUIRE(par.roots.size() == seq.roots.size());
  for (std::size_t i = 0; i < par.roots.size(); ++i) CHECK(par.roots[i].c2 == seq.roots[i].c2);
}

TEST_CASE("local uniqueness at small amplitude") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 0.5});
  const Vec u0{{1.0, 0.5}};
  const SteadyProfile p = solve_steady(iso, u0, v1(0.52), v1(0.0));
  REQUIRE(p.converged);
  const double eps = std::max(std::abs(p.constants.c2[0]), 1e-3);
  DegreeOptions opt;
  opt.n_starts = 100;
  const DegreeResult d = brouwer_degree(iso, u0, v1(0.52), v1(-10.0 * eps), v1(10.0 * eps), opt);
  CHECK(d.roots.size() == 1);
  CHECK(d.degree == 1);
}

TEST_CASE("Halton points are seeded and in the unit cube") {
  const auto a = halton_points(32, 2, 7), b = halton_points(32, 2, 7), c = halton_points(32, 2, 8);
  CHECK(a.size() == 32);
  bool differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].minCoeff() >= 0.0);
    CHECK(a[i].maxCoeff() < 1.0);
    if (a[i] != c[i]) differ = true;
  }
  CHECK(differ);
}
