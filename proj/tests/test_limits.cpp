#include <doctest.h>

#include "steadytube/limits.hpp"
#include "steadytube/system.hpp"

#include <cmath>
#include <numbers>

using namespace steadytube;

namespace {

const double kRhoPlus = (std::sqrt(33.0) - 1.0) / 4.0;

GasBoundaryData dataset(double rho0, double u0, double u1) {
  GasBoundaryData d;
  d.rho0 = rho0;
  d.u0 = u0;
  d.u1 = u1;
  return d;
}

GasBoundaryData shock_data() {
  GasBoundaryData d = dataset(0.5, 2.0, 1.0);
  d.u1_conjugate = true;
  return d;
}

std::vector<GasBoundaryData> zoo() {
  return {dataset(1.2, 1.0 / 1.2, 1.0),  dataset(0.6, 1.0 / 0.6, 2.5), dataset(1.0, 1.0, 1.0 / 0.6),
          dataset(0.4, 2.5, 1.0 / 0.6), dataset(1.0, 1.0, 1.0 / 1.3), shock_data()};
}

}  // namespace

TEST_CASE("sonic state and its scaling in m") {
  const PressureLaw p;
  const double rs = sonic_state(1.0, p);
  CHECK(rs == doctest::Approx(std::pow(0.5, 1.0 / 3.0)).epsilon(1e-12));
  CHECK(rs == doctest::Approx(0.79370).epsilon(1e-5));
  CHECK(sonic_state(2.0, p) == doctest::Approx(std::pow(2.0, 2.0 / 3.0) * rs).epsilon(1e-12));
  const PressureLaw q{1.5, 1.4};
  CHECK(sonic_state(2.0, q) == doctest::Approx(std::pow(2.0, 2.0 / 2.4) * sonic_state(1.0, q)).epsilon(1e-12));
  CHECK_THROWS_AS(sonic_state(0.0, p), ValidationError);
}

TEST_CASE("conjugate states") {
  const PressureLaw p;
  CHECK(conjugate_state(0.5, 1.0, p) == doctest::Approx(kRhoPlus).epsilon(1e-12));
  for (double rho : {0.3, 0.6, 0.75, 0.9, 1.4, 2.0}) {
    const double back = conjugate_state(conjugate_state(rho, 1.0, p), 1.0, p);
    CHECK(std::abs(back - rho) <= 1e-10);
  }
  const double rs = sonic_state(1.0, p);
  CHECK(std::abs(conjugate_state(rs - 1e-3, 1.0, p) - rs) < 3e-3);
  CHECK(std::abs(conjugate_state(rs + 1e-3, 1.0, p) - rs) < 3e-3);
}

TEST_CASE("classifier reference cases") {
  const InviscidConfig s = classify_inviscid(shock_data());
  CHECK(s.kind == ConfigKind::InteriorShock);
  CHECK(s.rho1 == doctest::Approx(kRhoPlus).epsilon(1e-12));
  CHECK(s.rates.first == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(s.rates.second == doctest::Approx(2.3376).epsilon(1e-4));
  REQUIRE(s.shock_location);
  CHECK(*s.shock_location == doctest::Approx(0.7571).epsilon(1e-4));

  const InviscidConfig d = classify_inviscid(dataset(1.0, 1.0, 1.6667));
  CHECK(d.kind == ConfigKind::DoubleCharacteristicBL);
  CHECK(d.rho_star == doctest::Approx(0.79370).epsilon(1e-5));
  CHECK_FALSE(d.interior_state);

  // the profile ODE puts the layer at the end where psi is largest
  const InviscidConfig e = classify_inviscid(dataset(1.2, 0.8333, 1.0));
  CHECK(e.kind == ConfigKind::LeftBL_expansive);
  REQUIRE(e.interior_state);
  CHECK(*e.interior_state == doctest::Approx(0.99996).epsilon(1e-6));

  const GasBoundaryData literal = dataset(0.5, 2.0, 0.84307);
  CHECK(classify_inviscid(literal).kind != ConfigKind::InteriorShock);
  CHECK(classify_inviscid(literal, ClassifyOptions{1e-6}).kind == ConfigKind::InteriorShock);

  CHECK(classify_inviscid(dataset(1.0, 1.0, 1.0)).kind == ConfigKind::Constant);
}

TEST_CASE("classifier is invariant under joint velocity and pressure rescaling") {
  for (GasBoundaryData d : zoo()) {
    const InviscidConfig base = classify_inviscid(d);
    for (double c : {0.5, 3.0}) {
      GasBoundaryData s = d;
      s.u0 *= c;
      s.u1 *= c;
      s.pressure.a *= c * c;
      const InviscidConfig r = classify_inviscid(s);
      CHECK(r.kind == base.kind);
      CHECK(r.rho_star == doctest::Approx(base.rho_star).epsilon(1e-10));
      CHECK(r.shock_location.has_value() == base.shock_location.has_value());
      if (r.shock_location) CHECK(*r.shock_location == doctest::Approx(*base.shock_location).epsilon(1e-10));
    }
  }
}

TEST_CASE("rest points bracket the sonic state with the right sign pattern") {
  const InviscidConfig s = classify_inviscid(shock_data());
  REQUIRE(s.rest_points);
  const auto [lo, hi] = *s.rest_points;
  CHECK(lo < s.rho_star);
  CHECK(s.rho_star < hi);
  const IsentropicGas gas = shock_data().gas();
  auto rhs = [&](double rho) { return rho * rho * (s.b - gas.psi(rho)); };
  for (double t : {0.1, 0.5, 0.9}) CHECK(rhs(lo + t * (hi - lo)) > 0.0);
  CHECK(rhs(0.5 * lo) < 0.0);
  CHECK(rhs(1.5 * hi) < 0.0);
}

TEST_CASE("large viscosity gives a nearly linear velocity profile") {
  // as nu grows, rho'/rho^2 becomes constant, so u = m/rho tends to a straight line
  const GasBoundaryData d = dataset(1.2, 1.0 / 1.2, 1.0);
  auto deviation = [&](const IsentropicProfile& p) {
    double worst = 0.0;
    for (double x : {0.25, 0.5, 0.75})
      worst = std::max(worst, std::abs(1.0 / p(x) - (1.0 / d.rho0 + x * (1.0 / d.rho1() - 1.0 / d.rho0))));
    return worst / std::abs(1.0 / d.rho1() - 1.0 / d.rho0);
  };
  const IsentropicProfile p = solve_isentropic_viscous(d, 10.0);
  CHECK(std::abs(p(1.0) - d.rho1()) <= 1e-9);
  CHECK(std::abs(p(0.0) - d.rho0) <= 1e-9);
  CHECK(deviation(p) < 0.05);
  // the departure from linearity decays like 1/nu
  const IsentropicProfile q = solve_isentropic_viscous(d, 100.0);
  CHECK(std::abs(q(1.0) - d.rho1()) <= 1e-9);
  CHECK(deviation(q) < 0.15 * deviation(p));
}

TEST_CASE("equal end states give the constant profile") {
  const GasBoundaryData d = dataset(1.0, 1.0, 1.0);
  const IsentropicProfile p = solve_isentropic_viscous(d, 0.01);
  CHECK(p.b() == doctest::Approx(d.gas().psi(1.0)).epsilon(1e-12));
  for (double x : {0.0, 0.3, 1.0}) CHECK(p(x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("small-viscosity profiles approach the classified limit") {
  const double nu = 1e-4;
  for (const GasBoundaryData& d : zoo()) {
    const InviscidConfig c = classify_inviscid(d);
    const IsentropicProfile p = solve_isentropic_viscous(d, nu);
    std::vector<double> breaks;
    if (c.shock_location) breaks.push_back(*c.shock_location);
    const double l1 = lp_distance(p, [&](double x) { return limit_density(c, x); }, 1.0, breaks);
    CHECK(l1 <= 10.0 * nu * std::log(1.0 / nu));
    CHECK(classify_shape(p, c.rho_star).label == expected_shape(c.kind));
  }
}

TEST_CASE("shock location converges monotonically") {
  const GasBoundaryData d = shock_data();
  const double xs = *classify_inviscid(d).shock_location;
  double prev = INFINITY;
  for (double nu : {1e-2, 1e-3, 1e-4}) {
    const IsentropicProfile p = solve_isentropic_viscous(d, nu);
    const double gap = std::abs(p.steepest_point() - xs);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("log-log fits") {
  const std::vector<double> x{1e-4, 1e-3, 1e-2};
  const Fit f = fit_loglog(x, {3e-8, 3e-6, 3e-4});
  CHECK(f.accepted);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  CHECK_FALSE(fit_loglog(x, {1e-3, 1e-5, 1e-4}).accepted);
  CHECK_THROWS_AS(convergence_study(shock_data(), {1e-2, 1e-3}, {1.0}), ValidationError);
}

TEST_CASE("large-viscosity limit profile") {
  FullGasLimitParams par;
  par.u0 = 1.0;
  par.u1 = 2.0;
  par.e0 = 1.0;
  par.e1 = 1.5;
  for (double ratio : {0.5, 1.0, 4.0}) {
    par.ratio = ratio;
    const LimitProfile l = limit_profile(par);
    CHECK(l.u(0.5) == doctest::Approx(1.5));
    CHECK(l.e(0.0) == doctest::Approx(par.e0).epsilon(1e-14));
    CHECK(l.e(1.0) == doctest::Approx(par.e1).epsilon(1e-14));
  }
  const LargeViscTable t = full_gas_large_visc(FullGasLimitParams{}, {10.0, 30.0});
  for (const LargeViscRow& row : t.rows) {
    CHECK(row.converged);
    CHECK(row.boundary_mismatch <= 1e-8);
  }
}

TEST_CASE("formal large-viscosity solve") {
  const Mat a{{1.0, 0.3}, {0.2, 0.5}};
  const SystemDef lin = make_linear(a, Mat::Identity(1, 1));
  const Vec ct = Vec::Constant(1, 0.7);
  const Shot seg = formal_large_visc_solve(lin, Vec{{0.2, -0.1}}, ct);
  REQUIRE(seg.reached_end());
  for (double x : {0.0, 0.4, 1.0}) CHECK(std::abs(seg.ii(x)[0] - (-0.1 + 0.7 * x)) < 1e-10);

  const double alpha = 2.0, nu = 0.8;
  const SystemDef full = make_full_gas({0.4, alpha, nu});
  FullGasLimitParams par;
  par.u0 = 1.0;
  par.u1 = 1.6;
  par.e0 = 1.0;
  par.e1 = 1.3;
  par.ratio = nu / alpha;
  const LimitProfile l = limit_profile(par);
  const Vec c{{alpha * (par.u1 - par.u0),
               nu * (par.e1 - par.e0) + alpha * (par.u1 - par.u0) * 0.5 * (par.u0 + par.u1)}};
  const Shot fs = formal_large_visc_solve(full, Vec{{1.0, par.u0, par.e0}}, c);
  REQUIRE(fs.reached_end());
  double worst = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double x = k / 20.0;
    worst = std::max({worst, std::abs(fs.ii(x)[0] - l.u(x)), std::abs(fs.ii(x)[1] - l.e(x))});
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("cone feasibility") {
  const Vec o = Vec::Zero(2), step{{1.0, 0.0}};
  ConeDomain box;
  box.lo = Vec::Constant(2, -0.5);
  box.hi = Vec::Constant(2, 1.5);
  const ConeResult flat = cone_feasibility(1.0, 1.0, o, step, box);
  CHECK(flat.theta == doctest::Approx(0.0));
  CHECK(flat.feasible);
  ConeDomain ball;
  ball.kind = ConeDomain::Kind::ball;
  ball.center = o;
  ball.radius = 1.5;
  const ConeResult tight = cone_feasibility(0.5, 1.0, o, step, ball);
  CHECK(tight.theta == doctest::Approx(std::numbers::pi / 3.0).epsilon(1e-12));
  CHECK_FALSE(tight.feasible);
  REQUIRE(tight.violating_point);
  CHECK_FALSE(ball.contains(*tight.violating_point));
  ball.radius = 2.5;
  CHECK(cone_feasibility(0.5, 1.0, o, step, ball).feasible);
  CHECK(cone_feasibility(0.5, 1.0, o, o, ball).degenerate);
  CHECK_THROWS_AS(cone_feasibility(1.0, 0.5, o, step, ball), ValidationError);
}
