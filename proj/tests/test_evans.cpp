#include <doctest.h>

#include "oracles.hpp"

#include "steadytube/evans.hpp"
#include "steadytube/steady.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace steadytube;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

SteadyProfile iso_profile(const SystemDef& sys, double u1) {
  SteadyProfile p = solve_steady(sys, Vec{{1.0, 0.5}}, v1(u1), v1(0.0));
  REQUIRE(p.converged);
  return p;
}

double phase_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi)); }

}  // namespace

TEST_CASE("ScaledComplex round trip") {
  const cplx z(-3.0, 4.0);
  const ScaledComplex s = ScaledComplex::from(z);
  CHECK(std::abs(s.value() - z) < 1e-14);
  CHECK(ScaledComplex::from(0.0).is_zero());
  CHECK(ScaledComplex{0.0, std::numbers::pi}.real_sign() == -1);
  CHECK(std::abs((s * s).value() - z * z) < 1e-12);
}

TEST_CASE("constant profile at lambda = 0 keeps F constant") {
  const SystemDef sys = make_isentropic_ns({2.0, 1.0, 0.5});
  const SteadyProfile p = constant_profile(sys, Vec{{1.0, 0.5}});
  const LinearizedField field(sys, p, cplx(0.0, 0.0));
  const CMat m = field(0.3);
  CHECK(m.bottomRows(2).norm() == 0.0);
}

TEST_CASE("constant-state coefficient matrix matches the dispersion relation") {
  const SystemDef sys = make_isentropic_ns({2.0, 1.0, 0.5});
  const Vec u{{1.0, 0.5}};
  const SteadyProfile p = constant_profile(sys, u);
  const cplx lambda(1.0, 0.0);
  const LinearizedField field(sys, p, lambda);
  const Eigen::VectorXcd mu = field(0.5).eigenvalues();
  const JacobianBlocks b = evaluate_blocks(sys, u);
  Mat bfull = Mat::Zero(2, 2);
  bfull(1, 1) = b.b22(0, 0);
  // det(-lambda A0 - mu A + mu^2 B) = 0 for each spatial rate mu
  for (int i = 0; i < mu.size(); ++i) {
    const CMat q = -lambda * b.a0.cast<cplx>() - mu[i] * b.a.cast<cplx>() + mu[i] * mu[i] * bfull.cast<cplx>();
    CHECK(std::abs(q.determinant()) < 1e-9 * (1.0 + std::norm(mu[i])));
  }
}

TEST_CASE("hyperbolic block is reconstructed from the flux variables") {
  const SystemDef sys = make_isentropic_ns({2.0, 1.0, 0.3});
  const SteadyProfile p = iso_profile(sys, 0.6);
  const LinearizedField field(sys, p, cplx(0.7, 0.2));
  const double x = 0.4;
  FluxState z{CVec::Constant(1, cplx(0.3, -0.1)), CVec::Zero(2)};
  z.f << cplx(0.2, 0.5), cplx(-1.0, 0.1);
  const CVec v_i = field.reconstruct_v(x, z);
  const JacobianBlocks b = evaluate_blocks(sys, p.state(x));
  // first block of F = B V' + dB[V] U' - A V has no viscous part: F_I = -(A11 V_I + A12 V_II)
  const CVec fi = -(b.a11.cast<cplx>() * v_i + b.a12.cast<cplx>() * z.u_ii);
  CHECK(std::abs(fi[0] - z.f[0]) < 1e-10);
}

TEST_CASE("real lambda gives a real Evans function; conjugate symmetry") {
  for (const SystemDef& sys : {make_isentropic_ns({2.0, 1.0, 0.3}), make_full_gas({0.4, 1.0, 1.0})}) {
    const SteadyProfile p = sys.n == 2 ? iso_profile(sys, 0.6)
                                       : solve_steady(sys, Vec{{1.0, 0.5, 1.0}}, Vec{{0.6, 1.1}}, Vec::Zero(2));
    REQUIRE(p.converged);
    for (double lam : {0.0, 0.5, 2.0, 7.0}) {
      const EvansSample s = evans_eval(sys, p, cplx(lam, 0.0));
      CHECK(std::abs(std::sin(s.d.phase)) <= 1e-8);
      CHECK(s.sign_real != 0);
    }
    const EvansSample up = evans_eval(sys, p, cplx(0.5, 1.0));
    const EvansSample down = evans_eval(sys, p, cplx(0.5, -1.0));
    CHECK(std::abs(up.d.log_mag - down.d.log_mag) <= 1e-10 * (1.0 + std::abs(up.d.log_mag)));
    CHECK(phase_gap(up.d.phase, -down.d.phase) <= 1e-10);
  }
}

TEST_CASE("Abel invariance in the matching point") {
  const SystemDef sys = make_isentropic_ns({2.0, 1.0, 0.3});
  const SteadyProfile p = iso_profile(sys, 0.65);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (cplx lam : {cplx(0.0, 0.0), cplx(1.5, 0.0), cplx(0.3, 2.0)}) {
    const EvansSample ref = evans_eval(sys, p, lam);
    for (int k = 0; k < 5; ++k) {
      EvansOptions opt;
      opt.x_match = u(rng);
      const EvansSample s = evans_eval(sys, p, lam, opt);
      CHECK(std::abs(s.d.log_mag - ref.d.log_mag) <= 1e-6);
      CHECK(phase_gap(s.d.phase, ref.d.phase) <= 1e-6);
    }
  }
}

TEST_CASE("zero-frequency limit: sign identity and ratio") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 0.3});
  const ZsReport flat = evans_at_zero(iso, constant_profile(iso, Vec{{1.0, 0.5}}));
  CHECK(flat.sign_d0 == 1);
  CHECK(flat.sign_dphi == 1);
  CHECK(flat.signs_agree);
  double lo = INFINITY, hi = -INFINITY;
  for (double u1 : {0.52, 0.54, 0.56, 0.58, 0.6}) {
    const ZsReport z = evans_at_zero(iso, iso_profile(iso, u1));
    CHECK_FALSE(z.degenerate);
    CHECK(z.signs_agree);
    lo = std::min(lo, z.ratio);
    hi = std::max(hi, z.ratio);
  }
  CHECK((hi - lo) / hi <= 1e-4);
  const SystemDef rot = make_rotation_example();
  const ZsReport r = evans_at_zero(rot, constant_profile(rot, Vec::Zero(2)));
  CHECK(r.degenerate);
  CHECK(std::isnan(r.ratio));
}

TEST_CASE("stability index of a constant symmetrisable state") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 1.0});
  const StabilityVerdict v = stability_index(iso, constant_profile(iso, Vec{{1.0, 0.5}}), 50.0);
  CHECK(v.mu == 1);
  CHECK(v.real_axis_sign_changes == 0);
  CHECK(v.samples.size() >= 64);
  CHECK(v.mu == v.samples.front().sign_real * v.samples.back().sign_real);
  const EvansSample two = evans_eval(iso, constant_profile(iso, Vec{{1.0, 0.5}}), cplx(2.0, 0.0));
  CHECK(two.sign_real != 0);
  CHECK(std::isfinite(two.d.log_mag));
}

TEST_CASE("manufactured unstable transport has mu = -1") {
  // time-reversed viscous block: eigenvalues 1/4 + (k pi)^2 > 0, one of them below lambda_max
  const Mat a0{{1.0, 0.0}, {0.0, -1.0}};
  const SystemDef sys = make_linear(Mat{{1.0, 0.0}, {0.0, 1.0}}, Mat::Identity(1, 1), a0);
  const SteadyProfile p = constant_profile(sys, Vec::Zero(2));
  const StabilityVerdict v = stability_index(sys, p, 30.0);
  CHECK(v.mu == -1);
  CHECK(v.real_axis_sign_changes % 2 == 1);
}

TEST_CASE("winding numbers") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 1.0});
  const SteadyProfile p = constant_profile(iso, Vec{{1.0, 0.5}});
  const WindingResult w = winding_count(iso, p, Contour::half_disk(50.0));
  CHECK(w.winding == 0);
  // a circle around an unstable eigenvalue of the reversed transport system
  const Mat a0{{1.0, 0.0}, {0.0, -1.0}};
  const Mat a = Mat::Identity(2, 2);
  const Mat b22 = Mat::Identity(1, 1);
  const SystemDef un = make_linear(a, b22, a0);
  const auto eig = oracle::converged_eigenvalues(a0, a, b22, 1);
  cplx target(0.0, 0.0);
  bool found = false;
  for (cplx e : eig)
    if (e.real() > 0.0 && (!found || std::abs(e) < std::abs(target))) {
      target = e;
      found = true;
    }
  REQUIRE(found);
  const SteadyProfile q = constant_profile(un, Vec::Zero(2));
  const WindingResult once = winding_count(un, q, Contour::circle(target, 0.5));
  const WindingResult twice = winding_count(un, q, Contour::circle(target, 0.5, 2));
  CHECK(once.winding == 1);
  CHECK(twice.winding == 2);
}

TEST_CASE("contour zeros agree with collocation eigenvalues") {
  const Mat a{{1.0, 0.3}, {0.2, 0.5}};
  const Mat b22 = Mat::Identity(1, 1);
  const SystemDef sys = make_linear(a, b22);
  const auto eig = oracle::converged_eigenvalues(Mat::Identity(2, 2), a, b22, 1);
  const ContourZeros z = locate_zeros(sys, constant_profile(sys, Vec::Zero(2)), cplx(-7.0, 0.0), 7.0);
  const auto inside = oracle::inside_circle(eig, cplx(-7.0, 0.0), 7.0);
  REQUIRE(z.count == static_cast<int>(inside.size()));
  for (cplx w : z.zeros) {
    double best = INFINITY;
    for (cplx q : inside) best = std::min(best, std::abs(w - q));
    CHECK(best < 1e-3);
  }
}

TEST_CASE("decoupled system: collocation oracle reproduces -1/4 - (k pi)^2") {
  const auto eig = oracle::converged_eigenvalues(Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Identity(1, 1), 1);
  REQUIRE(!eig.empty());
  CHECK(std::abs(eig.front() - cplx(-0.25 - std::numbers::pi * std::numbers::pi, 0.0)) < 1e-8);
}

TEST_CASE("standing shock: sign and normalised magnitude") {
  ShockSpec spec;
  const StandingShockTable t = standing_shock_evans(spec, {2.0, 0.2});
  CHECK(t.rho_plus == doctest::Approx((std::sqrt(33.0) - 1.0) / 4.0).epsilon(1e-12));
  CHECK(t.rows[0].sign == 1);
  CHECK(t.one_sign);
  ShockSpec bad;
  bad.rho_minus = 0.9;
  CHECK_THROWS_AS(standing_shock_evans(bad, {0.1}), ValidationError);
  CHECK_THROWS_AS(standing_shock_evans(spec, {0.0}), ValidationError);
  ShockSpec mismatched;
  mismatched.rho_plus = 1.0;
  CHECK_THROWS_AS(standing_shock_evans(mismatched, {0.1}), ValidationError);
}
