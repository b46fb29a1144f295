#include <doctest.h>

#include "steadytube/system.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace steadytube;
using json = nlohmann::json;

namespace {

double rel_diff(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

std::vector<Vec> random_states(int n, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.3, 2.5), any(-1.5, 1.5);
  std::vector<Vec> out;
  for (int i = 0; i < count; ++i) {
    Vec u(n);
    u[0] = pos(rng);
    for (int k = 1; k < n; ++k) u[k] = any(rng);
    if (n == 3) u[2] = pos(rng);  // internal energy
    out.push_back(u);
  }
  return out;
}

}  // namespace

TEST_CASE("builtin systems from JSON") {
  const SystemDef iso = system_from_json(json{{"system", "isentropic_ns"}, {"gamma", 2.0}, {"a", 1.0}, {"nu", 0.01}});
  CHECK(iso.n == 2);
  CHECK(iso.r == 1);
  CHECK(iso.b22(Vec{{1.0, 1.0}})(0, 0) == doctest::Approx(0.01));
  const SystemDef lin = system_from_json(json{{"system", "linear"}, {"A", {{1, 0}, {0, 1}}}, {"B22", {{1}}}, {"r", 1}});
  CHECK(lin.n == 2);
  CHECK(lin.r == 1);
  CHECK(lin.jac_f(Vec::Zero(2)).isApprox(Mat::Identity(2, 2)));
  const SystemDef full = builtin("full_gas", json{{"Gamma", 0.4}, {"alpha", 1.0}, {"nu", 1.0}});
  CHECK(full.n == 3);
  CHECK(full.r == 1);
}

TEST_CASE("invalid system configs are rejected") {
  CHECK_THROWS_AS(builtin("isentropic_ns", json{{"gamma", 1.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("isentropic_ns", json{{"a", -1.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("isentropic_ns", json{{"nu", 0.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("isentropic_ns", json{{"viscosity", 1.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("full_gas", json{{"alpha", 0.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("mhd", json::object()), ValidationError);
  CHECK_THROWS_AS(system_from_json(json{{"gamma", 2.0}}), ValidationError);
  CHECK_THROWS_AS(builtin("linear", json{{"A", {{1, 0}, {0, 1}}}, {"B22", {{1}}}, {"r", 0}}), ValidationError);
}

TEST_CASE("full gas steady reduction matches the u-e profile equations") {
  const double G = 0.4, alpha = 1.3, nu = 0.7;
  const SystemDef sys = make_full_gas({G, alpha, nu});
  const Vec u0{{1.0, 1.0, 1.0}};
  const Vec c2{{0.3, -0.2}};  // (u'(0), e'(0))
  const double u = 1.2, e = 0.9;
  const Vec state{{1.0 / u, u, e}};
  const Vec rhs = sys.f(state).tail(2) - sys.f(u0).tail(2) + sys.b22(u0) * c2;
  const Vec d = sys.b22(state).lu().solve(rhs);
  const double c1 = alpha * c2[0] - 1.0 - G;
  const double cc2 = nu * c2[1] + alpha * c2[0] - 1.0 - 0.5 - G;
  CHECK(std::abs(alpha * d[0] - (c1 + u + G * e / u)) <= 1e-12);
  CHECK(std::abs(nu * d[1] - (cc2 - c1 * u - 0.5 * u * u + e)) <= 1e-12);
}

TEST_CASE("analytic Jacobians agree with finite differences") {
  const std::vector<SystemDef> systems = {make_isentropic_ns({2.0, 1.0, 0.01}), make_isentropic_ns({1.4, 2.0, 1.0}),
                                          make_full_gas({0.4, 1.0, 1.0}),
                                          make_linear(Mat{{1.0, 0.3}, {0.2, 0.5}}, Mat::Identity(1, 1))};
  for (const auto& sys : systems) {
    for (const Vec& u : random_states(sys.n, 100, 11)) {
      CHECK(rel_diff(sys.jac_f(u), fd_jacobian(sys.f, u)) < 1e-6);
      CHECK(rel_diff(sys.jac_f0(u), fd_jacobian(sys.f0, u)) < 1e-6);
    }
  }
}

TEST_CASE("reduced matrix: block formula equals the symmetrised factorisation") {
  const std::vector<SystemDef> systems = {make_isentropic_ns({2.0, 1.0, 0.3}), make_full_gas({0.4, 1.0, 2.0})};
  for (const auto& sys : systems) {
    REQUIRE(sys.symmetrizer);
    for (const Vec& u : random_states(sys.n, 20, 5)) {
      const JacobianBlocks b = evaluate_blocks(sys, u);
      if (!b.a11_invertible) continue;
      const Mat direct = reduced_matrix(b);
      const Mat sym = reduced_matrix_symmetrized(b, sys.symmetrizer(u));
      CHECK(rel_diff(sym, direct) < 1e-10);
    }
  }
}

TEST_CASE("rotation example fails the spectral condition at 2 pi i") {
  const SystemDef sys = make_rotation_example();
  const AssumptionReport rep = check_assumptions(sys, {Vec::Zero(sys.n)});
  CHECK(rep.speccond.verdict == Verdict::fail);
  REQUIRE(rep.speccond.witness);
  const cplx w = rep.speccond.witness->eigenvalue;
  CHECK(std::abs(std::abs(w.imag()) - 2.0 * std::numbers::pi) < 1e-8);
  CHECK(std::abs(w.real()) < 1e-8);
}

TEST_CASE("gas systems satisfy the structural assumptions at admissible states") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 0.1});
  const AssumptionReport r = check_assumptions(iso, {Vec{{1.0, 0.5}}, Vec{{0.7, 2.0}}});
  CHECK(r.h1.verdict == Verdict::pass);
  CHECK(r.h2.verdict == Verdict::pass);
  CHECK(r.h3.verdict == Verdict::pass);
  CHECK(r.fsymm.verdict == Verdict::pass);
  const SystemDef full = make_full_gas({0.4, 1.0, 1.0});
  const AssumptionReport f = check_assumptions(full, {Vec{{1.0, 0.5, 1.0}}});
  CHECK(f.h1.verdict == Verdict::pass);
  CHECK(f.h3.verdict == Verdict::pass);
}

TEST_CASE("assumption checks are deterministic") {
  const SystemDef sys = make_full_gas({0.4, 1.0, 1.0});
  const auto samples = random_states(3, 10, 3);
  CHECK(to_json(check_assumptions(sys, samples)).dump() == to_json(check_assumptions(sys, samples)).dump());
}

TEST_CASE("states outside the admissible set raise DomainError") {
  const SystemDef iso = make_isentropic_ns({2.0, 1.0, 1.0});
  CHECK_FALSE(iso.in_domain(Vec{{-1.0, 1.0}}));
  CHECK_THROWS_AS(iso.require_domain(Vec{{-1.0, 1.0}}), DomainError);
}
