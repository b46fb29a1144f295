#pragma once

#include "steadytube/ode.hpp"
#include "steadytube/system.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace steadytube {

struct ShootOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
};

struct ShootingConstants {
  Vec c1;  // conserved hyperbolic flux level f_I(U0)
  Vec c2;  // U_II'(0) in the normalisation B22(U)U_II' = f_II(U) - f_II(U0) + B22(U0) c2
};

// Integrated trajectory of the profile ODE with the hyperbolic part reconstructed.
struct Shot {
  ode::Trajectory<double> ii;    // U_II
  std::vector<Vec> states;        // full U at the trajectory nodes
  ShootingConstants constants;
  ode::Status status() const { return ii.status(); }
  bool reached_end() const { return ii.completed(); }
  double x_stop() const { return ii.x_stop(); }
};

// A computed steady solution. state/derivative are dense evaluators on [0,1].
struct SteadyProfile {
  Vec u0, u1ii;
  ShootingConstants constants;
  std::vector<double> grid;
  std::vector<Vec> states;
  std::function<Vec(double)> state;
  std::function<Vec(double)> derivative;
  double residual = 0.0;  // |Phi|
  Mat dphi;
  double det_dphi = 0.0;
  bool nondegenerate = false;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> notes;
};

Vec resolve_hyperbolic(const SystemDef& sys, const Vec& u_ii, const Vec& fi_target, const Vec& guess);

Shot shoot(const SystemDef& sys, const Vec& u0, const Vec& c2, const ShootOptions& opt = {});

// U_II(1) - U1II, or nullopt when the shot does not reach x = 1.
std::optional<Vec> phi(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Vec& c2,
                       const ShootOptions& opt = {});

Mat jacobian_dphi(const SystemDef& sys, const Vec& u0, const Vec& c2, const ShootOptions& opt = {});

struct SolveOptions {
  ShootOptions shoot{1e-11, 1e-13};
  ShootOptions jacobian{1e-12, 1e-14};  // FD probes need tighter integration
  int max_iterations = 100;
  double degeneracy = 1e-8;
};

SteadyProfile solve_steady(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Vec& c2_guess,
                           const SolveOptions& opt = {});

// Dense profile wrapper around a shot (no Newton solve; residual against u1ii).
SteadyProfile profile_from_shot(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Shot& shot);

// Constant profile U = U0 with c2 = 0 and the closed-form dPhi.
SteadyProfile constant_profile(const SystemDef& sys, const Vec& u0);

// integral_0^1 exp(s M) ds, through the split of M into nilpotent and invertible parts
Mat phi1(const Mat& m);

struct LinearClosedForm {
  SteadyProfile profile;
  Vec c2;
  Vec c_tilde;
  Mat reduced;  // Ã
};

LinearClosedForm linear_closed_form(const Mat& a, const Mat& b22, const Vec& u0, const Vec& u1ii);

struct EntropyDiagnostic {
  double boundary_term = 0.0;
  double min_integrand = 0.0;
  double dissipation = 0.0;  // integral of the integrand; equals -boundary_term
};

EntropyDiagnostic entropy_dissipation(const SystemDef& sys, const SteadyProfile& profile);

struct DegreeOptions {
  int n_starts = 64;
  std::uint64_t seed = 0;
  int jobs = 1;
  double dedup_radius = 1e-6;
  double degeneracy = 1e-8;
  SolveOptions solve{};
};

struct DegreeRoot {
  Vec c2;
  double det_dphi = 0.0;
  int sign = 0;
  bool degenerate = false;
  int hits = 0;
};

struct DegreeResult {
  int degree = 0;
  std::vector<DegreeRoot> roots;
  int failed_starts = 0;       // Phi undefined at the start or Newton failed
  int outside_box = 0;         // converged to a root outside the box
  std::vector<std::string> warnings;
};

DegreeResult brouwer_degree(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Vec& box_lo,
                            const Vec& box_hi, const DegreeOptions& opt = {});

// Halton points in [0,1)^d with a seeded Cranley–Patterson shift.
std::vector<Vec> halton_points(int count, int dim, std::uint64_t seed);

}  // namespace steadytube
