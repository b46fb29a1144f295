#pragma once

#include "steadytube/steady.hpp"
#include "steadytube/system.hpp"
#include "steadytube/types.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace steadytube {

// p(rho) = a rho^gamma
struct PressureLaw {
  double a = 1.0;
  double gamma = 2.0;
  double p(double rho) const;
  double dp(double rho) const;
  double d2p(double rho) const;
  // k-th derivative
  double dk(int k, double rho) const;
};

// psi(rho) = m^2/rho + p(rho); the isentropic profile ODE is m nu rho' = rho^2 (b - psi(rho)).
struct IsentropicGas {
  double m = 1.0;
  PressureLaw pressure;
  double psi(double rho) const;
  double dpsi(double rho) const;
  double d2psi(double rho) const;
  double dkpsi(int k, double rho) const;
  // psi(anchor) - psi(anchor + h) without cancellation
  double gdiff(double anchor, double h) const;
  double sound_speed(double rho) const;
  double rate(double rho) const;  // rho^2 |psi'(rho)| / m
};

struct GasBoundaryData {
  double rho0 = 1.0;
  double u0 = 1.0;
  double u1 = 1.0;
  bool u1_conjugate = false;  // rho1 is the exact conjugate of rho0; u1 is derived
  PressureLaw pressure;
  double nu = 0.01;

  double m() const { return rho0 * u0; }
  IsentropicGas gas() const { return {m(), pressure}; }
  double rho1() const;
  void validate() const;
};

// Keys: rho0, u0, u1 (number or "conjugate"), gamma, a, nu.
GasBoundaryData gas_from_json(const nlohmann::json& block);

double sonic_state(double m, const PressureLaw& pressure);
double conjugate_state(double rho, double m, const PressureLaw& pressure);

enum class ConfigKind {
  Constant,
  LeftBL_expansive,
  RightBL_expansive,
  LeftBL_compressive,
  RightBL_compressive,
  InteriorShock,
  DoubleCharacteristicBL
};
std::string to_string(ConfigKind k);

struct LeftBoundaryCondition {
  enum class Kind { FullDirichlet, Transcharacteristic };
  Kind kind = Kind::FullDirichlet;
  double u0 = 0.0, c0 = 0.0;
  std::string condition;
};

struct RightBoundaryCondition {
  enum class Kind { SingleOutflow, RangeCondition };
  Kind kind = Kind::SingleOutflow;
  double u1 = 0.0, c1 = 0.0;
  std::optional<double> m1, rho1_dagger, u1_dagger;
  std::string condition;
};

struct InviscidConfig {
  ConfigKind kind = ConfigKind::Constant;
  double rho0 = 0.0, rho1 = 0.0;
  std::optional<double> interior_state;
  double rho_star = 0.0;
  double psi_star = 0.0;
  double b = 0.0;
  std::optional<std::pair<double, double>> rest_points;
  std::pair<double, double> rates{0.0, 0.0};  // (r0, r1) at rho0, rho1
  std::optional<double> shock_location;
  double psi_mismatch = 0.0;  // (psi(rho0) - psi(rho1)) / psi(rho0)
  LeftBoundaryCondition left_bc;
  RightBoundaryCondition right_bc;
};

struct ClassifyOptions {
  double shock_tol = 1e-9;  // relative tolerance for psi(rho0) = psi(rho1)
};

InviscidConfig classify_inviscid(const GasBoundaryData& data, const ClassifyOptions& opt = {});
nlohmann::ordered_json to_json(const InviscidConfig& c);

// Pointwise inviscid limit density (shock placed at r1/(r0+r1)).
double limit_density(const InviscidConfig& c, double x);

// Viscous isentropic profile, stored as the inverse map x(rho) on a table in
// log-distance-to-anchor coordinates.
class IsentropicProfile {
 public:
  struct Piece {
    double anchor = 0.0;
    double dir = 1.0;        // sigma = anchor + dir * exp(tau)
    double log_level = 0.0;  // log(|b - psi(anchor)|)
    double tau_min = 0.0;            // lower integration limit; the table starts at tau_lo
    double tau_lo = 0.0, dtau = 0.0;
    std::vector<double> cum;  // integral of dx/dtau from tau_min to each node
    double x_origin = 0.0;    // x at tau_lo (forward) or at tau_hi (backward)
    bool forward = true;      // x increases with tau
    double tau_hi() const { return tau_lo + dtau * static_cast<double>(cum.size() - 1); }
  };

  IsentropicGas gas;
  double nu = 0.0;
  double b_ref = 0.0;
  double log_offset = 0.0;  // b = b_ref + sgn * exp(log_offset); -inf for b = b_ref
  double sgn = 1.0;
  double anchor_ref = 0.0;  // psi(anchor_ref) = b_ref
  double x_scale = 1.0;     // 1 / total travel time
  double rho_left = 0.0, rho_right = 0.0;
  std::vector<Piece> pieces;
  std::vector<double> xs, rhos, drhos;  // merged table in increasing x

  double b() const;
  double operator()(double x) const;
  double derivative(double x) const;
  // x at which the profile takes the value rho (rho strictly between the end values)
  double x_of_rho(double rho) const;
  // location of max |rho'|
  double steepest_point() const;
  double rho_prime(double rho) const;
  double dx_dtau(const Piece& p, double tau) const;
};

struct IsentropicSolveOptions {
  double node_spacing = 0.02;  // in tau
};

IsentropicProfile solve_isentropic_viscous(const GasBoundaryData& data, double nu,
                                           const IsentropicSolveOptions& opt = {});

// Whole-line viscous shock rho_- -> rho_+ (psi(rho_-) = psi(rho_+)) rescaled by eps onto [0,1],
// centred at x = 1/2 where rho = (rho_- + rho_+)/2.
IsentropicProfile whole_line_shock(const IsentropicGas& gas, double rho_minus, double rho_plus, double eps,
                                   const IsentropicSolveOptions& opt = {});

// SteadyProfile view (U = (rho, u)) for the isentropic system.
SteadyProfile as_steady_profile(const IsentropicProfile& p);

// L^p distance on [0,1] between a viscous profile and a pointwise target.
double lp_distance(const IsentropicProfile& p, const std::function<double(double)>& target, double pnorm,
                   const std::vector<double>& breaks = {});

struct ProfileShape {
  int monotone = 0;  // +1 increasing, -1 decreasing, 0 neither / constant
  double plateau_left = 0.0, plateau_right = 0.0;
  double mid_deviation = 0.0;  // |rho(1/2) - rho*| / |rho1 - rho0|
  std::string label;           // constant, left_layer, right_layer, interior_shock, double_layer, unclassified
};

ProfileShape classify_shape(const IsentropicProfile& p, double rho_star);
std::string expected_shape(ConfigKind k);

struct Fit {
  double slope = 0.0;
  double intercept = 0.0;
  bool accepted = false;
};
Fit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, bool require_monotone = true);

struct ConvergenceRow {
  double nu = 0.0;
  std::vector<double> errors;  // one per p
  double log_offset = 0.0;
  std::optional<double> shock_location;
  std::optional<double> nu_log_ratio;  // L1 error / (nu log(1/nu))
};

struct ConvergenceTable {
  InviscidConfig config;
  std::vector<double> p_list;
  std::vector<ConvergenceRow> rows;
  std::vector<Fit> fits;  // one per p
  std::optional<Fit> shock_fit;
  std::vector<std::string> warnings;
};

ConvergenceTable convergence_study(const GasBoundaryData& data, const std::vector<double>& nu_list,
                                   const std::vector<double>& p_list, int jobs = 1,
                                   const ClassifyOptions& copt = {});

// Full-gas large-viscosity regime
struct FullGasLimitParams {
  double rho0 = 1.0;
  double u0 = 1.0, e0 = 1.0, u1 = 2.0, e1 = 1.0;
  double Gamma = 0.4;
  double ratio = 1.0;    // nu / alpha, held fixed in sweeps
  double epsilon = 0.01;  // E_eps = {eps < u, e < 1/eps}
  void validate() const;
};

FullGasLimitParams full_gas_limit_from_json(const nlohmann::json& block);

struct LimitProfile {
  double u0, e0, u1, e1, ratio;
  double u(double x) const;
  double e(double x) const;
  double du(double x) const;
  double de(double x) const;
};
LimitProfile limit_profile(const FullGasLimitParams& p);

struct LargeViscRow {
  double alpha = 0.0, nu = 0.0;
  double h1_error = 0.0;
  double boundary_mismatch = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string note;
};

struct LargeViscTable {
  std::vector<LargeViscRow> rows;
  std::optional<Fit> fit;
  std::vector<std::string> warnings;
};

LargeViscTable full_gas_large_visc(const FullGasLimitParams& p, const std::vector<double>& alpha_list,
                                   int jobs = 1);

// U_II' = B22(U)^{-1} c_tilde with the hyperbolic part from f_I(U) = f_I(U0).
Shot formal_large_visc_solve(const SystemDef& sys, const Vec& u0, const Vec& c_tilde, const ShootOptions& opt = {});

struct ConeDomain {
  enum class Kind { box, ball };
  Kind kind = Kind::box;
  Vec lo, hi;       // box
  Vec center;       // ball
  double radius = 0.0;
  bool contains(const Vec& p) const;
};

struct ConeResult {
  double theta = 0.0;
  double length = 0.0;
  bool feasible = false;
  bool degenerate = false;
  std::optional<Vec> violating_point;
};

ConeResult cone_feasibility(double beta0, double beta1, const Vec& u0ii, const Vec& u1ii, const ConeDomain& domain);

}  // namespace steadytube
