#pragma once

#include "steadytube/ode.hpp"
#include "steadytube/scaled_complex.hpp"
#include "steadytube/steady.hpp"
#include "steadytube/system.hpp"

#include <optional>
#include <string>
#include <vector>

namespace steadytube {

// Flux-variable state (V_II, F), F = B V' + dB[V] Û' - A V, dimension 2n - r.
struct FluxState {
  CVec u_ii;
  CVec f;
};

// x -> M(x) with Z' = M(x) Z, Z = (V_II, F).
class LinearizedField {
 public:
  LinearizedField(const SystemDef& sys, const SteadyProfile& profile, cplx lambda);
  CMat operator()(double x) const;
  int dimension() const { return 2 * sys_.n - sys_.r; }
  cplx lambda() const { return lambda_; }
  // V_I = -A11^{-1}(F_I + A12 V_II)
  CVec reconstruct_v(double x, const FluxState& z) const;

  struct RealParts {
    Mat m11, m12, k21, k22;  // M = [[m11, m12], [lambda*k21, lambda*k22]]
  };
  RealParts parts(double x) const;

 private:
  const SystemDef& sys_;
  const SteadyProfile& profile_;
  cplx lambda_;
};

struct EvansOptions {
  double x_match = 0.5;
  ode::Options ode{1e-10, 1e-12};
};

struct EvansSample {
  cplx lambda{0.0, 0.0};
  ScaledComplex d;
  int sign_real = 0;            // for real lambda
  double transversality = 0.0;  // |det [Q_L, Q_R]| at the matching point, in [0, 1]
  cplx abel{0.0, 0.0};          // integral of tr M from x_match to 1
  std::vector<std::string> warnings;
};

EvansSample evans_eval(const SystemDef& sys, const SteadyProfile& profile, cplx lambda, const EvansOptions& opt = {});

// integral of tr M(x) over [a, b] at the given lambda
cplx trace_integral(const SystemDef& sys, const SteadyProfile& profile, cplx lambda, double a, double b);

struct ZsReport {
  ScaledComplex d0;
  double det_dphi = 0.0;
  int sign_d0 = 0;
  int sign_dphi = 0;
  bool degenerate = false;
  bool signs_agree = false;
  double ratio = 0.0;  // D(0) / det dPhi (NaN when degenerate)
};

ZsReport evans_at_zero(const SystemDef& sys, const SteadyProfile& profile, const EvansOptions& opt = {});

struct StabilityVerdict {
  int mu = 0;  // 0: indeterminate
  ScaledComplex d_zero;
  double lambda_max_used = 0.0;
  int real_axis_sign_changes = 0;
  std::vector<double> sign_change_locations;
  std::vector<EvansSample> samples;
  std::vector<std::string> warnings;
};

double default_lambda_max(const SystemDef& sys, const SteadyProfile& profile);

StabilityVerdict stability_index(const SystemDef& sys, const SteadyProfile& profile,
                                 std::optional<double> lambda_max = std::nullopt, int jobs = 1,
                                 const EvansOptions& opt = {});

struct Contour {
  enum class Kind { half_disk, circle };
  Kind kind = Kind::half_disk;
  cplx center{0.0, 0.0};
  double radius = 1.0;
  int turns = 1;

  static Contour half_disk(double r) { return {Kind::half_disk, {0.0, 0.0}, r, 1}; }
  static Contour circle(cplx c, double r, int turns = 1) { return {Kind::circle, c, r, turns}; }
};

struct WindingResult {
  int winding = 0;
  double total_phase = 0.0;  // continuous lift over the closed contour
  double min_transversality = 0.0;
  std::vector<EvansSample> samples;  // in contour order
};

WindingResult winding_count(const SystemDef& sys, const SteadyProfile& profile, const Contour& contour, int jobs = 1,
                            const EvansOptions& opt = {});

struct ContourZeros {
  int count = 0;
  std::vector<cplx> zeros;
};

// Zeros inside a circle from argument-principle power sums (trapezoid rule).
ContourZeros locate_zeros(const SystemDef& sys, const SteadyProfile& profile, cplx center, double radius,
                          int samples = 128, int jobs = 1, const EvansOptions& opt = {});

// Standing viscous shock rho_- -> rho_+ of the isentropic system, rescaled to width eps on [0,1].
struct ShockSpec {
  double m = 1.0;
  double gamma = 2.0;
  double a = 1.0;
  double rho_minus = 0.5;
  std::optional<double> rho_plus;  // defaults to the conjugate of rho_minus
};

struct StandingShockRow {
  double epsilon = 0.0;
  ScaledComplex d0;             // D(0) with the stated boundary bases
  ScaledComplex d0_normalized;  // D(0) / det B22(U(0)): left basis scaled to unit flux columns
  int sign = 0;
  double transversality = 0.0;
  double ratio_to_first = 0.0;         // |normalized| / |normalized of the first row|
  double trace_gap = 0.0;              // |rho(0) - rho_-| / rho_-
  std::vector<std::string> warnings;
};

struct StandingShockTable {
  double rho_minus = 0.0, rho_plus = 0.0;
  std::vector<StandingShockRow> rows;
  bool one_sign = false;
  double min_ratio = 0.0;
};

StandingShockTable standing_shock_evans(const ShockSpec& spec, const std::vector<double>& epsilons, int jobs = 1,
                                        const EvansOptions& opt = {});

}  // namespace steadytube
