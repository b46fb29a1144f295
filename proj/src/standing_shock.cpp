#include "steadytube/evans.hpp"
#include "steadytube/limits.hpp"
#include "steadytube/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace steadytube {

StandingShockTable standing_shock_evans(const ShockSpec& spec, const std::vector<double>& epsilons, int jobs,
                                        const EvansOptions& opt) {
  if (epsilons.empty()) throw ValidationError("standing_shock: epsilon list is empty");
  for (double e : epsilons)
    if (!(e > 0.0)) throw ValidationError("standing_shock: epsilons must be positive");
  const PressureLaw pressure{spec.a, spec.gamma};
  const IsentropicGas gas{spec.m, pressure};
  if (!(spec.m > 0.0) || !(spec.a > 0.0) || !(spec.gamma > 1.0))
    throw ValidationError("standing_shock: need m > 0, a > 0, gamma > 1");
  const double rs = sonic_state(spec.m, pressure);
  if (!(spec.rho_minus > 0.0) || !(spec.rho_minus < rs))
    throw ValidationError("standing_shock: rho_minus must lie below the sonic state");
  StandingShockTable t;
  t.rho_minus = spec.rho_minus;
  t.rho_plus = spec.rho_plus ? *spec.rho_plus : conjugate_state(spec.rho_minus, spec.m, pressure);
  t.rows.resize(epsilons.size());
  parallel_for(epsilons.size(), jobs, [&](std::size_t i) {
    const double eps = epsilons[i];
    const IsentropicProfile prof = whole_line_shock(gas, t.rho_minus, t.rho_plus, eps);
    const SteadyProfile sp = as_steady_profile(prof);
    const SystemDef sys = make_isentropic_ns({spec.gamma, spec.a, eps});
    StandingShockRow row;
    row.epsilon = eps;
    const EvansSample s = evans_eval(sys, sp, {0.0, 0.0}, opt);
    row.d0 = s.d;
    row.transversality = s.transversality;
    row.warnings = s.warnings;
    const Mat b22 = sys.b22(sp.states.front());
    row.d0_normalized = s.d;
    row.d0_normalized.log_mag -= std::log(std::abs(b22.determinant()));
    row.sign = s.sign_real;
    row.trace_gap = std::abs(prof(0.0) - t.rho_minus) / t.rho_minus;
    if (row.trace_gap < 1e-13 || std::abs(prof(1.0) - t.rho_plus) / t.rho_plus < 1e-13)
      row.warnings.push_back("trace data numerically at the rest points; D(0) is ill-conditioned");
    t.rows[i] = std::move(row);
  });
  const double ref = t.rows.front().d0_normalized.log_mag;
  t.one_sign = true;
  t.min_ratio = std::numeric_limits<double>::infinity();
  for (auto& r : t.rows) {
    r.ratio_to_first = std::exp(r.d0_normalized.log_mag - ref);
    t.min_ratio = std::min(t.min_ratio, r.ratio_to_first);
    if (r.sign != t.rows.front().sign || r.sign == 0) t.one_sign = false;
  }
  return t;
}

}  // namespace steadytube
