#include "steadytube/limits.hpp"

#include "steadytube/config.hpp"
#include "steadytube/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

namespace steadytube {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kVisibleCut = 1e-17;  // relative distance below which sigma == anchor in double
constexpr double kTail = 40.0;        // neglected tail exp(-40) in tau

using GL7 = boost::math::quadrature::gauss<double, 7>;
using GK61 = boost::math::quadrature::gauss_kronrod<double, 61>;

double logaddexp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

template <class F>
double solve_bracketed(F f, double a, double b, double fa, double fb) {
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

// ---------------------------------------------------------------- pressure / psi

double PressureLaw::p(double rho) const { return a * std::pow(rho, gamma); }
double PressureLaw::dp(double rho) const { return a * gamma * std::pow(rho, gamma - 1.0); }
double PressureLaw::d2p(double rho) const { return a * gamma * (gamma - 1.0) * std::pow(rho, gamma - 2.0); }
double PressureLaw::dk(int k, double rho) const {
  double c = a;
  for (int j = 0; j < k; ++j) c *= gamma - j;
  return c * std::pow(rho, gamma - k);
}

double IsentropicGas::psi(double rho) const { return m * m / rho + pressure.p(rho); }
double IsentropicGas::dpsi(double rho) const { return -m * m / (rho * rho) + pressure.dp(rho); }
double IsentropicGas::d2psi(double rho) const { return 2.0 * m * m / (rho * rho * rho) + pressure.d2p(rho); }
double IsentropicGas::dkpsi(int k, double rho) const {
  double fact = 1.0;
  for (int j = 2; j <= k; ++j) fact *= j;
  const double inv = (k % 2 == 0 ? 1.0 : -1.0) * fact * m * m / std::pow(rho, k + 1);
  return inv + pressure.dk(k, rho);
}

double IsentropicGas::gdiff(double anchor, double h) const {
  if (h == 0.0) return 0.0;
  const double q = h / anchor;
  if (std::abs(q) < 1e-3) {
    double sum = 0.0, term = 1.0;
    for (int k = 1; k <= 8; ++k) {
      term *= h / k;
      sum -= dkpsi(k, anchor) * term;
    }
    return sum;
  }
  return m * m * h / (anchor * (anchor + h)) -
         pressure.a * std::pow(anchor, pressure.gamma) * std::expm1(pressure.gamma * std::log1p(q));
}

double IsentropicGas::sound_speed(double rho) const { return std::sqrt(pressure.dp(rho)); }
double IsentropicGas::rate(double rho) const { return rho * rho * std::abs(dpsi(rho)) / m; }

// ---------------------------------------------------------------- boundary data

double GasBoundaryData::rho1() const {
  if (u1_conjugate) return conjugate_state(rho0, m(), pressure);
  return m() / u1;
}

void GasBoundaryData::validate() const {
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) throw ValidationError("gas: rho0 must be positive");
  if (!(u0 > 0.0) || !std::isfinite(u0)) throw ValidationError("gas: u0 must be positive");
  if (!u1_conjugate && (!(u1 > 0.0) || !std::isfinite(u1))) throw ValidationError("gas: u1 must be positive");
  if (!(pressure.a > 0.0)) throw ValidationError("gas: pressure coefficient a must be positive");
  if (!(pressure.gamma > 1.0)) throw ValidationError("gas: gamma must exceed 1");
  if (!(nu > 0.0)) throw ValidationError("gas: nu must be positive");
}

GasBoundaryData gas_from_json(const nlohmann::json& block) {
  const std::string ctx = "gas";
  config::require_object(block, ctx);
  config::allow_keys(block, {"rho0", "u0", "u1", "gamma", "a", "nu"}, ctx);
  GasBoundaryData d;
  d.rho0 = config::number(block, "rho0", ctx);
  d.u0 = config::number(block, "u0", ctx);
  if (!block.contains("u1")) throw ValidationError("gas: missing key 'u1'");
  const auto& u1 = block.at("u1");
  if (u1.is_string()) {
    if (u1.get<std::string>() != "conjugate") throw ValidationError("gas: u1 must be a number or \"conjugate\"");
    d.u1_conjugate = true;
  } else {
    d.u1 = config::number(block, "u1", ctx);
  }
  d.pressure.gamma = config::number_or(block, "gamma", d.pressure.gamma, ctx);
  d.pressure.a = config::number_or(block, "a", d.pressure.a, ctx);
  d.nu = config::number_or(block, "nu", d.nu, ctx);
  d.validate();
  if (d.u1_conjugate) {
    try {
      d.u1 = d.m() / d.rho1();
    } catch (const DomainError& e) {
      throw ValidationError(std::string("gas: ") + e.what());
    }
  }
  return d;
}

double sonic_state(double m, const PressureLaw& pressure) {
  if (!(m > 0.0)) throw ValidationError("sonic_state: m must be positive");
  if (!(pressure.gamma > 1.0) || !(pressure.a > 0.0)) throw ValidationError("sonic_state: need gamma > 1, a > 0");
  // m^2/rho^2 - p'(rho) is decreasing; bisect in log(rho)
  auto g = [&](double lr) {
    const double rho = std::exp(lr);
    return m * m / (rho * rho) - pressure.dp(rho);
  };
  double lo = -1.0, hi = 1.0;
  while (g(lo) <= 0.0) lo *= 2.0;
  while (g(hi) >= 0.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

double conjugate_state(double rho, double m, const PressureLaw& pressure) {
  if (!(rho > 0.0)) throw ValidationError("conjugate_state: rho must be positive");
  const double rs = sonic_state(m, pressure);
  if (std::abs(rho - rs) <= 1e-14 * rs) throw DomainError("conjugate_state: rho is the sonic state");
  const IsentropicGas gas{m, pressure};
  // psi(s) - psi(rho)
  auto g = [&](double s) { return -gas.gdiff(rho, s - rho); };
  double a = rs, b;
  if (rho < rs) {
    b = 2.0 * rs;
    while (g(b) <= 0.0) b *= 2.0;
  } else {
    b = 0.5 * rs;
    while (g(b) <= 0.0) b *= 0.5;
    std::swap(a, b);
  }
  return solve_bracketed(g, a, b, g(a), g(b));
}

// ---------------------------------------------------------------- classifier

std::string to_string(ConfigKind k) {
  switch (k) {
    case ConfigKind::Constant: return "Constant";
    case ConfigKind::LeftBL_expansive: return "LeftBL_expansive";
    case ConfigKind::RightBL_expansive: return "RightBL_expansive";
    case ConfigKind::LeftBL_compressive: return "LeftBL_compressive";
    case ConfigKind::RightBL_compressive: return "RightBL_compressive";
    case ConfigKind::InteriorShock: return "InteriorShock";
    case ConfigKind::DoubleCharacteristicBL: return "DoubleCharacteristicBL";
  }
  return "?";
}

InviscidConfig classify_inviscid(const GasBoundaryData& data, const ClassifyOptions& opt) {
  data.validate();
  InviscidConfig c;
  const IsentropicGas gas = data.gas();
  const double m = gas.m;
  const double r0 = data.rho0, r1 = data.rho1();
  c.rho0 = r0;
  c.rho1 = r1;
  c.rho_star = sonic_state(m, data.pressure);
  c.psi_star = gas.psi(c.rho_star);
  c.rates = {gas.rate(r0), gas.rate(r1)};
  const double psi0 = gas.psi(r0);
  c.psi_mismatch = data.u1_conjugate ? 0.0 : gas.gdiff(r0, r1 - r0) / psi0;
  const double rs = c.rho_star;

  auto set_interior = [&](ConfigKind k, double rho) {
    c.kind = k;
    c.interior_state = rho;
    c.b = gas.psi(rho);
  };
  if (r0 == r1) {
    set_interior(ConfigKind::Constant, r0);
  } else if (r0 > r1) {
    if (r1 > rs) set_interior(ConfigKind::LeftBL_expansive, r1);
    else if (r0 < rs) set_interior(ConfigKind::RightBL_expansive, r0);
    else {
      c.kind = ConfigKind::DoubleCharacteristicBL;
      c.b = c.psi_star;
    }
  } else {
    if (r1 < rs) set_interior(ConfigKind::RightBL_compressive, r0);
    else if (r0 > rs) set_interior(ConfigKind::LeftBL_compressive, r1);
    else if (std::abs(c.psi_mismatch) <= opt.shock_tol) {
      c.kind = ConfigKind::InteriorShock;
      c.b = psi0;
      c.rest_points = std::make_pair(r0, r1);
      c.shock_location = c.rates.second / (c.rates.first + c.rates.second);
    } else if (c.psi_mismatch > 0.0) {
      set_interior(ConfigKind::RightBL_compressive, r0);
    } else {
      set_interior(ConfigKind::LeftBL_compressive, r1);
    }
  }
  if (!c.rest_points && c.interior_state && std::abs(*c.interior_state - rs) > 1e-14 * rs) {
    const double s = *c.interior_state;
    const double t = conjugate_state(s, m, data.pressure);
    c.rest_points = std::make_pair(std::min(s, t), std::max(s, t));
  }

  c.left_bc.u0 = data.u0;
  c.left_bc.c0 = gas.sound_speed(r0);
  if (data.u0 <= c.left_bc.c0) {
    c.left_bc.kind = LeftBoundaryCondition::Kind::FullDirichlet;
    c.left_bc.condition = "rho(0) = rho0, u(0) = u0";
  } else {
    c.left_bc.kind = LeftBoundaryCondition::Kind::Transcharacteristic;
    c.left_bc.condition = "one-sided: rho(0) = rho0 or rho(0) connected to rho0 by a boundary layer";
  }
  const double u1 = m / r1;
  c.right_bc.u1 = u1;
  c.right_bc.c1 = gas.sound_speed(r1);
  if (u1 <= c.right_bc.c1) {
    c.right_bc.kind = RightBoundaryCondition::Kind::SingleOutflow;
    c.right_bc.condition = "u(1) = u1";
  } else {
    c.right_bc.kind = RightBoundaryCondition::Kind::RangeCondition;
    c.right_bc.m1 = m;
    if (std::abs(r1 - rs) > 1e-14 * rs) {
      c.right_bc.rho1_dagger = conjugate_state(r1, m, data.pressure);
      c.right_bc.u1_dagger = m / *c.right_bc.rho1_dagger;
    }
    c.right_bc.condition = "u(1)† <= u1";
  }
  return c;
}

nlohmann::ordered_json to_json(const InviscidConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(c.kind);
  j["rho0"] = c.rho0;
  j["rho1"] = c.rho1;
  j["interior_state"] = c.interior_state ? nlohmann::ordered_json(*c.interior_state) : nullptr;
  j["rho_star"] = c.rho_star;
  j["psi_star"] = c.psi_star;
  j["b"] = c.b;
  j["rest_points"] = c.rest_points ? nlohmann::ordered_json::array({c.rest_points->first, c.rest_points->second})
                                   : nlohmann::ordered_json(nullptr);
  j["rates"] = {c.rates.first, c.rates.second};
  j["shock_location"] = c.shock_location ? nlohmann::ordered_json(*c.shock_location) : nullptr;
  j["psi_mismatch"] = c.psi_mismatch;
  nlohmann::ordered_json left;
  left["kind"] = c.left_bc.kind == LeftBoundaryCondition::Kind::FullDirichlet ? "FullDirichlet" : "Transcharacteristic";
  left["u0"] = c.left_bc.u0;
  left["sound_speed"] = c.left_bc.c0;
  left["condition"] = c.left_bc.condition;
  nlohmann::ordered_json right;
  right["kind"] = c.right_bc.kind == RightBoundaryCondition::Kind::SingleOutflow ? "SingleOutflow" : "RangeCondition";
  right["u1"] = c.right_bc.u1;
  right["sound_speed"] = c.right_bc.c1;
  if (c.right_bc.m1) right["m1"] = *c.right_bc.m1;
  if (c.right_bc.rho1_dagger) right["rho1_dagger"] = *c.right_bc.rho1_dagger;
  if (c.right_bc.u1_dagger) right["u1_dagger"] = *c.right_bc.u1_dagger;
  right["condition"] = c.right_bc.condition;
  j["induced_bc"] = {{"left", left}, {"right", right}};
  return j;
}

double limit_density(const InviscidConfig& c, double x) {
  switch (c.kind) {
    case ConfigKind::Constant: return c.rho0;
    case ConfigKind::LeftBL_expansive:
    case ConfigKind::LeftBL_compressive: return x <= 0.0 ? c.rho0 : *c.interior_state;
    case ConfigKind::RightBL_expansive:
    case ConfigKind::RightBL_compressive: return x >= 1.0 ? c.rho1 : *c.interior_state;
    case ConfigKind::DoubleCharacteristicBL:
      if (x <= 0.0) return c.rho0;
      if (x >= 1.0) return c.rho1;
      return c.rho_star;
    case ConfigKind::InteriorShock: return x < *c.shock_location ? c.rho0 : c.rho1;
  }
  return kNaN;
}

// ---------------------------------------------------------------- viscous profiles

double IsentropicProfile::b() const { return log_offset == -kInf ? b_ref : b_ref + sgn * std::exp(log_offset); }

namespace {

// gdiff(anchor, dir e^tau) / e^tau
double scaled_gdiff(const IsentropicGas& gas, double anchor, double dir, double tau) {
  const double e = std::exp(tau);
  if (e < 1e-3 * anchor) {
    double sum = 0.0, pw = 1.0, fact = 1.0;
    for (int k = 1; k <= 8; ++k) {
      fact *= k;
      sum -= gas.dkpsi(k, anchor) * (k % 2 == 1 ? dir : 1.0) * pw / fact;
      pw *= e;
    }
    return sum;
  }
  return gas.gdiff(anchor, dir * e) / e;
}

struct PieceSpec {
  double anchor, dir, level, tau_min, tau_hi;
  bool forward;
};

}  // namespace

double IsentropicProfile::dx_dtau(const Piece& p, double tau) const {
  const double e = std::exp(tau);
  const double sigma = p.anchor + p.dir * e;
  const double lead = std::exp(p.log_level - tau);
  if (!std::isfinite(lead)) return 0.0;
  const double den = std::abs(sgn * lead + scaled_gdiff(gas, p.anchor, p.dir, tau));
  return gas.m * nu / (sigma * sigma * std::max(den, 1e-300));
}

double IsentropicProfile::rho_prime(double rho) const {
  const double lead = log_offset == -kInf ? 0.0 : std::exp(log_offset);
  const double g = gas.gdiff(anchor_ref, rho - anchor_ref) + sgn * lead;
  return rho * rho * g / (gas.m * nu) / x_scale;
}

namespace {

double piece_integral(const IsentropicProfile& prof, const IsentropicProfile::Piece& p, double a, double b) {
  if (b <= a) return 0.0;
  auto f = [&](double t) { return prof.dx_dtau(p, t); };
  std::vector<double> cuts{a};
  for (double c : {p.log_level - 10.0, p.log_level, p.log_level + 10.0})
    if (std::isfinite(c) && c > a && c < b) cuts.push_back(c);
  cuts.push_back(b);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += GK61::integrate(f, cuts[i], cuts[i + 1], 15, 1e-14);
  return s;
}

IsentropicProfile::Piece make_probe(const PieceSpec& s) {
  IsentropicProfile::Piece p;
  p.anchor = s.anchor;
  p.dir = s.dir;
  p.log_level = s.level;
  p.tau_min = s.tau_min;
  p.forward = s.forward;
  return p;
}

void build_tables(IsentropicProfile& prof, const std::vector<PieceSpec>& specs, double spacing) {
  prof.pieces.clear();
  double running = 0.0;
  for (const auto& s : specs) {
    IsentropicProfile::Piece p = make_probe(s);
    const double hi = s.tau_hi;
    double lo = std::max(s.tau_min, std::log(kVisibleCut * s.anchor));
    lo = std::min(lo, hi - 1.0);
    lo = std::max(lo, s.tau_min);
    const std::size_t n = std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil((hi - lo) / spacing)));
    p.tau_lo = lo;
    p.dtau = (hi - lo) / static_cast<double>(n);
    p.cum.assign(n + 1, 0.0);
    p.cum[0] = piece_integral(prof, p, s.tau_min, lo);
    auto f = [&](double t) { return prof.dx_dtau(p, t); };
    long double acc = p.cum[0];
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lo + p.dtau * static_cast<double>(i);
      const double b = i + 1 == n ? hi : lo + p.dtau * static_cast<double>(i + 1);
      acc += GL7::integrate(f, a, b);
      p.cum[i + 1] = static_cast<double>(acc);
    }
    p.x_origin = running;
    running += p.cum.back();
    prof.pieces.push_back(std::move(p));
  }
  prof.x_scale = 1.0 / running;

  std::vector<double> xs, rhos, drhos;
  auto push = [&](double x, double rho, double drho) {
    if (!xs.empty() && x <= xs.back()) return;
    xs.push_back(x);
    rhos.push_back(rho);
    drhos.push_back(drho);
  };
  const double mnu = prof.gas.m * prof.nu;
  for (const auto& p : prof.pieces) {
    const std::size_t n = p.cum.size() - 1;
    auto node = [&](std::size_t i, double x) {
      const double tau = i == n ? p.tau_hi() : p.tau_lo + p.dtau * static_cast<double>(i);
      const double e = std::exp(tau);
      const double sigma = p.anchor + p.dir * e;
      const double lead = std::exp(p.log_level);
      const double g = prof.sgn * lead + e * scaled_gdiff(prof.gas, p.anchor, p.dir, tau);
      push(x * prof.x_scale, sigma, sigma * sigma * g / mnu / prof.x_scale);
    };
    if (p.forward) {
      push(p.x_origin * prof.x_scale, p.anchor, 0.0);
      for (std::size_t i = 0; i <= n; ++i) node(i, p.x_origin + p.cum[i]);
    } else {
      for (std::size_t i = n + 1; i-- > 0;) node(i, p.x_origin + (p.cum[n] - p.cum[i]));
      push((p.x_origin + p.cum[n]) * prof.x_scale, p.anchor, 0.0);
    }
  }
  xs.front() = 0.0;
  if (xs.back() < 1.0) push(1.0, rhos.back(), 0.0);
  xs.back() = 1.0;
  // drop interior nodes of runs on which rho is constant to working precision
  prof.xs.clear();
  prof.rhos.clear();
  prof.drhos.clear();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool interior_of_run = i > 0 && i + 1 < xs.size() && rhos[i] == rhos[i - 1] && rhos[i] == rhos[i + 1];
    if (interior_of_run) continue;
    prof.xs.push_back(xs[i]);
    prof.rhos.push_back(rhos[i]);
    prof.drhos.push_back(drhos[i]);
  }
}

}  // namespace

double IsentropicProfile::operator()(double x) const {
  if (xs.size() < 2) return rho_left;
  x = std::clamp(x, 0.0, 1.0);
  std::size_t i = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  i = std::clamp<std::size_t>(i, 1, xs.size() - 1) - 1;
  const double h = xs[i + 1] - xs[i];
  const double t = (x - xs[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * rhos[i] + (t3 - 2 * t2 + t) * h * drhos[i] + (-2 * t3 + 3 * t2) * rhos[i + 1] +
         (t3 - t2) * h * drhos[i + 1];
}

double IsentropicProfile::derivative(double x) const {
  if (xs.size() < 2) return 0.0;
  x = std::clamp(x, 0.0, 1.0);
  std::size_t i = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  i = std::clamp<std::size_t>(i, 1, xs.size() - 1) - 1;
  const double h = xs[i + 1] - xs[i];
  const double t = (x - xs[i]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * rhos[i] + (-6 * t2 + 6 * t) * rhos[i + 1]) / h + (3 * t2 - 4 * t + 1) * drhos[i] +
         (3 * t2 - 2 * t) * drhos[i + 1];
}

double IsentropicProfile::x_of_rho(double rho) const {
  for (const auto& p : pieces) {
    const double far = p.anchor + p.dir * std::exp(p.tau_hi());
    const double lo = std::min(p.anchor, far), hi = std::max(p.anchor, far);
    if (!(rho > lo && rho <= hi) && !(rho >= lo && rho < hi)) continue;
    if (rho == p.anchor) return (p.forward ? p.x_origin : p.x_origin + p.cum.back()) * x_scale;
    const double tau = std::log(std::abs(rho - p.anchor));
    double c;
    if (tau <= p.tau_lo) {
      c = piece_integral(*this, p, p.tau_min, std::max(tau, p.tau_min));
    } else {
      const std::size_t n = p.cum.size() - 1;
      std::size_t i = std::min(n - 1, static_cast<std::size_t>((tau - p.tau_lo) / p.dtau));
      const double a = p.tau_lo + p.dtau * static_cast<double>(i);
      auto f = [&](double t) { return dx_dtau(p, t); };
      c = p.cum[i] + GL7::integrate(f, a, std::min(tau, p.tau_hi()));
    }
    const double x = p.forward ? p.x_origin + c : p.x_origin + (p.cum.back() - c);
    return x * x_scale;
  }
  throw ValidationError("x_of_rho: density outside the profile range");
}

double IsentropicProfile::steepest_point() const {
  const double lo = std::min(rho_left, rho_right), hi = std::max(rho_left, rho_right);
  if (!(hi > lo)) return 0.5;
  auto f = [&](double r) { return -std::abs(rho_prime(r)); };
  const auto res = boost::math::tools::brent_find_minima(f, lo, hi, 52);
  return x_of_rho(res.first);
}

IsentropicProfile solve_isentropic_viscous(const GasBoundaryData& data, double nu, const IsentropicSolveOptions& opt) {
  data.validate();
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ValidationError("solve_isentropic_viscous: nu must be positive");
  IsentropicProfile p;
  p.gas = data.gas();
  p.nu = nu;
  const double r0 = data.rho0, r1 = data.rho1();
  p.rho_left = r0;
  p.rho_right = r1;
  const IsentropicGas& gas = p.gas;
  if (r0 == r1) {
    p.b_ref = gas.psi(r0);
    p.anchor_ref = r0;
    p.log_offset = -kInf;
    p.xs = {0.0, 1.0};
    p.rhos = {r0, r0};
    p.drhos = {0.0, 0.0};
    return p;
  }
  p.sgn = r1 > r0 ? 1.0 : -1.0;
  const double rs = sonic_state(gas.m, gas.pressure);
  std::vector<double> breaks{r0};
  const bool sonic_inside = p.sgn < 0 && r1 < rs && rs < r0;
  if (sonic_inside) breaks.push_back(rs);
  breaks.push_back(r1);
  const double d01 = gas.gdiff(r0, r1 - r0);  // psi0 - psi1
  if (data.u1_conjugate) p.anchor_ref = r0;
  else if (p.sgn > 0) p.anchor_ref = d01 >= 0.0 ? r0 : r1;
  else p.anchor_ref = sonic_inside ? rs : (d01 <= 0.0 ? r0 : r1);
  p.b_ref = gas.psi(p.anchor_ref);

  // log|b_ref - psi(anchor)|, -inf for anchors where the profile ODE has a rest point
  auto log_k = [&](double a) {
    if (a == p.anchor_ref) return -kInf;
    if (data.u1_conjugate && (a == r0 || a == r1)) return -kInf;
    return std::log(std::abs(gas.gdiff(p.anchor_ref, a - p.anchor_ref)));
  };
  std::vector<PieceSpec> specs;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
    const double a = breaks[j], b = breaks[j + 1], mid = 0.5 * (a + b);
    specs.push_back({a, b > a ? 1.0 : -1.0, log_k(a), 0.0, std::log(std::abs(mid - a)), true});
    specs.push_back({b, a > b ? 1.0 : -1.0, log_k(b), 0.0, std::log(std::abs(mid - b)), false});
  }
  const std::vector<PieceSpec> base = specs;
  auto with_offset = [&](double s) {
    std::vector<PieceSpec> out = base;
    for (auto& sp : out) {
      sp.level = logaddexp(sp.level, s);
      sp.tau_min = std::min(sp.level, sp.tau_hi) - kTail;
    }
    return out;
  };
  auto travel = [&](double s) {
    p.log_offset = s;
    double t = 0.0;
    for (const auto& sp : with_offset(s)) {
      const auto probe = make_probe(sp);
      t += piece_integral(p, probe, sp.tau_min, sp.tau_hi);
    }
    return t;
  };
  auto f = [&](double s) { return travel(s) - 1.0; };
  double sa = 0.0, fa = f(sa), sb, fb;
  double step = 1.0;
  if (fa > 0.0) {
    sb = sa + step;
    fb = f(sb);
    while (fb > 0.0) {
      sa = sb;
      fa = fb;
      step *= 2.0;
      sb = sa + step;
      fb = f(sb);
      if (step > 1e4) throw NumericalError("solve_isentropic_viscous: bracket expansion failed (upper)");
    }
  } else {
    sb = sa;
    fb = fa;
    sa = sb - step;
    fa = f(sa);
    while (fa < 0.0) {
      sb = sa;
      fb = fa;
      step *= 2.0;
      sa = sb - step;
      fa = f(sa);
      if (step > 1e8) throw NumericalError("solve_isentropic_viscous: bracket expansion failed (lower)");
    }
  }
  const double s = solve_bracketed(f, sa, sb, fa, fb);
  p.log_offset = s;
  build_tables(p, with_offset(s), opt.node_spacing);
  return p;
}

IsentropicProfile whole_line_shock(const IsentropicGas& gas, double rho_minus, double rho_plus, double eps,
                                   const IsentropicSolveOptions& opt) {
  if (!(eps > 0.0)) throw ValidationError("whole_line_shock: eps must be positive");
  if (!(rho_minus > 0.0) || !(rho_plus > rho_minus))
    throw ValidationError("whole_line_shock: need 0 < rho_minus < rho_plus");
  const double rs = sonic_state(gas.m, gas.pressure);
  if (!(rho_minus < rs && rs < rho_plus)) throw ValidationError("whole_line_shock: end states must straddle the sonic state");
  const double mismatch = gas.gdiff(rho_minus, rho_plus - rho_minus) / gas.psi(rho_minus);
  if (std::abs(mismatch) > 1e-8)
    throw ValidationError("whole_line_shock: end states violate the Rankine-Hugoniot condition psi(rho-) = psi(rho+)");
  IsentropicProfile p;
  p.gas = gas;
  p.nu = eps;
  p.sgn = 1.0;
  p.anchor_ref = rho_minus;
  p.b_ref = gas.psi(rho_minus);
  p.log_offset = -kInf;
  const double mid = 0.5 * (rho_minus + rho_plus);
  std::vector<PieceSpec> specs{{rho_minus, 1.0, -kInf, 0.0, std::log(mid - rho_minus), true},
                               {rho_plus, -1.0, -kInf, 0.0, std::log(rho_plus - mid), false}};
  for (auto& sp : specs) {
    const auto probe = make_probe(sp);
    auto g = [&](double t) { return piece_integral(p, probe, t, sp.tau_hi) - 0.5; };
    const double slope = gas.m * eps / (sp.anchor * sp.anchor * std::abs(gas.dpsi(sp.anchor)));
    double lo = sp.tau_hi - 1.5 * 0.5 / slope - 10.0;
    double glo = g(lo);
    while (glo < 0.0) {
      lo -= 0.5 / slope + 10.0;
      glo = g(lo);
    }
    const double hi = sp.tau_hi;
    sp.tau_min = solve_bracketed(g, lo, hi, glo, g(hi));
  }
  build_tables(p, specs, opt.node_spacing);
  p.rho_left = p(0.0);
  p.rho_right = p(1.0);
  return p;
}

SteadyProfile as_steady_profile(const IsentropicProfile& prof) {
  auto p = std::make_shared<IsentropicProfile>(prof);
  const double m = p->gas.m;
  SteadyProfile sp;
  sp.state = [p, m](double x) {
    const double r = (*p)(x);
    return Vec{{r, m / r}};
  };
  sp.derivative = [p, m](double x) {
    const double r = (*p)(x), dr = p->derivative(x);
    return Vec{{dr, -m * dr / (r * r)}};
  };
  sp.u0 = sp.state(0.0);
  sp.u1ii = Vec::Constant(1, m / (*p)(1.0));
  sp.constants.c1 = Vec::Constant(1, m);
  sp.constants.c2 = Vec::Constant(1, sp.derivative(0.0)[1]);
  const std::size_t stride = std::max<std::size_t>(1, p->xs.size() / 2000);
  for (std::size_t i = 0; i < p->xs.size(); i += stride) sp.grid.push_back(p->xs[i]);
  if (sp.grid.back() != 1.0) sp.grid.push_back(1.0);
  for (double x : sp.grid) sp.states.push_back(sp.state(x));
  sp.residual = 0.0;
  sp.converged = true;
  sp.det_dphi = kNaN;
  sp.notes.push_back("isentropic profile from the travel-time map");
  return sp;
}

double lp_distance(const IsentropicProfile& p, const std::function<double(double)>& target, double pnorm,
                   const std::vector<double>& breaks) {
  if (!(pnorm >= 1.0)) throw ValidationError("lp_distance: p must be >= 1");
  std::vector<double> nodes = p.xs;
  if (nodes.size() < 2) nodes = {0.0, 1.0};
  for (double b : breaks)
    if (b > 0.0 && b < 1.0) nodes.push_back(b);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  using GL5 = boost::math::quadrature::gauss<double, 5>;
  long double acc = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double a = nodes[i], b = nodes[i + 1];
    const double mid = 0.5 * (a + b);
    const double tv = target(mid);  // target is smooth inside each interval
    acc += GL5::integrate([&](double x) { return std::pow(std::abs(p(x) - tv), pnorm); }, a, b);
  }
  return std::pow(static_cast<double>(acc), 1.0 / pnorm);
}

ProfileShape classify_shape(const IsentropicProfile& p, double rho_star) {
  ProfileShape s;
  const double r0 = p.rho_left, r1 = p.rho_right;
  const double span = std::abs(r1 - r0);
  if (span <= 1e-12 * std::max(1.0, std::abs(r0))) {
    s.label = "constant";
    return s;
  }
  const int n = 4000;
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = p(static_cast<double>(i) / n);
  const double dir = r1 > r0 ? 1.0 : -1.0;
  bool mono = true;
  for (int i = 0; i < n; ++i)
    if (dir * (v[i + 1] - v[i]) < -1e-9 * span) mono = false;
  s.monotone = mono ? static_cast<int>(dir) : 0;
  const double tol = 0.02 * span;
  int first = n + 1;
  for (int i = 0; i <= n; ++i)
    if (std::abs(v[i] - r0) > tol) {
      first = i;
      break;
    }
  int last = -1;
  for (int i = n; i >= 0; --i)
    if (std::abs(v[i] - r1) > tol) {
      last = i;
      break;
    }
  s.plateau_left = static_cast<double>(first) / n;
  s.plateau_right = 1.0 - static_cast<double>(last) / n;
  s.mid_deviation = std::abs(p(0.5) - rho_star) / span;
  if (!mono) s.label = "unclassified";
  else if (s.plateau_left > 0.2 && s.plateau_right > 0.2) s.label = "interior_shock";
  else if (s.plateau_left > 0.5) s.label = "right_layer";
  else if (s.plateau_right > 0.5) s.label = "left_layer";
  else if (s.plateau_left < 0.2 && s.plateau_right < 0.2 && s.mid_deviation < 0.1) s.label = "double_layer";
  else s.label = "unclassified";
  return s;
}

std::string expected_shape(ConfigKind k) {
  switch (k) {
    case ConfigKind::Constant: return "constant";
    case ConfigKind::LeftBL_expansive:
    case ConfigKind::LeftBL_compressive: return "left_layer";
    case ConfigKind::RightBL_expansive:
    case ConfigKind::RightBL_compressive: return "right_layer";
    case ConfigKind::InteriorShock: return "interior_shock";
    case ConfigKind::DoubleCharacteristicBL: return "double_layer";
  }
  return "?";
}

Fit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, bool require_monotone) {
  Fit f;
  if (x.size() != y.size() || x.size() < 2) {
    f.slope = f.intercept = kNaN;
    return f;
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i])) {
      f.slope = f.intercept = kNaN;
      return f;
    }
    pts.emplace_back(std::log(x[i]), std::log(y[i]));
  }
  std::sort(pts.begin(), pts.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (auto [a, b] : pts) {
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  const double den = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  f.accepted = std::isfinite(f.slope);
  if (require_monotone) {
    bool inc = true, dec = true;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if (!(pts[i + 1].second > pts[i].second)) inc = false;
      if (!(pts[i + 1].second < pts[i].second)) dec = false;
    }
    if (!inc && !dec) f.accepted = false;
  }
  return f;
}

ConvergenceTable convergence_study(const GasBoundaryData& data, const std::vector<double>& nu_list,
                                   const std::vector<double>& p_list, int jobs, const ClassifyOptions& copt) {
  if (nu_list.size() < 2) throw ValidationError("convergence_study: need at least two viscosities");
  if (p_list.empty()) throw ValidationError("convergence_study: p_list is empty");
  for (double nu : nu_list)
    if (!(nu > 0.0)) throw ValidationError("convergence_study: viscosities must be positive");
  for (double q : p_list)
    if (!(q >= 1.0)) throw ValidationError("convergence_study: p values must be >= 1");
  const auto [mn, mx] = std::minmax_element(nu_list.begin(), nu_list.end());
  if (std::log10(*mx / *mn) < 1.5 - 1e-12) throw ValidationError("convergence_study: nu_list must span at least 1.5 decades");
  ConvergenceTable t;
  t.config = classify_inviscid(data, copt);
  if (t.config.kind == ConfigKind::Constant) throw ValidationError("convergence_study: constant data has no limit structure");
  t.p_list = p_list;
  t.rows.resize(nu_list.size());
  const InviscidConfig cfg = t.config;
  std::vector<double> breaks;
  if (cfg.shock_location) breaks.push_back(*cfg.shock_location);
  parallel_for(nu_list.size(), jobs, [&](std::size_t i) {
    const double nu = nu_list[i];
    const IsentropicProfile prof = solve_isentropic_viscous(data, nu);
    ConvergenceRow row;
    row.nu = nu;
    row.log_offset = prof.log_offset;
    auto target = [&](double x) { return limit_density(cfg, x); };
    for (double q : p_list) row.errors.push_back(lp_distance(prof, target, q, breaks));
    if (cfg.kind == ConfigKind::InteriorShock) row.shock_location = prof.steepest_point();
    if (cfg.kind == ConfigKind::DoubleCharacteristicBL) {
      const double l1 = lp_distance(prof, target, 1.0, breaks);
      row.nu_log_ratio = l1 / (nu * std::log(1.0 / nu));
    }
    t.rows[i] = std::move(row);
  });
  for (std::size_t k = 0; k < p_list.size(); ++k) {
    std::vector<double> x, y;
    for (const auto& r : t.rows) {
      x.push_back(r.nu);
      y.push_back(r.errors[k]);
    }
    t.fits.push_back(fit_loglog(x, y));
    if (!t.fits.back().accepted) {
      std::ostringstream os;
      os << "L" << p_list[k] << " errors are not monotone in nu; fit rejected";
      t.warnings.push_back(os.str());
    }
  }
  if (cfg.shock_location) {
    std::vector<double> x, y;
    for (const auto& r : t.rows) {
      x.push_back(r.nu);
      y.push_back(std::abs(*r.shock_location - *cfg.shock_location));
    }
    t.shock_fit = fit_loglog(x, y);
    if (!t.shock_fit->accepted) t.warnings.push_back("shock-location errors are not monotone in nu; fit rejected");
  }
  return t;
}

// ---------------------------------------------------------------- large viscosity

void FullGasLimitParams::validate() const {
  for (double v : {rho0, u0, e0, u1, e1})
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("full_gas: rho0, u0, e0, u1, e1 must be positive");
  if (!(Gamma > 0.0)) throw ValidationError("full_gas: Gamma must be positive");
  if (!(ratio > 0.0)) throw ValidationError("full_gas: ratio must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("full_gas: epsilon must lie in (0,1)");
}

FullGasLimitParams full_gas_limit_from_json(const nlohmann::json& block) {
  const std::string ctx = "full_gas";
  config::require_object(block, ctx);
  config::allow_keys(block, {"rho0", "u0", "e0", "u1", "e1", "Gamma", "ratio", "epsilon"}, ctx);
  FullGasLimitParams p;
  p.rho0 = config::number_or(block, "rho0", p.rho0, ctx);
  p.u0 = config::number(block, "u0", ctx);
  p.e0 = config::number(block, "e0", ctx);
  p.u1 = config::number(block, "u1", ctx);
  p.e1 = config::number(block, "e1", ctx);
  p.Gamma = config::number_or(block, "Gamma", p.Gamma, ctx);
  p.ratio = config::number_or(block, "ratio", p.ratio, ctx);
  p.epsilon = config::number_or(block, "epsilon", p.epsilon, ctx);
  p.validate();
  return p;
}

double LimitProfile::u(double x) const { return u0 + x * (u1 - u0); }
double LimitProfile::e(double x) const {
  const double ub = u(x);
  return e0 + x * (e1 - e0) + 0.5 / ratio * (x * (u1 * u1 - u0 * u0) - (ub * ub - u0 * u0));
}
double LimitProfile::du(double) const { return u1 - u0; }
double LimitProfile::de(double x) const {
  return (e1 - e0) + 0.5 / ratio * ((u1 * u1 - u0 * u0) - 2.0 * u(x) * (u1 - u0));
}

LimitProfile limit_profile(const FullGasLimitParams& p) { return {p.u0, p.e0, p.u1, p.e1, p.ratio}; }

LargeViscTable full_gas_large_visc(const FullGasLimitParams& p, const std::vector<double>& alpha_list, int jobs) {
  p.validate();
  if (alpha_list.empty()) throw ValidationError("large_visc: alpha_list is empty");
  for (double a : alpha_list)
    if (!(a > 0.0)) throw ValidationError("large_visc: alpha values must be positive");
  const LimitProfile lim = limit_profile(p);
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    const double u = lim.u(x), e = lim.e(x);
    if (!(u > p.epsilon && u < 1.0 / p.epsilon && e > p.epsilon && e < 1.0 / p.epsilon))
      throw ValidationError("large_visc: limit profile leaves the box E_eps");
  }
  LargeViscTable t;
  t.rows.resize(alpha_list.size());
  parallel_for(alpha_list.size(), jobs, [&](std::size_t i) {
    LargeViscRow row;
    row.alpha = alpha_list[i];
    row.nu = p.ratio * row.alpha;
    try {
      const SystemDef sys = make_full_gas({p.Gamma, row.alpha, row.nu});
      const Vec u0{{p.rho0, p.u0, p.e0}};
      const Vec u1{{p.u1, p.e1}};
      const Vec guess{{lim.du(0.0), lim.de(0.0)}};
      const SteadyProfile prof = solve_steady(sys, u0, u1, guess);
      row.converged = prof.converged;
      row.iterations = prof.iterations;
      if (!prof.converged) {
        row.note = "steady solve did not converge; row skipped";
      } else {
        row.boundary_mismatch = std::max((prof.state(0.0) - u0).lpNorm<Eigen::Infinity>(),
                                         (prof.state(1.0).tail(2) - u1).lpNorm<Eigen::Infinity>());
        const double h = 1e-5;
        auto d = [&](double x) {
          const double a = std::max(0.0, x - h), b = std::min(1.0, x + h);
          return Vec((prof.state(b) - prof.state(a)) / (b - a));
        };
        using GL5 = boost::math::quadrature::gauss<double, 5>;
        const int cells = 200;
        double acc = 0.0;
        for (int k = 0; k < cells; ++k) {
          acc += GL5::integrate(
              [&](double x) {
                const Vec s = prof.state(x), ds = d(x);
                const double eu = s[1] - lim.u(x), ee = s[2] - lim.e(x);
                const double du = ds[1] - lim.du(x), de = ds[2] - lim.de(x);
                return eu * eu + ee * ee + du * du + de * de;
              },
              static_cast<double>(k) / cells, static_cast<double>(k + 1) / cells);
        }
        row.h1_error = std::sqrt(acc);
      }
    } catch (const Error& e) {
      row.converged = false;
      row.note = std::string("steady solve failed: ") + e.what();
    }
    t.rows[i] = row;
  });
  std::vector<double> x, y;
  for (const auto& r : t.rows) {
    if (!r.converged) {
      t.warnings.push_back("alpha = " + std::to_string(r.alpha) + ": " + r.note);
      continue;
    }
    x.push_back(r.alpha);
    y.push_back(r.h1_error);
  }
  if (x.size() >= 2) {
    t.fit = fit_loglog(x, y);
    if (!t.fit->accepted) t.warnings.push_back("H1 errors are not monotone in alpha; fit rejected");
  }
  return t;
}

Shot formal_large_visc_solve(const SystemDef& sys, const Vec& u0, const Vec& c_tilde, const ShootOptions& opt) {
  sys.require_domain(u0);
  const int r = sys.r, m = sys.m();
  if (c_tilde.size() != m) throw ValidationError("formal_large_visc_solve: c_tilde has wrong dimension");
  const Vec c1 = sys.f(u0).head(r);
  Vec warm = u0.head(r);
  auto full = [&](const Vec& uii, const Vec& guess) -> Vec {
    try {
      return concat(resolve_hyperbolic(sys, uii, c1, guess), uii);
    } catch (const NumericalError& e) {
      throw DomainError(e.what());
    }
  };
  auto field = [&](double, const Vec& uii) -> Vec {
    const Vec u = full(uii, warm);
    if (!sys.in_domain(u)) throw DomainError("formal limit left the admissible set");
    const auto lu = sys.b22(u).fullPivLu();
    if (!lu.isInvertible()) throw DomainError("formal limit: B22 singular");
    return lu.solve(c_tilde);
  };
  auto guard = [&](double, const Vec& uii) -> bool {
    try {
      const Vec u = full(uii, warm);
      if (!sys.in_domain(u)) return false;
      warm = u.head(r);
      return true;
    } catch (const DomainError&) {
      return false;
    }
  };
  ode::Options o;
  o.rtol = opt.rtol;
  o.atol = opt.atol;
  Shot shot;
  shot.constants = {c1, c_tilde};
  shot.ii = ode::integrate<double>(field, 0.0, 1.0, Vec(u0.tail(m)), o, guard);
  Vec g = u0.head(r);
  for (std::size_t i = 0; i < shot.ii.size(); ++i) {
    if (i == 0) {
      shot.states.push_back(u0);
      continue;
    }
    try {
      Vec u = concat(resolve_hyperbolic(sys, shot.ii.values()[i], c1, g), shot.ii.values()[i]);
      g = u.head(r);
      shot.states.push_back(u);
    } catch (const NumericalError&) {
      shot.states.push_back(Vec::Constant(sys.n, kNaN));
    }
  }
  return shot;
}

// ---------------------------------------------------------------- cone

bool ConeDomain::contains(const Vec& p) const {
  if (kind == Kind::box) {
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (p[i] < lo[i] - 1e-12 || p[i] > hi[i] + 1e-12) return false;
    return true;
  }
  return (p - center).norm() <= radius * (1.0 + 1e-12);
}

ConeResult cone_feasibility(double beta0, double beta1, const Vec& u0ii, const Vec& u1ii, const ConeDomain& domain) {
  if (!(beta0 > 0.0) || !(beta1 >= beta0)) throw ValidationError("cone_feasibility: need 0 < beta0 <= beta1");
  const Eigen::Index d = u0ii.size();
  if (u1ii.size() != d || d == 0) throw ValidationError("cone_feasibility: dimension mismatch");
  if (domain.kind == ConeDomain::Kind::box && (domain.lo.size() != d || domain.hi.size() != d))
    throw ValidationError("cone_feasibility: box has wrong dimension");
  if (domain.kind == ConeDomain::Kind::ball && (domain.center.size() != d || !(domain.radius > 0.0)))
    throw ValidationError("cone_feasibility: ball is invalid");
  ConeResult res;
  res.theta = std::acos(std::clamp(beta0 / beta1, -1.0, 1.0));
  const Vec v = u1ii - u0ii;
  const double vn = v.norm();
  res.length = beta1 / beta0 * vn;
  if (vn == 0.0) {
    res.degenerate = true;
    res.feasible = true;
    return res;
  }
  auto check = [&](const Vec& p) {
    if (!domain.contains(p)) {
      res.violating_point = p;
      return false;
    }
    return true;
  };
  if (!check(u0ii)) return res;
  const Vec axis = v / vn;
  std::vector<Vec> normals;
  if (d >= 2) {
    const Mat axis_m = axis;
    Eigen::HouseholderQR<Mat> qr(axis_m);
    const Mat q = qr.householderQ() * Mat::Identity(d, d);
    std::vector<Vec> basis;
    for (Eigen::Index k = 1; k < d; ++k) basis.push_back(q.col(k));
    if (d == 2) {
      normals = {basis[0], -basis[0]};
    } else {
      const int ring = 32;
      for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = i + 1; j < basis.size(); ++j)
          for (int k = 0; k < ring; ++k) {
            const double w = 2.0 * std::numbers::pi * k / ring;
            normals.push_back(std::cos(w) * basis[i] + std::sin(w) * basis[j]);
          }
    }
  }
  const int rings = 16;
  if (!check(Vec(u0ii + res.length * axis))) return res;
  for (int a = 1; a <= rings; ++a) {
    const double phi = res.theta * a / rings;
    for (const Vec& nrm : normals) {
      const Vec dirv = std::cos(phi) * axis + std::sin(phi) * nrm;
      if (!check(Vec(u0ii + res.length * dirv))) return res;
    }
  }
  res.feasible = true;
  return res;
}

}  // namespace steadytube
