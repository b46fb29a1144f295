#include "steadytube/cli.hpp"

#include "steadytube/config.hpp"
#include "steadytube/evans.hpp"
#include "steadytube/io.hpp"
#include "steadytube/limits.hpp"
#include "steadytube/parallel.hpp"
#include "steadytube/steady.hpp"
#include "steadytube/system.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace steadytube::cli {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<std::string> kCommands = {"check",    "solve",      "evans-scan", "index",      "zs-check",
                                            "classify", "sweep-nu",   "large-visc", "degree",     "standing-shock"};

struct Context {
  std::string command;
  json config;
  std::string out_dir;
  int jobs = 1;
  std::uint64_t seed = 0;
  io::Provenance prov;
};

// Effective tolerances with defaults, recorded in every provenance header.
struct Tolerances {
  SolveOptions solve;
  EvansOptions evans;
  double check_tol = 1e-8;
  double shock_tol = 1e-9;
  ojson to_json() const {
    ojson j;
    j["shoot_rtol"] = solve.shoot.rtol;
    j["shoot_atol"] = solve.shoot.atol;
    j["jacobian_rtol"] = solve.jacobian.rtol;
    j["jacobian_atol"] = solve.jacobian.atol;
    j["max_iterations"] = solve.max_iterations;
    j["degeneracy"] = solve.degeneracy;
    j["evans_rtol"] = evans.ode.rtol;
    j["evans_atol"] = evans.ode.atol;
    j["x_match"] = evans.x_match;
    j["check_tol"] = check_tol;
    j["shock_tol"] = shock_tol;
    return j;
  }
};

Tolerances parse_tolerances(const json& cfg) {
  Tolerances t;
  if (!cfg.contains("tolerances")) return t;
  const json& b = cfg.at("tolerances");
  const std::string ctx = "tolerances";
  config::require_object(b, ctx);
  config::allow_keys(b,
                     {"shoot_rtol", "shoot_atol", "jacobian_rtol", "jacobian_atol", "max_iterations", "degeneracy",
                      "evans_rtol", "evans_atol", "x_match", "check_tol", "shock_tol"},
                     ctx);
  auto pos = [&](const char* key, double fallback) {
    const double v = config::number_or(b, key, fallback, ctx);
    if (!(v > 0.0)) throw ValidationError(ctx + "." + key + " must be positive");
    return v;
  };
  t.solve.shoot.rtol = pos("shoot_rtol", t.solve.shoot.rtol);
  t.solve.shoot.atol = pos("shoot_atol", t.solve.shoot.atol);
  t.solve.jacobian.rtol = pos("jacobian_rtol", t.solve.jacobian.rtol);
  t.solve.jacobian.atol = pos("jacobian_atol", t.solve.jacobian.atol);
  const long long it = config::integer_or(b, "max_iterations", t.solve.max_iterations, ctx);
  if (it < 1 || it > 100000) throw ValidationError("tolerances.max_iterations out of range");
  t.solve.max_iterations = static_cast<int>(it);
  t.solve.degeneracy = pos("degeneracy", t.solve.degeneracy);
  t.evans.ode.rtol = pos("evans_rtol", t.evans.ode.rtol);
  t.evans.ode.atol = pos("evans_atol", t.evans.ode.atol);
  t.evans.x_match = config::number_or(b, "x_match", t.evans.x_match, ctx);
  if (!(t.evans.x_match > 0.0 && t.evans.x_match < 1.0)) throw ValidationError("tolerances.x_match must lie in (0,1)");
  t.check_tol = pos("check_tol", t.check_tol);
  t.shock_tol = pos("shock_tol", t.shock_tol);
  return t;
}

std::string path_in(const Context& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

void say(const std::string& s) { std::cout << s << '\n'; }

std::string fmt(double v) { return io::format_double(v); }

const json& require(const json& cfg, const char* key) {
  if (!cfg.contains(key)) throw ValidationError(std::string("config: missing key '") + key + "'");
  return cfg.at(key);
}

SystemDef load_system(const json& cfg) { return system_from_json(require(cfg, "system")); }

std::vector<double> number_list(const json& cfg, const char* key) {
  const Vec v = config::vector(cfg, key, "config");
  return std::vector<double>(v.data(), v.data() + v.size());
}

cplx as_complex(const json& v, const std::string& ctx) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ValidationError(ctx + ": expected a number or [re, im]");
}

// Steady profile from U0 / U1II / c2_guess.
SteadyProfile profile_from(const SystemDef& sys, const json& block, const Tolerances& tol) {
  const Vec u0 = config::vector(block, "U0", "config");
  if (u0.size() != sys.n) throw ValidationError("config: U0 must have " + std::to_string(sys.n) + " entries");
  const Vec u1 = config::vector(block, "U1II", "config");
  if (u1.size() != sys.m()) throw ValidationError("config: U1II must have " + std::to_string(sys.m()) + " entries");
  if (!sys.in_domain(u0)) throw ValidationError("config: U0 lies outside the admissible set of the system");
  const auto guess_opt = config::vector_opt(block, "c2_guess", "config");
  const Vec guess = guess_opt ? *guess_opt : Vec::Zero(sys.m());
  if (guess.size() != sys.m()) throw ValidationError("config: c2_guess has wrong dimension");
  SteadyProfile p = solve_steady(sys, u0, u1, guess, tol.solve);
  if (!p.converged) {
    std::ostringstream os;
    os << "steady solve did not converge (residual " << p.residual << " after " << p.iterations << " iterations)";
    throw NumericalError(os.str());
  }
  return p;
}

ojson sample_json(const EvansSample& s) {
  ojson j;
  j["re"] = s.lambda.real();
  j["im"] = s.lambda.imag();
  j["log_abs_d"] = s.d.log_mag;
  j["phase"] = s.d.phase;
  j["transversality"] = s.transversality;
  return j;
}

std::vector<double> sample_row(const EvansSample& s) {
  return {s.lambda.real(), s.lambda.imag(), s.d.log_mag, s.d.phase, s.transversality};
}

const std::vector<std::string> kScanColumns = {"re_lambda", "im_lambda", "log_abs_d", "phase", "transversality"};

// ---------------------------------------------------------------- commands

void cmd_check(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config, {"command", "system", "tolerances", "samples", "out", "seed"}, "config");
  const SystemDef sys = load_system(c.config);
  const json& s = require(c.config, "samples");
  if (!s.is_array() || s.empty()) throw ValidationError("config: samples must be a nonempty array of states");
  std::vector<Vec> samples;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Vec v = config::as_vector(s[i], "samples[" + std::to_string(i) + "]");
    if (v.size() != sys.n) throw ValidationError("config: sample has wrong dimension");
    samples.push_back(v);
  }
  const AssumptionReport rep = check_assumptions(sys, samples, tol.check_tol);
  ojson body;
  body["system"] = sys.params;
  body["report"] = to_json(rep);
  io::write_json(path_in(c, "check.json"), c.prov, body);
  say("system " + sys.name + ": H1 " + to_string(rep.h1.verdict) + ", H2 " + to_string(rep.h2.verdict) + ", H3 " +
      to_string(rep.h3.verdict) + ", speccond " + to_string(rep.speccond.verdict) + ", fsymm " +
      to_string(rep.fsymm.verdict));
  if (rep.speccond.witness) {
    const cplx w = rep.speccond.witness->eigenvalue;
    say("speccond witness eigenvalue " + fmt(w.real()) + (w.imag() >= 0 ? "+" : "") + fmt(w.imag()) + "i");
  }
}

void cmd_solve(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config, {"command", "system", "tolerances", "U0", "U1II", "c2_guess", "out", "seed"}, "config");
  const SystemDef sys = load_system(c.config);
  const SteadyProfile p = profile_from(sys, c.config, tol);
  std::vector<std::string> comments;
  comments.push_back("c2: " + io::to_json(p.constants.c2).dump());
  comments.push_back("residual: " + fmt(p.residual));
  comments.push_back("det_dphi: " + fmt(p.det_dphi));
  std::vector<std::string> cols{"x"};
  for (int i = 1; i <= sys.n; ++i) cols.push_back("U" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    std::vector<double> r{p.grid[i]};
    for (int k = 0; k < sys.n; ++k) r.push_back(p.states[i][k]);
    rows.push_back(r);
  }
  io::write_csv(path_in(c, "profile.csv"), c.prov, comments, cols, rows);
  ojson body;
  body["system"] = sys.params;
  body["c2"] = io::to_json(p.constants.c2);
  body["residual"] = p.residual;
  body["det_dphi"] = p.det_dphi;
  body["dphi"] = io::to_json(p.dphi);
  body["nondegenerate"] = p.nondegenerate;
  body["iterations"] = p.iterations;
  if (sys.entropy) {
    const EntropyDiagnostic e = entropy_dissipation(sys, p);
    body["entropy"] = {{"boundary_term", e.boundary_term}, {"dissipation", e.dissipation},
                       {"min_integrand", e.min_integrand}};
  }
  body["notes"] = p.notes;
  io::write_json(path_in(c, "solve.json"), c.prov, body);
  say("converged in " + std::to_string(p.iterations) + " iterations, residual " + fmt(p.residual) + ", det dPhi " +
      fmt(p.det_dphi));
}

Contour parse_contour(const json& b) {
  const std::string ctx = "contour";
  config::require_object(b, ctx);
  config::allow_keys(b, {"kind", "radius", "center", "turns"}, ctx);
  const std::string kind = config::string_or(b, "kind", "half_disk", ctx);
  const double r = config::number(b, "radius", ctx);
  if (!(r > 0.0)) throw ValidationError("contour.radius must be positive");
  if (kind == "half_disk") {
    config::allow_keys(b, {"kind", "radius"}, ctx);
    return Contour::half_disk(r);
  }
  if (kind == "circle") {
    const cplx cen = b.contains("center") ? as_complex(b.at("center"), "contour.center") : cplx(0.0, 0.0);
    const long long turns = config::integer_or(b, "turns", 1, ctx);
    if (turns < 1 || turns > 100) throw ValidationError("contour.turns out of range");
    return Contour::circle(cen, r, static_cast<int>(turns));
  }
  throw ValidationError("contour.kind must be 'half_disk' or 'circle'");
}

ojson contour_json(const Contour& k) {
  ojson j;
  j["kind"] = k.kind == Contour::Kind::half_disk ? "half_disk" : "circle";
  j["center"] = {k.center.real(), k.center.imag()};
  j["radius"] = k.radius;
  j["turns"] = k.turns;
  return j;
}

void cmd_evans_scan(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config,
                     {"command", "system", "tolerances", "U0", "U1II", "c2_guess", "lambdas", "contour", "zeros", "out",
                      "seed"},
                     "config");
  if (!c.config.contains("lambdas") && !c.config.contains("contour") && !c.config.contains("zeros"))
    throw ValidationError("config: evans-scan needs 'lambdas', 'contour' or 'zeros'");
  const SystemDef sys = load_system(c.config);
  const SteadyProfile p = profile_from(sys, c.config, tol);
  if (c.config.contains("lambdas")) {
    const json& l = c.config.at("lambdas");
    if (!l.is_array() || l.empty()) throw ValidationError("config: lambdas must be a nonempty array");
    std::vector<cplx> lambdas;
    for (std::size_t i = 0; i < l.size(); ++i) lambdas.push_back(as_complex(l[i], "lambdas"));
    std::vector<EvansSample> out(lambdas.size());
    parallel_for(lambdas.size(), c.jobs, [&](std::size_t i) { out[i] = evans_eval(sys, p, lambdas[i], tol.evans); });
    std::vector<std::vector<double>> rows;
    for (const auto& s : out) rows.push_back(sample_row(s));
    io::write_csv(path_in(c, "evans_scan.csv"), c.prov, {}, kScanColumns, rows);
    say("evaluated D at " + std::to_string(out.size()) + " points");
  }
  if (c.config.contains("contour")) {
    const Contour k = parse_contour(c.config.at("contour"));
    const WindingResult w = winding_count(sys, p, k, c.jobs, tol.evans);
    ojson body;
    body["contour"] = contour_json(k);
    body["winding"] = w.winding;
    body["total_phase"] = w.total_phase;
    body["min_transversality"] = w.min_transversality;
    ojson samples = ojson::array();
    for (const auto& s : w.samples) samples.push_back(sample_json(s));
    body["samples"] = samples;
    io::write_json(path_in(c, "contour.json"), c.prov, body);
    say("winding number " + std::to_string(w.winding) + " (" + std::to_string(w.samples.size()) + " samples)");
  }
  if (c.config.contains("zeros")) {
    const json& z = c.config.at("zeros");
    config::require_object(z, "zeros");
    config::allow_keys(z, {"center", "radius", "samples"}, "zeros");
    const cplx cen = z.contains("center") ? as_complex(z.at("center"), "zeros.center") : cplx(0.0, 0.0);
    const double r = config::number(z, "radius", "zeros");
    const long long n = config::integer_or(z, "samples", 128, "zeros");
    if (n < 8 || n > 100000) throw ValidationError("zeros.samples out of range");
    const ContourZeros cz = locate_zeros(sys, p, cen, r, static_cast<int>(n), c.jobs, tol.evans);
    ojson body;
    body["center"] = {cen.real(), cen.imag()};
    body["radius"] = r;
    body["count"] = cz.count;
    ojson zs = ojson::array();
    for (const cplx& v : cz.zeros) zs.push_back({v.real(), v.imag()});
    body["zeros"] = zs;
    io::write_json(path_in(c, "zeros.json"), c.prov, body);
    say("zeros inside the circle: " + std::to_string(cz.count));
  }
}

void cmd_index(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config,
                     {"command", "system", "tolerances", "U0", "U1II", "c2_guess", "lambda_max", "out", "seed"}, "config");
  const SystemDef sys = load_system(c.config);
  const SteadyProfile p = profile_from(sys, c.config, tol);
  std::optional<double> lmax;
  if (c.config.contains("lambda_max")) {
    lmax = config::number(c.config, "lambda_max", "config");
    if (!(*lmax > 0.0)) throw ValidationError("config: lambda_max must be positive");
  }
  const StabilityVerdict v = stability_index(sys, p, lmax, c.jobs, tol.evans);
  std::vector<std::vector<double>> rows;
  for (const auto& s : v.samples) rows.push_back(sample_row(s));
  io::write_csv(path_in(c, "index.csv"), c.prov, {}, kScanColumns, rows);
  ojson body;
  body["mu"] = v.mu;
  body["lambda_max"] = v.lambda_max_used;
  body["d_zero"] = {{"log_abs", v.d_zero.log_mag}, {"phase", v.d_zero.phase}};
  body["det_dphi"] = p.det_dphi;
  body["real_axis_sign_changes"] = v.real_axis_sign_changes;
  body["sign_change_locations"] = v.sign_change_locations;
  body["warnings"] = v.warnings;
  io::write_json(path_in(c, "index.json"), c.prov, body);
  say("stability index mu = " + std::to_string(v.mu) + ", real-axis sign changes " +
      std::to_string(v.real_axis_sign_changes) + " on [0, " + fmt(v.lambda_max_used) + "]");
}

void cmd_zs_check(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config, {"command", "system", "tolerances", "U0", "U1II", "c2_guess", "cases", "out", "seed"},
                     "config");
  const SystemDef sys = load_system(c.config);
  std::vector<json> cases;
  if (c.config.contains("cases")) {
    const json& cs = c.config.at("cases");
    if (!cs.is_array() || cs.empty()) throw ValidationError("config: cases must be a nonempty array");
    for (const auto& k : cs) {
      config::require_object(k, "cases[]");
      config::allow_keys(k, {"U0", "U1II", "c2_guess"}, "cases[]");
      cases.push_back(k);
    }
  } else {
    cases.push_back(c.config);
  }
  std::vector<std::optional<ZsReport>> reports(cases.size());
  std::vector<std::string> errors(cases.size());
  std::vector<SteadyProfile> profiles(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) profiles[i] = profile_from(sys, cases[i], tol);
  parallel_for(cases.size(), c.jobs, [&](std::size_t i) { reports[i] = evans_at_zero(sys, profiles[i], tol.evans); });
  ojson rows = ojson::array();
  std::vector<std::vector<double>> csv;
  int agree = 0, nondeg = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const ZsReport& z = *reports[i];
    ojson r;
    r["U1II"] = io::to_json(profiles[i].u1ii);
    r["c2"] = io::to_json(profiles[i].constants.c2);
    r["log_abs_d0"] = z.d0.log_mag;
    r["sign_d0"] = z.sign_d0;
    r["det_dphi"] = z.det_dphi;
    r["sign_det_dphi"] = z.sign_dphi;
    r["degenerate"] = z.degenerate;
    r["signs_agree"] = z.signs_agree;
    r["ratio"] = z.ratio;
    rows.push_back(r);
    if (!z.degenerate) {
      ++nondeg;
      if (z.signs_agree) ++agree;
    }
    csv.push_back({static_cast<double>(i), z.d0.log_mag, static_cast<double>(z.sign_d0), z.det_dphi,
                   static_cast<double>(z.sign_dphi), z.ratio});
  }
  io::write_csv(path_in(c, "zs.csv"), c.prov, {},
                {"case", "log_abs_d0", "sign_d0", "det_dphi", "sign_det_dphi", "ratio"}, csv);
  ojson body;
  body["cases"] = rows;
  body["nondegenerate"] = nondeg;
  body["signs_agree"] = agree;
  io::write_json(path_in(c, "zs.json"), c.prov, body);
  say("sign D(0) = sign det dPhi in " + std::to_string(agree) + " of " + std::to_string(nondeg) +
      " nondegenerate cases");
}

void cmd_classify(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config, {"command", "gas", "tolerances", "out", "seed"}, "config");
  const GasBoundaryData g = gas_from_json(require(c.config, "gas"));
  const InviscidConfig cfg = classify_inviscid(g, {tol.shock_tol});
  io::write_json(path_in(c, "classify.json"), c.prov, to_json(cfg));
  std::string line = "kind=" + to_string(cfg.kind) + ", rho*=" + fmt(cfg.rho_star);
  if (cfg.shock_location) line += ", x_s=" + fmt(*cfg.shock_location);
  if (cfg.interior_state) line += ", interior=" + fmt(*cfg.interior_state);
  say(line);
}

void cmd_sweep_nu(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config, {"command", "gas", "tolerances", "nu_list", "p_list", "out", "seed"}, "config");
  const GasBoundaryData g = gas_from_json(require(c.config, "gas"));
  const std::vector<double> nus = number_list(c.config, "nu_list");
  const std::vector<double> ps = c.config.contains("p_list") ? number_list(c.config, "p_list") : std::vector<double>{1.0, 2.0};
  const ConvergenceTable t = convergence_study(g, nus, ps, c.jobs, {tol.shock_tol});
  std::vector<std::string> cols{"nu"};
  for (double p : ps) cols.push_back("error_L" + fmt(p));
  const bool shock = t.config.shock_location.has_value();
  const bool dbl = t.config.kind == ConfigKind::DoubleCharacteristicBL;
  if (shock) cols.push_back("x_s");
  if (dbl) cols.push_back("L1_over_nu_log_inv_nu");
  std::vector<std::vector<double>> rows;
  for (const auto& r : t.rows) {
    std::vector<double> row{r.nu};
    row.insert(row.end(), r.errors.begin(), r.errors.end());
    if (shock) row.push_back(*r.shock_location);
    if (dbl) row.push_back(*r.nu_log_ratio);
    rows.push_back(row);
  }
  std::vector<std::string> trailing;
  for (std::size_t k = 0; k < ps.size(); ++k)
    trailing.push_back("slope_L" + fmt(ps[k]) + ": " + fmt(t.fits[k].slope) +
                       (t.fits[k].accepted ? "" : " (rejected: non-monotone errors)"));
  if (t.shock_fit)
    trailing.push_back("slope_shock_location: " + fmt(t.shock_fit->slope) +
                       (t.shock_fit->accepted ? "" : " (rejected: non-monotone errors)"));
  io::write_csv(path_in(c, "sweep_nu.csv"), c.prov, {"kind: " + to_string(t.config.kind)}, cols, rows, trailing);
  say("configuration " + to_string(t.config.kind));
  for (const auto& s : trailing) say(s);
}

void cmd_large_visc(Context& c, const Tolerances&) {
  config::allow_keys(c.config, {"command", "full_gas", "tolerances", "alpha_list", "out", "seed"}, "config");
  const FullGasLimitParams p = full_gas_limit_from_json(require(c.config, "full_gas"));
  const std::vector<double> alphas = number_list(c.config, "alpha_list");
  const LargeViscTable t = full_gas_large_visc(p, alphas, c.jobs);
  std::vector<std::vector<double>> rows;
  for (const auto& r : t.rows)
    rows.push_back({r.alpha, r.nu, r.converged ? r.h1_error : std::nan(""), r.boundary_mismatch,
                    r.converged ? 1.0 : 0.0});
  std::vector<std::string> trailing;
  if (t.fit) trailing.push_back("slope_H1: " + fmt(t.fit->slope) + (t.fit->accepted ? "" : " (rejected)"));
  for (const auto& w : t.warnings) trailing.push_back("warning: " + w);
  io::write_csv(path_in(c, "large_visc.csv"), c.prov, {"ratio nu/alpha: " + fmt(p.ratio)},
                {"alpha", "nu", "h1_error", "boundary_mismatch", "converged"}, rows, trailing);
  for (const auto& s : trailing) say(s);
}

void cmd_degree(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config,
                     {"command", "system", "tolerances", "U0", "U1II", "box", "n_starts", "dedup_radius", "out", "seed"},
                     "config");
  const SystemDef sys = load_system(c.config);
  const Vec u0 = config::vector(c.config, "U0", "config");
  const Vec u1 = config::vector(c.config, "U1II", "config");
  if (u0.size() != sys.n || u1.size() != sys.m()) throw ValidationError("config: U0/U1II have wrong dimension");
  const json& box = require(c.config, "box");
  config::require_object(box, "box");
  config::allow_keys(box, {"lo", "hi"}, "box");
  const Vec lo = config::vector(box, "lo", "box"), hi = config::vector(box, "hi", "box");
  DegreeOptions opt;
  opt.n_starts = static_cast<int>(config::integer_or(c.config, "n_starts", opt.n_starts, "config"));
  if (opt.n_starts < 1 || opt.n_starts > 100000) throw ValidationError("config: n_starts out of range");
  opt.dedup_radius = config::number_or(c.config, "dedup_radius", opt.dedup_radius, "config");
  opt.seed = c.seed;
  opt.jobs = c.jobs;
  opt.degeneracy = tol.solve.degeneracy;
  opt.solve = tol.solve;
  const DegreeResult d = brouwer_degree(sys, u0, u1, lo, hi, opt);
  ojson body;
  body["degree"] = d.degree;
  ojson roots = ojson::array();
  for (const auto& r : d.roots)
    roots.push_back({{"c2", io::to_json(r.c2)}, {"det_dphi", r.det_dphi}, {"sign", r.sign},
                     {"degenerate", r.degenerate}, {"hits", r.hits}});
  body["roots"] = roots;
  body["failed_starts"] = d.failed_starts;
  body["outside_box"] = d.outside_box;
  body["warnings"] = d.warnings;
  io::write_json(path_in(c, "degree.json"), c.prov, body);
  say("sampled degree " + std::to_string(d.degree) + " from " + std::to_string(d.roots.size()) + " distinct roots");
}

void cmd_standing_shock(Context& c, const Tolerances& tol) {
  config::allow_keys(c.config, {"command", "shock", "tolerances", "epsilons", "out", "seed"}, "config");
  const json& s = require(c.config, "shock");
  config::require_object(s, "shock");
  config::allow_keys(s, {"m", "gamma", "a", "rho_minus", "rho_plus"}, "shock");
  ShockSpec spec;
  spec.m = config::number_or(s, "m", spec.m, "shock");
  spec.gamma = config::number_or(s, "gamma", spec.gamma, "shock");
  spec.a = config::number_or(s, "a", spec.a, "shock");
  spec.rho_minus = config::number(s, "rho_minus", "shock");
  if (s.contains("rho_plus")) spec.rho_plus = config::number(s, "rho_plus", "shock");
  const std::vector<double> eps = number_list(c.config, "epsilons");
  const StandingShockTable t = standing_shock_evans(spec, eps, c.jobs, tol.evans);
  std::vector<std::vector<double>> rows;
  ojson body;
  body["rho_minus"] = t.rho_minus;
  body["rho_plus"] = t.rho_plus;
  ojson jr = ojson::array();
  for (const auto& r : t.rows) {
    rows.push_back({r.epsilon, r.d0.log_mag, static_cast<double>(r.sign), r.d0_normalized.log_mag, r.ratio_to_first,
                    r.transversality});
    jr.push_back({{"epsilon", r.epsilon},
                  {"log_abs_d0", r.d0.log_mag},
                  {"sign", r.sign},
                  {"log_abs_d0_normalized", r.d0_normalized.log_mag},
                  {"ratio_to_first", r.ratio_to_first},
                  {"transversality", r.transversality},
                  {"warnings", r.warnings}});
  }
  body["rows"] = jr;
  body["one_sign"] = t.one_sign;
  body["min_ratio"] = t.min_ratio;
  io::write_csv(path_in(c, "standing_shock.csv"), c.prov, {"rho_plus: " + fmt(t.rho_plus)},
                {"epsilon", "log_abs_d0", "sign", "log_abs_d0_normalized", "ratio_to_first", "transversality"}, rows);
  io::write_json(path_in(c, "standing_shock.json"), c.prov, body);
  say(std::string("D(0) keeps one sign: ") + (t.one_sign ? "yes" : "no") + ", min normalized ratio " +
      fmt(t.min_ratio));
}

void dispatch(Context& c, const Tolerances& tol) {
  if (c.command == "check") return cmd_check(c, tol);
  if (c.command == "solve") return cmd_solve(c, tol);
  if (c.command == "evans-scan") return cmd_evans_scan(c, tol);
  if (c.command == "index") return cmd_index(c, tol);
  if (c.command == "zs-check") return cmd_zs_check(c, tol);
  if (c.command == "classify") return cmd_classify(c, tol);
  if (c.command == "sweep-nu") return cmd_sweep_nu(c, tol);
  if (c.command == "large-visc") return cmd_large_visc(c, tol);
  if (c.command == "degree") return cmd_degree(c, tol);
  if (c.command == "standing-shock") return cmd_standing_shock(c, tol);
  throw ValidationError("unknown command " + c.command);
}

void write_diagnostic(const Context& c, const std::string& kind, const std::string& what) {
  try {
    fs::create_directories(c.out_dir);
    ojson body;
    body["error"] = kind;
    body["message"] = what;
    io::write_json(path_in(c, "diagnostic.json"), c.prov, body);
  } catch (...) {
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"steadytube: steady viscous profiles, Evans functions and viscosity limits"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir = ".";
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  for (const auto& name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 1024));
    sub->add_option("--seed", seed, "random seed");
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  Context c;
  c.command = app.get_subcommands().front()->get_name();
  c.out_dir = out_dir;
  c.jobs = jobs;
  c.prov.command = c.command;
  c.prov.generated = io::utc_timestamp();
  try {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("cannot read config file " + config_path);
    try {
      c.config = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
    config::require_object(c.config, "config");
    if (c.config.contains("command")) {
      const std::string declared = config::string_or(c.config, "command", c.command, "config");
      if (declared != c.command)
        throw ValidationError("config declares command '" + declared + "' but '" + c.command + "' was invoked");
    }
    if (c.config.contains("out") && out_dir == ".") c.out_dir = config::string_or(c.config, "out", ".", "config");
    if (seed) c.seed = *seed;
    else {
      const long long s = config::integer_or(c.config, "seed", 0, "config");
      if (s < 0) throw ValidationError("config: seed must be nonnegative");
      c.seed = static_cast<std::uint64_t>(s);
    }
    const Tolerances tol = parse_tolerances(c.config);
    c.prov.config_hash = io::hex64(io::fnv1a(c.config.dump()));
    c.prov.tolerances = tol.to_json();
    c.prov.seed = c.seed;
    fs::create_directories(c.out_dir);
    dispatch(c, tol);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    write_diagnostic(c, "domain", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    write_diagnostic(c, "numerical", e.what());
    return 3;
  } catch (const UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    write_diagnostic(c, "internal", e.what());
    return 3;
  }
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace steadytube::cli
