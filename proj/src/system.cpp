#include "steadytube/system.hpp"

#include "steadytube/config.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace steadytube {

namespace {

std::string describe(const Vec& u) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < u.size(); ++i) os << (i ? ", " : "") << u[i];
  os << ")";
  return os.str();
}

bool all_finite(const Vec& u) { return u.allFinite(); }

Eigen::VectorXcd eigenvalues(const Mat& m) {
  if (m.rows() == 0) return {};
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues();
}

double sym_residual(const Mat& m) {
  const double scale = std::max(1.0, m.norm());
  return (m - m.transpose()).norm() / scale;
}

}  // namespace

bool SystemDef::in_domain(const Vec& u) const {
  if (u.size() != n || !all_finite(u)) return false;
  return domain ? domain(u) : true;
}

void SystemDef::require_domain(const Vec& u) const {
  if (u.size() != n) throw ValidationError(name + ": state has wrong dimension");
  if (!in_domain(u)) throw DomainError(name + ": state " + describe(u) + " outside the admissible set");
}

Mat fd_jacobian(const VecFn& g, const Vec& u) {
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  Vec g0 = g(u);
  Mat J(g0.size(), u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double h = base * std::max(1.0, std::abs(u[j]));
    Vec up = u, um = u;
    up[j] += h;
    um[j] -= h;
    J.col(j) = (g(up) - g(um)) / (up[j] - um[j]);
  }
  return J;
}

Mat SystemDef::jac_f0(const Vec& u) const { return jac_f0_fn ? jac_f0_fn(u) : fd_jacobian(f0, u); }

Mat SystemDef::jac_f(const Vec& u) const { return jac_f_fn ? jac_f_fn(u) : fd_jacobian(f, u); }

Mat SystemDef::db22(const Vec& u, const Vec& v) const {
  if (db22_fn) return db22_fn(u, v);
  const double vn = v.norm();
  if (vn == 0.0) return Mat::Zero(m(), m());
  // directional central difference along v
  const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, u.norm()) / vn;
  return (b22(u + h * v) - b22(u - h * v)) / (2.0 * h);
}

JacobianBlocks evaluate_blocks(const SystemDef& sys, const Vec& u) {
  sys.require_domain(u);
  JacobianBlocks b;
  const int r = sys.r, m = sys.m();
  b.a0 = sys.jac_f0(u);
  b.a = sys.jac_f(u);
  b.a11 = b.a.topLeftCorner(r, r);
  b.a12 = b.a.topRightCorner(r, m);
  b.a21 = b.a.bottomLeftCorner(m, r);
  b.a22 = b.a.bottomRightCorner(m, m);
  b.b22 = sys.b22(u);
  if (r > 0) {
    Eigen::JacobiSVD<Mat> svd(b.a11);
    const auto& s = svd.singularValues();
    b.a11_rcond = s[0] > 0 ? s[s.size() - 1] / s[0] : 0.0;
    b.a11_invertible = b.a11_rcond > 1e-14;
  }
  return b;
}

Mat reduced_matrix(const JacobianBlocks& b) {
  Mat inner = b.a22;
  if (b.a11.rows() > 0) inner -= b.a21 * b.a11.partialPivLu().solve(b.a12);
  return b.b22.partialPivLu().solve(inner);
}

JacobianBlocks normalize_blocks(const JacobianBlocks& b) {
  JacobianBlocks nb = b;
  const Eigen::Index r = b.a11.rows(), m = b.a22.rows();
  Mat ahat = b.a0.partialPivLu().solve(b.a);
  nb.a0 = Mat::Identity(r + m, r + m);
  nb.a = ahat;
  nb.a11 = ahat.topLeftCorner(r, r);
  nb.a12 = ahat.topRightCorner(r, m);
  nb.a21 = ahat.bottomLeftCorner(m, r);
  nb.a22 = ahat.bottomRightCorner(m, m);
  nb.b22 = b.a0.bottomRightCorner(m, m).partialPivLu().solve(b.b22);
  return nb;
}

Mat reduced_matrix_symmetrized(const JacobianBlocks& b, const Mat& s) {
  JacobianBlocks nb = normalize_blocks(b);
  const Eigen::Index r = nb.a11.rows(), m = nb.a22.rows();
  Mat s11 = s.topLeftCorner(r, r), s22 = s.bottomRightCorner(m, m);
  Mat lhs = s22 * nb.b22;
  Mat rhs = s22 * nb.a22;
  if (r > 0) {
    Mat sa12 = s11 * nb.a12;
    rhs -= sa12.transpose() * (s11 * nb.a11).partialPivLu().solve(sa12);
  }
  return lhs.partialPivLu().solve(rhs);
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::not_applicable: return "N/A";
    case Verdict::not_evaluable: return "NOT_EVALUABLE";
  }
  return "?";
}

namespace {

void record_fail(CheckResult& c, cplx ev, const Vec& u, const std::string& detail) {
  if (c.verdict != Verdict::fail) {
    c.verdict = Verdict::fail;
    c.witness = Witness{ev, u, detail};
  }
}

}  // namespace

AssumptionReport check_assumptions(const SystemDef& sys, const std::vector<Vec>& samples, double tol) {
  AssumptionReport rep;
  rep.samples = samples.size();
  if (samples.empty()) throw ValidationError("check_assumptions: no sample states");
  const double inf = std::numeric_limits<double>::infinity();
  rep.h1 = {Verdict::pass, inf, {}, "min Re eig((A0_22)^-1 B22)"};
  rep.h2 = sys.r > 0 ? CheckResult{Verdict::pass, inf, {}, "min eig(A11), all real"}
                     : CheckResult{Verdict::not_applicable, 0.0, {}, "r = 0"};
  rep.speccond = {Verdict::pass, inf, {}, "min |mu - 2 pi i k| over eig(reduced matrix), k != 0"};
  rep.h3 = sys.symmetrizer ? CheckResult{Verdict::pass, inf, {}, "min eigenvalue of the positivity tests"}
                           : CheckResult{Verdict::not_applicable, 0.0, {}, "no symmetrizer provided"};
  rep.fsymm = sys.r > 0 ? CheckResult{Verdict::pass, 0.0, {}, "max relative asymmetry of A11"}
                        : CheckResult{Verdict::not_applicable, 0.0, {}, "r = 0"};

  for (const Vec& u : samples) {
    if (!sys.in_domain(u)) throw ValidationError("check_assumptions: sample " + describe(u) + " outside domain");
    const JacobianBlocks b = evaluate_blocks(sys, u);
    const int r = sys.r, m = sys.m();

    // H1
    Mat h1m = b.a0.bottomRightCorner(m, m).partialPivLu().solve(b.b22);
    for (const cplx& ev : eigenvalues(h1m)) {
      rep.h1.margin = std::min(rep.h1.margin, ev.real());
      if (!(ev.real() > tol)) record_fail(rep.h1, ev, u, "eigenvalue of (A0_22)^-1 B22 with Re <= tol");
    }

    // H2 and fsymm
    if (r > 0) {
      for (const cplx& ev : eigenvalues(b.a11)) {
        const bool real = std::abs(ev.imag()) < tol * (1.0 + std::abs(ev));
        rep.h2.margin = std::min(rep.h2.margin, real ? ev.real() : -std::abs(ev.imag()));
        if (!real) record_fail(rep.h2, ev, u, "non-real eigenvalue of A11");
        else if (!(ev.real() > tol)) record_fail(rep.h2, ev, u, "eigenvalue of A11 not positive");
      }
      const double asym = sym_residual(b.a11);
      rep.fsymm.margin = std::max(rep.fsymm.margin, asym);
      if (asym > tol) record_fail(rep.fsymm, cplx(asym, 0.0), u, "A11 not symmetric (relative residual)");
    }

    // speccond
    if (!b.a11_invertible) {
      if (rep.speccond.verdict == Verdict::pass) {
        rep.speccond.verdict = Verdict::not_evaluable;
        rep.speccond.witness = Witness{cplx(b.a11_rcond, 0.0), u, "A11 singular; reduced matrix undefined"};
      }
      if (rep.h2.verdict != Verdict::fail) record_fail(rep.h2, cplx(0.0, 0.0), u, "A11 singular");
    } else if (rep.speccond.verdict != Verdict::not_evaluable) {
      const Mat at = reduced_matrix(b);
      const Eigen::VectorXcd evs = eigenvalues(at);
      double rho = 0.0;
      for (const cplx& ev : evs) rho = std::max(rho, std::abs(ev));
      const int kmax = static_cast<int>(std::ceil(rho / (2.0 * std::numbers::pi))) + 1;
      for (const cplx& ev : evs) {
        for (int k = -kmax; k <= kmax; ++k) {
          if (k == 0) continue;
          const double d = std::abs(ev - cplx(0.0, 2.0 * std::numbers::pi * k));
          rep.speccond.margin = std::min(rep.speccond.margin, d);
          if (!(d > tol))
            record_fail(rep.speccond, ev, u, "eigenvalue of the reduced matrix at 2*pi*i*k, k=" + std::to_string(k));
        }
      }
    }

    // H3 on the normalised system
    if (sys.symmetrizer) {
      const JacobianBlocks nb = normalize_blocks(b);
      const Mat s = sys.symmetrizer(u);
      auto fail3 = [&](double val, const std::string& what) { record_fail(rep.h3, cplx(val, 0.0), u, what); };
      const double offdiag = r > 0 ? (s.topRightCorner(r, m).norm() + s.bottomLeftCorner(m, r).norm()) /
                                         std::max(1.0, s.norm())
                                   : 0.0;
      if (offdiag > tol) fail3(offdiag, "symmetrizer not block diagonal");
      const double res0 = sym_residual(s);
      if (res0 > tol) fail3(res0, "S A0 not symmetric");
      const double res1 = sym_residual(s * nb.a);
      if (res1 > tol) fail3(res1, "S A not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat> e0(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
      const double min0 = e0.eigenvalues().minCoeff();
      Mat sb = s.bottomRightCorner(m, m) * nb.b22;
      Eigen::SelfAdjointEigenSolver<Mat> e1(sb + sb.transpose(), Eigen::EigenvaluesOnly);
      const double min1 = e1.eigenvalues().minCoeff();
      rep.h3.margin = std::min({rep.h3.margin, min0, min1});
      if (!(min0 > tol)) fail3(min0, "S A0 not positive definite");
      if (!(min1 > tol)) fail3(min1, "S22 B22 + (S22 B22)^T not positive definite");
    }
  }
  return rep;
}

// ---------------------------------------------------------------- built-ins

SystemDef make_isentropic_ns(const IsentropicParams& p) {
  if (!(p.gamma > 1.0)) throw ValidationError("isentropic_ns: gamma must exceed 1");
  if (!(p.a > 0.0)) throw ValidationError("isentropic_ns: a must be positive");
  if (!(p.nu > 0.0)) throw ValidationError("isentropic_ns: nu must be positive");
  const double g = p.gamma, a = p.a, nu = p.nu;
  auto pres = [=](double rho) { return a * std::pow(rho, g); };
  auto dpres = [=](double rho) { return a * g * std::pow(rho, g - 1.0); };

  SystemDef s;
  s.name = "isentropic_ns";
  s.n = 2;
  s.r = 1;
  s.params = {{"system", "isentropic_ns"}, {"gamma", g}, {"a", a}, {"nu", nu}};
  s.domain = [](const Vec& u) { return u[0] > 0.0; };
  s.f0 = [](const Vec& u) { return Vec{{u[0], u[0] * u[1]}}; };
  s.f = [=](const Vec& u) { return Vec{{u[0] * u[1], u[0] * u[1] * u[1] + pres(u[0])}}; };
  s.b22 = [=](const Vec&) { return Mat::Constant(1, 1, nu); };
  s.jac_f0_fn = [](const Vec& u) { return Mat{{1.0, 0.0}, {u[1], u[0]}}; };
  s.jac_f_fn = [=](const Vec& u) {
    const double rho = u[0], v = u[1];
    return Mat{{v, rho}, {v * v + dpres(rho), 2.0 * rho * v}};
  };
  s.db22_fn = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  s.symmetrizer = [=](const Vec& u) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = dpres(u[0]) / (u[0] * u[0]);
    m(1, 1) = 1.0;
    return m;
  };
  EntropyPair ent;
  auto big_p = [=](double rho) { return a * std::pow(rho, g) / (g - 1.0); };
  ent.eta = [=](const Vec& u) { return 0.5 * u[0] * u[1] * u[1] + big_p(u[0]); };
  ent.flux = [=](const Vec& u) { return u[1] * (0.5 * u[0] * u[1] * u[1] + big_p(u[0]) + pres(u[0])); };
  ent.gradient = [=](const Vec& u) {
    return Vec{{-0.5 * u[1] * u[1] + a * g * std::pow(u[0], g - 1.0) / (g - 1.0), u[1]}};
  };
  ent.hessian = [=](const Vec& u) {
    const double rho = u[0], v = u[1];
    return Mat{{(v * v + dpres(rho)) / rho, -v / rho}, {-v / rho, 1.0 / rho}};
  };
  s.entropy = ent;
  return s;
}

SystemDef make_full_gas(const FullGasParams& p) {
  if (!(p.Gamma > 0.0)) throw ValidationError("full_gas: Gamma must be positive");
  if (!(p.alpha > 0.0)) throw ValidationError("full_gas: alpha must be positive");
  if (!(p.nu > 0.0)) throw ValidationError("full_gas: nu must be positive");
  const double G = p.Gamma, al = p.alpha, nu = p.nu;
  SystemDef s;
  s.name = "full_gas";
  s.n = 3;
  s.r = 1;
  s.params = {{"system", "full_gas"}, {"Gamma", G}, {"alpha", al}, {"nu", nu}};
  s.domain = [](const Vec& u) { return u[0] > 0.0 && u[2] > 0.0; };
  s.f0 = [](const Vec& u) {
    const double rho = u[0], v = u[1], e = u[2];
    return Vec{{rho, rho * v, rho * (e + 0.5 * v * v)}};
  };
  s.f = [=](const Vec& u) {
    const double rho = u[0], v = u[1], e = u[2];
    const double pr = G * rho * e;
    return Vec{{rho * v, rho * v * v + pr, rho * v * (e + 0.5 * v * v) + pr * v}};
  };
  s.b22 = [=](const Vec& u) { return Mat{{al, 0.0}, {al * u[1], nu}}; };
  s.jac_f0_fn = [](const Vec& u) {
    const double rho = u[0], v = u[1], e = u[2];
    return Mat{{1.0, 0.0, 0.0}, {v, rho, 0.0}, {e + 0.5 * v * v, rho * v, rho}};
  };
  s.jac_f_fn = [=](const Vec& u) {
    const double rho = u[0], v = u[1], e = u[2];
    const double h = e + 0.5 * v * v + G * e;
    return Mat{{v, rho, 0.0},
               {v * v + G * e, 2.0 * rho * v, G * rho},
               {v * h, rho * h + rho * v * v, rho * v * (1.0 + G)}};
  };
  s.db22_fn = [=](const Vec&, const Vec& dv) { return Mat{{0.0, 0.0}, {al * dv[1], 0.0}}; };
  s.symmetrizer = [=](const Vec& u) {
    Mat m = Mat::Zero(3, 3);
    m(0, 0) = G * u[2] / (u[0] * u[0]);
    m(1, 1) = 1.0;
    m(2, 2) = 1.0 / u[2];
    return m;
  };
  return s;
}

SystemDef make_linear(const Mat& a, const Mat& b22, std::optional<Mat> a0, std::optional<Mat> symmetrizer) {
  const Eigen::Index n = a.rows();
  if (n == 0 || a.cols() != n) throw ValidationError("linear: A must be square and nonempty");
  const Eigen::Index m = b22.rows();
  if (b22.cols() != m || m < 1 || m > n) throw ValidationError("linear: B22 must be square with 1 <= size <= n");
  const Mat A0 = a0 ? *a0 : Mat::Identity(n, n);
  if (A0.rows() != n || A0.cols() != n) throw ValidationError("linear: A0 has wrong shape");
  const int r = static_cast<int>(n - m);
  if (r > 0) {
    if ((A0.topLeftCorner(r, r) - Mat::Identity(r, r)).norm() > 1e-14 || A0.topRightCorner(r, m).norm() > 0.0)
      throw ValidationError("linear: A0 must be lower block triangular with identity top-left block");
  }
  if (std::abs(A0.bottomRightCorner(m, m).determinant()) < 1e-14) throw ValidationError("linear: A0 singular");
  if (std::abs(b22.determinant()) < 1e-14) throw ValidationError("linear: B22 singular");
  if (symmetrizer && (symmetrizer->rows() != n || symmetrizer->cols() != n))
    throw ValidationError("linear: S has wrong shape");

  SystemDef s;
  s.name = "linear";
  s.n = static_cast<int>(n);
  s.r = r;
  s.f0 = [A0](const Vec& u) { return Vec(A0 * u); };
  s.f = [a](const Vec& u) { return Vec(a * u); };
  s.b22 = [b22](const Vec&) { return b22; };
  s.jac_f0_fn = [A0](const Vec&) { return A0; };
  s.jac_f_fn = [a](const Vec&) { return a; };
  s.db22_fn = [m](const Vec&, const Vec&) { return Mat::Zero(m, m); };
  if (symmetrizer) {
    Mat sm = *symmetrizer;
    s.symmetrizer = [sm](const Vec&) { return sm; };
  }
  return s;
}

SystemDef make_rotation_example() {
  const double w = 2.0 * std::numbers::pi;
  SystemDef s = make_linear(Mat{{0.0, w}, {-w, 0.0}}, Mat::Identity(2, 2));
  s.name = "rotation_example";
  s.params = {{"system", "rotation_example"}};
  return s;
}

SystemDef builtin(const std::string& name, const nlohmann::json& params) {
  namespace cfg = config;
  const std::string ctx = "system[" + name + "]";
  cfg::require_object(params, ctx);
  if (name == "isentropic_ns") {
    cfg::allow_keys(params, {"gamma", "a", "nu"}, ctx);
    IsentropicParams p;
    p.gamma = cfg::number_or(params, "gamma", p.gamma, ctx);
    p.a = cfg::number_or(params, "a", p.a, ctx);
    p.nu = cfg::number_or(params, "nu", p.nu, ctx);
    return make_isentropic_ns(p);
  }
  if (name == "full_gas") {
    cfg::allow_keys(params, {"Gamma", "alpha", "nu"}, ctx);
    FullGasParams p;
    p.Gamma = cfg::number_or(params, "Gamma", p.Gamma, ctx);
    p.alpha = cfg::number_or(params, "alpha", p.alpha, ctx);
    p.nu = cfg::number_or(params, "nu", p.nu, ctx);
    return make_full_gas(p);
  }
  if (name == "linear") {
    cfg::allow_keys(params, {"A", "B22", "r", "A0", "S"}, ctx);
    Mat a = cfg::matrix(params, "A", ctx);
    Mat b = cfg::matrix(params, "B22", ctx);
    const long long r = cfg::integer_or(params, "r", a.rows() - b.rows(), ctx);
    if (r != a.rows() - b.rows()) throw ValidationError(ctx + ": r inconsistent with the sizes of A and B22");
    SystemDef s = make_linear(a, b, cfg::matrix_opt(params, "A0", ctx), cfg::matrix_opt(params, "S", ctx));
    s.params = nlohmann::ordered_json::object();
    s.params["system"] = "linear";
    for (auto it = params.begin(); it != params.end(); ++it) s.params[it.key()] = it.value();
    return s;
  }
  if (name == "rotation_example") {
    cfg::allow_keys(params, {}, ctx);
    return make_rotation_example();
  }
  throw ValidationError("unknown system '" + name + "'");
}

SystemDef system_from_json(const nlohmann::json& block) {
  config::require_object(block, "system");
  if (!block.contains("system") || !block.at("system").is_string())
    throw ValidationError("system: missing string key 'system'");
  nlohmann::json params = block;
  params.erase("system");
  return builtin(block.at("system").get<std::string>(), params);
}

nlohmann::ordered_json to_json(const AssumptionReport& report) {
  auto one = [](const CheckResult& c) {
    nlohmann::ordered_json j;
    j["verdict"] = to_string(c.verdict);
    j["margin"] = std::isfinite(c.margin) ? nlohmann::ordered_json(c.margin) : nlohmann::ordered_json(nullptr);
    j["note"] = c.note;
    if (c.witness) {
      nlohmann::ordered_json w;
      w["eigenvalue"] = {c.witness->eigenvalue.real(), c.witness->eigenvalue.imag()};
      nlohmann::ordered_json st = nlohmann::ordered_json::array();
      for (Eigen::Index i = 0; i < c.witness->state.size(); ++i) st.push_back(c.witness->state[i]);
      w["state"] = st;
      w["detail"] = c.witness->detail;
      j["witness"] = w;
    }
    return j;
  };
  nlohmann::ordered_json j;
  j["samples"] = report.samples;
  j["H1"] = one(report.h1);
  j["H2"] = one(report.h2);
  j["H3"] = one(report.h3);
  j["speccond"] = one(report.speccond);
  j["fsymm"] = one(report.fsymm);
  return j;
}

}  // namespace steadytube
