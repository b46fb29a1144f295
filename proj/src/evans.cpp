#include "steadytube/evans.hpp"

#include "steadytube/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

namespace steadytube {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace

LinearizedField::LinearizedField(const SystemDef& sys, const SteadyProfile& profile, cplx lambda)
    : sys_(sys), profile_(profile), lambda_(lambda) {}

LinearizedField::RealParts LinearizedField::parts(double x) const {
  const int n = sys_.n, r = sys_.r, m = sys_.m();
  const Vec u = profile_.state(x);
  const Vec du = profile_.derivative(x);
  const JacobianBlocks b = evaluate_blocks(sys_, u);
  if (!b.a11_invertible) throw NumericalError("linearized_field: A11 singular along the profile");

  Mat pv = Mat::Zero(n, m);
  Mat pf = Mat::Zero(n, n);
  if (r > 0) {
    const auto lu = b.a11.partialPivLu();
    pv.topRows(r) = -lu.solve(b.a12);
    pf.topLeftCorner(r, r) = -lu.inverse();
  }
  pv.bottomRows(m).setIdentity();

  Mat h(m, n);
  h << b.a21, b.a22;
  const Vec dii = du.tail(m);
  if (dii.norm() > 0.0) {
    for (int k = 0; k < n; ++k) h.col(k) -= sys_.db22(u, Vec::Unit(n, k)) * dii;
  }
  Mat e = Mat::Zero(m, n);
  e.rightCols(m).setIdentity();
  const auto blu = b.b22.partialPivLu();
  RealParts p;
  p.m11 = blu.solve(Mat(h * pv));
  p.m12 = blu.solve(Mat(e + h * pf));
  p.k21 = b.a0 * pv;
  p.k22 = b.a0 * pf;
  return p;
}

CMat LinearizedField::operator()(double x) const {
  const int n = sys_.n, m = sys_.m();
  const RealParts p = parts(x);
  CMat out(m + n, m + n);
  out.topLeftCorner(m, m) = p.m11.cast<cplx>();
  out.topRightCorner(m, n) = p.m12.cast<cplx>();
  out.bottomLeftCorner(n, m) = lambda_ * p.k21.cast<cplx>();
  out.bottomRightCorner(n, n) = lambda_ * p.k22.cast<cplx>();
  return out;
}

CVec LinearizedField::reconstruct_v(double x, const FluxState& z) const {
  const int n = sys_.n, r = sys_.r, m = sys_.m();
  CVec v(n);
  v.tail(m) = z.u_ii;
  if (r > 0) {
    const JacobianBlocks b = evaluate_blocks(sys_, profile_.state(x));
    const CMat a11 = b.a11.cast<cplx>();
    v.head(r) = -a11.partialPivLu().solve(CVec(z.f.head(r) + b.a12.cast<cplx>() * z.u_ii));
  }
  return v;
}

cplx trace_integral(const SystemDef& sys, const SteadyProfile& profile, cplx lambda, double a, double b) {
  if (a == b) return {0.0, 0.0};
  LinearizedField field(sys, profile, lambda);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto t11 = [&](double x) { return field.parts(x).m11.trace(); };
  auto t22 = [&](double x) { return field.parts(x).k22.trace(); };
  // split at profile nodes so sharp layers are seen by the quadrature
  std::vector<double> cuts{std::min(a, b)};
  const double lo = std::min(a, b), hi = std::max(a, b);
  const auto& g = profile.grid;
  const std::size_t stride = std::max<std::size_t>(1, g.size() / 64);
  for (std::size_t i = 0; i < g.size(); i += stride)
    if (g[i] > lo && g[i] < hi) cuts.push_back(g[i]);
  cuts.push_back(hi);
  double s11 = 0.0, s22 = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    s11 += GK::integrate(t11, cuts[i], cuts[i + 1], 12, 1e-12);
    if (lambda != cplx(0.0, 0.0)) s22 += GK::integrate(t22, cuts[i], cuts[i + 1], 12, 1e-12);
  }
  const double sgn = b >= a ? 1.0 : -1.0;
  return sgn * (cplx(s11, 0.0) + lambda * s22);
}

EvansSample evans_eval(const SystemDef& sys, const SteadyProfile& profile, cplx lambda, const EvansOptions& opt) {
  if (!std::isfinite(lambda.real()) || !std::isfinite(lambda.imag()))
    throw ValidationError("evans_eval: lambda must be finite");
  const int n = sys.n, r = sys.r, m = sys.m();
  const int dim = m + n;
  const double xm = opt.x_match;
  if (!(xm >= 0.0 && xm <= 1.0)) throw ValidationError("evans_eval: matching point outside [0,1]");

  const Vec u0 = profile.state(0.0);
  CMat yl = CMat::Zero(dim, m);
  yl.block(m + r, 0, m, m) = sys.b22(u0).cast<cplx>();
  CMat yr = CMat::Zero(dim, n);
  yr.block(m, 0, n, n).setIdentity();

  LinearizedField field(sys, profile, lambda);
  auto coeff = [&](double x) { return field(x); };
  auto left = ode::integrate_linear_matrix<cplx>(coeff, 0.0, xm, yl, opt.ode, true);
  auto right = ode::integrate_linear_matrix<cplx>(coeff, 1.0, xm, yr, opt.ode, true);
  if (!left.completed() || !right.completed()) {
    std::ostringstream os;
    os << "evans_eval: propagation failed at lambda = " << lambda;
    throw NumericalError(os.str());
  }

  EvansSample s;
  s.lambda = lambda;
  auto warn = [&](const char* side, const auto& prop) {
    if (prop.rank_deficient_at) {
      std::ostringstream os;
      os << side << " basis numerically rank deficient near x = " << *prop.rank_deficient_at;
      s.warnings.push_back(os.str());
    }
  };
  warn("left", left);
  warn("right", right);

  // orthonormalise each block; the R factors carry the remaining scale
  Eigen::HouseholderQR<CMat> ql(left.end), qr(right.end);
  const CMat qlm = ql.householderQ() * CMat::Identity(dim, m);
  const CMat qrm = qr.householderQ() * CMat::Identity(dim, n);
  double log_mag = left.log_scale + right.log_scale;
  double phase = left.phase + right.phase;
  for (int j = 0; j < m; ++j) {
    const cplx d = ql.matrixQR()(j, j);
    log_mag += std::log(std::abs(d));
    phase += std::arg(d);
  }
  for (int j = 0; j < n; ++j) {
    const cplx d = qr.matrixQR()(j, j);
    log_mag += std::log(std::abs(d));
    phase += std::arg(d);
  }
  CMat w(dim, dim);
  w << qlm, qrm;
  const cplx det = w.partialPivLu().determinant();
  s.transversality = std::abs(det);
  s.abel = trace_integral(sys, profile, lambda, xm, 1.0);
  if (s.transversality == 0.0 || !std::isfinite(s.transversality)) {
    s.d = ScaledComplex{};
  } else {
    s.d.log_mag = log_mag + std::log(s.transversality) + s.abel.real();
    s.d.phase = wrap(phase + std::arg(det) + s.abel.imag());
  }
  if (lambda.imag() == 0.0) s.sign_real = s.d.is_zero() ? 0 : s.d.real_sign();
  return s;
}

ZsReport evans_at_zero(const SystemDef& sys, const SteadyProfile& profile, const EvansOptions& opt) {
  ZsReport z;
  const EvansSample s = evans_eval(sys, profile, {0.0, 0.0}, opt);
  z.d0 = s.d;
  z.det_dphi = profile.det_dphi;
  z.sign_d0 = s.sign_real;
  z.sign_dphi = profile.det_dphi > 0 ? 1 : (profile.det_dphi < 0 ? -1 : 0);
  const double absd = s.d.is_zero() ? 0.0 : std::exp(s.d.log_mag);
  z.degenerate = absd < 1e-10 && std::abs(profile.det_dphi) < 1e-10;
  if (z.degenerate || !std::isfinite(profile.det_dphi) || profile.det_dphi == 0.0) {
    z.ratio = std::numeric_limits<double>::quiet_NaN();
    z.signs_agree = false;
  } else {
    z.signs_agree = z.sign_d0 == z.sign_dphi;
    z.ratio = z.sign_d0 * std::exp(s.d.log_mag - std::log(std::abs(profile.det_dphi))) * z.sign_dphi;
  }
  return z;
}

double default_lambda_max(const SystemDef& sys, const SteadyProfile& profile) {
  double amax = 0.0, bmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 64; ++i) {
    const Vec u = profile.state(i / 64.0);
    const JacobianBlocks b = evaluate_blocks(sys, u);
    Eigen::JacobiSVD<Mat> svd(b.a);
    amax = std::max(amax, svd.singularValues()[0]);
    Eigen::EigenSolver<Mat> es(b.b22, false);
    for (const cplx& ev : es.eigenvalues()) bmin = std::min(bmin, ev.real());
  }
  if (!(bmin > 0.0)) throw NumericalError("default_lambda_max: B22 has eigenvalues with nonpositive real part");
  return 10.0 * (1.0 + amax * amax / bmin);
}

StabilityVerdict stability_index(const SystemDef& sys, const SteadyProfile& profile, std::optional<double> lambda_max,
                                 int jobs, const EvansOptions& opt) {
  StabilityVerdict v;
  v.lambda_max_used = lambda_max ? *lambda_max : default_lambda_max(sys, profile);
  if (!(v.lambda_max_used > 0.0)) throw ValidationError("stability_index: lambda_max must be positive");
  const int npts = 64;
  std::vector<double> grid(npts);
  for (int i = 0; i < npts; ++i) grid[i] = v.lambda_max_used * i / (npts - 1);
  std::vector<EvansSample> samples(npts);
  parallel_for(grid.size(), jobs, [&](std::size_t i) { samples[i] = evans_eval(sys, profile, grid[i], opt); });

  const double amb = 1e-12;
  auto sign_at = [&](std::size_t i) -> int {
    EvansSample& s = samples[i];
    if (s.transversality > amb && s.sign_real != 0) return s.sign_real;
    // local refinement around an ambiguous grid point
    const double dl = 1e-6 * v.lambda_max_used;
    for (double shift : {dl, -dl, 10 * dl, -10 * dl}) {
      const double l = grid[i] + shift;
      if (l < 0.0 || l > v.lambda_max_used) continue;
      EvansSample t = evans_eval(sys, profile, l, opt);
      if (t.transversality > amb && t.sign_real != 0) {
        v.warnings.push_back("ambiguous sign at lambda = " + std::to_string(grid[i]) + ", resolved by refinement");
        return t.sign_real;
      }
    }
    v.warnings.push_back("persistent sign ambiguity at lambda = " + std::to_string(grid[i]));
    return 0;
  };
  std::vector<int> signs(npts);
  for (int i = 0; i < npts; ++i) signs[i] = sign_at(i);

  for (int i = 0; i + 1 < npts; ++i) {
    if (signs[i] == 0 || signs[i + 1] == 0 || signs[i] == signs[i + 1]) continue;
    ++v.real_axis_sign_changes;
    double a = grid[i], b = grid[i + 1];
    int sa = signs[i];
    for (int k = 0; k < 40 && b - a > 1e-9 * v.lambda_max_used; ++k) {
      const double c = 0.5 * (a + b);
      const EvansSample t = evans_eval(sys, profile, c, opt);
      if (t.sign_real == 0) break;
      if (t.sign_real == sa) a = c;
      else b = c;
    }
    v.sign_change_locations.push_back(0.5 * (a + b));
  }
  v.d_zero = samples.front().d;
  v.mu = (signs.front() == 0 || signs.back() == 0) ? 0 : signs.front() * signs.back();
  v.samples = std::move(samples);
  return v;
}

WindingResult winding_count(const SystemDef& sys, const SteadyProfile& profile, const Contour& contour, int jobs,
                            const EvansOptions& opt) {
  if (!(contour.radius > 0.0)) throw ValidationError("winding_count: radius must be positive");
  if (contour.turns < 1) throw ValidationError("winding_count: turns must be positive");
  std::vector<std::function<cplx(double)>> pieces;
  double multiplier = 1.0;
  const double rad = contour.radius;
  if (contour.kind == Contour::Kind::half_disk) {
    // upper half only; the lower half mirrors it by conjugate symmetry
    pieces.push_back([rad](double t) { return std::polar(rad, 0.5 * kPi * t); });
    pieces.push_back([rad](double t) { return cplx(0.0, rad * (1.0 - t)); });
    multiplier = 2.0;
  } else {
    const cplx c = contour.center;
    for (int k = 0; k < contour.turns; ++k)
      pieces.push_back([c, rad](double t) { return c + std::polar(rad, 2.0 * kPi * t); });
  }

  struct Node {
    double t;
    int piece;
    EvansSample s;
  };
  std::vector<Node> nodes;
  const int init = 32;
  for (int p = 0; p < static_cast<int>(pieces.size()); ++p)
    for (int i = 0; i <= init; ++i) nodes.push_back({static_cast<double>(i) / init, p, {}});
  parallel_for(nodes.size(), jobs,
               [&](std::size_t i) { nodes[i].s = evans_eval(sys, profile, pieces[nodes[i].piece](nodes[i].t), opt); });

  const double limit = 0.5 * kPi;
  for (int level = 0;; ++level) {
    std::vector<Node> extra;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      if (nodes[i].piece != nodes[i + 1].piece) continue;
      const double dphi = wrap(nodes[i + 1].s.d.phase - nodes[i].s.d.phase);
      if (std::abs(dphi) >= limit) {
        if (nodes[i + 1].t - nodes[i].t < 1e-7)
          throw NumericalError("winding_count: contour too coarse (phase step >= pi/2 at finest sampling)");
        extra.push_back({0.5 * (nodes[i].t + nodes[i + 1].t), nodes[i].piece, {}});
      }
    }
    if (extra.empty()) break;
    parallel_for(extra.size(), jobs,
                 [&](std::size_t i) { extra[i].s = evans_eval(sys, profile, pieces[extra[i].piece](extra[i].t), opt); });
    nodes.insert(nodes.end(), extra.begin(), extra.end());
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) {
      return a.piece != b.piece ? a.piece < b.piece : a.t < b.t;
    });
  }

  WindingResult res;
  res.min_transversality = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    res.min_transversality = std::min(res.min_transversality, nodes[i].s.transversality);
    if (i > 0) total += wrap(nodes[i].s.d.phase - nodes[i - 1].s.d.phase);
  }
  if (contour.kind == Contour::Kind::circle) total += wrap(nodes.front().s.d.phase - nodes.back().s.d.phase);
  if (!(res.min_transversality > 1e-8))
    throw NumericalError("winding_count: contour passes too close to a zero of D");
  res.total_phase = multiplier * total;
  res.winding = static_cast<int>(std::lround(res.total_phase / (2.0 * kPi)));
  res.samples.reserve(nodes.size());
  for (auto& nd : nodes) res.samples.push_back(std::move(nd.s));
  return res;
}

ContourZeros locate_zeros(const SystemDef& sys, const SteadyProfile& profile, cplx center, double radius, int samples,
                          int jobs, const EvansOptions& opt) {
  if (!(radius > 0.0) || samples < 8) throw ValidationError("locate_zeros: invalid circle");
  std::vector<EvansSample> s(static_cast<std::size_t>(samples));
  std::vector<double> theta(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) theta[k] = 2.0 * kPi * static_cast<double>(k) / samples;
  parallel_for(s.size(), jobs,
               [&](std::size_t k) { s[k] = evans_eval(sys, profile, center + std::polar(radius, theta[k]), opt); });
  std::vector<double> lift(s.size());
  lift[0] = s[0].d.phase;
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double step = wrap(s[k].d.phase - s[k - 1].d.phase);
    if (std::abs(step) >= 0.5 * kPi) throw NumericalError("locate_zeros: too few samples for the phase lift");
    lift[k] = lift[k - 1] + step;
  }
  const double closing = wrap(s.front().d.phase - s.back().d.phase);
  const int count = static_cast<int>(std::lround((lift.back() + closing - lift.front()) / (2.0 * kPi)));
  ContourZeros out;
  out.count = count;
  if (count <= 0) return out;

  // h = log D - N log(lambda - c) is periodic; its Fourier modes give power sums
  std::vector<cplx> h(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) h[k] = cplx(s[k].d.log_mag, lift[k] - count * theta[k]);
  std::vector<cplx> power(static_cast<std::size_t>(count) + 1);
  for (int p = 1; p <= count; ++p) {
    cplx acc(0.0, 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) acc += h[k] * std::polar(1.0, p * theta[k]);
    power[static_cast<std::size_t>(p)] = -static_cast<double>(p) / samples * acc;
  }
  // Newton identities -> monic polynomial in w = (lambda - c)/R
  std::vector<cplx> e(static_cast<std::size_t>(count) + 1);
  e[0] = 1.0;
  for (int k = 1; k <= count; ++k) {
    cplx acc(0.0, 0.0);
    for (int i = 1; i <= k; ++i) acc += (i % 2 == 1 ? 1.0 : -1.0) * e[static_cast<std::size_t>(k - i)] * power[static_cast<std::size_t>(i)];
    e[static_cast<std::size_t>(k)] = acc / static_cast<double>(k);
  }
  CMat comp = CMat::Zero(count, count);
  for (int i = 1; i < count; ++i) comp(i, i - 1) = 1.0;
  // w^N - e1 w^{N-1} + e2 w^{N-2} - ...
  for (int k = 1; k <= count; ++k) comp(count - k, count - 1) = (k % 2 == 1 ? 1.0 : -1.0) * e[static_cast<std::size_t>(k)];
  Eigen::ComplexEigenSolver<CMat> ces(comp, false);
  for (Eigen::Index i = 0; i < ces.eigenvalues().size(); ++i) out.zeros.push_back(center + radius * ces.eigenvalues()[i]);
  std::sort(out.zeros.begin(), out.zeros.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

}  // namespace steadytube
