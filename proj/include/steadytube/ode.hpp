#pragma once

// Dormand–Prince 5(4) with PI step control and Hairer's continuous extension,
// generic over real and complex states.

#include "steadytube/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace steadytube::ode {

enum class Status { completed, blew_up, left_domain };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::completed: return "completed";
    case Status::blew_up: return "blew_up";
    case Status::left_domain: return "left_domain";
  }
  return "?";
}

struct Options {
  double rtol = 1e-8;
  double atol = 1e-10;
  double blowup = 1e8;
  double h_max = 0.0;  // 0: whole span
  std::size_t max_steps = 5'000'000;
};

template <class Scalar>
using State = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
class Trajectory {
 public:
  using Vector = State<Scalar>;

  Trajectory() = default;

  const std::vector<double>& nodes() const { return x_; }
  const std::vector<Vector>& values() const { return y_; }
  Status status() const { return status_; }
  bool completed() const { return status_ == Status::completed; }
  double x_stop() const { return x_.back(); }
  const Vector& front() const { return y_.front(); }
  const Vector& back() const { return y_.back(); }
  std::size_t size() const { return x_.size(); }

  // Dense output. Nodes return the stored value exactly; segments are left-closed.
  Vector operator()(double x) const {
    const std::size_t n = x_.size();
    if (n == 1 || segs_.empty()) return y_.front();
    const bool fwd = x_.back() >= x_.front();
    auto before = [fwd](double a, double b) { return fwd ? a < b : a > b; };
    if (!before(x_.front(), x) ) return y_.front();
    if (!before(x, x_.back())) return y_.back();
    // first node strictly after x
    auto it = std::upper_bound(x_.begin(), x_.end(), x, [&](double v, double node) { return before(v, node); });
    std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    if (x == x_[i]) return y_[i];
    const Segment& s = segs_[i];
    const double th = (x - s.x0) / s.h;
    const double th1 = 1.0 - th;
    return s.c1 + th * (s.c2 + th1 * (s.c3 + th * (s.c4 + th1 * s.c5)));
  }

  // integrator-side construction
  void start(double x, Vector y) {
    x_.assign(1, x);
    y_.assign(1, std::move(y));
    segs_.clear();
  }
  struct Segment {
    double x0, h;
    Vector c1, c2, c3, c4, c5;
  };
  void push(Segment seg, double x1, Vector y1) {
    segs_.push_back(std::move(seg));
    x_.push_back(x1);
    y_.push_back(std::move(y1));
  }
  void replace_last_value(Vector y) { y_.back() = std::move(y); }
  void set_status(Status s) { status_ = s; }

 private:
  std::vector<double> x_;
  std::vector<Vector> y_;
  std::vector<Segment> segs_;
  Status status_ = Status::completed;
};

namespace detail {

struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

template <class V>
bool all_finite(const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(std::abs(v[i]))) return false;
  return true;
}

template <class V>
double max_abs(const V& v) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, static_cast<double>(std::abs(v[i])));
  return m;
}

}  // namespace detail

struct NoGuard {
  template <class V>
  bool operator()(double, const V&) const { return true; }
};

struct NoHook {
  template <class V>
  bool operator()(double, V&) const { return false; }
};

// field(x, y) -> dy/dx (may throw DomainError; the step is then retried smaller)
// guard(x, y) -> false once y has left the admissible region
// hook(x, y) -> true if it modified y in place after an accepted step
template <class Scalar, class Field, class Guard = NoGuard, class Hook = NoHook>
Trajectory<Scalar> integrate(Field&& field, double xa, double xb, State<Scalar> y0,
                             const Options& opt = {}, Guard&& guard = {}, Hook&& hook = {}) {
  using V = State<Scalar>;
  using D = detail::Dopri5;
  Trajectory<Scalar> traj;
  traj.start(xa, y0);
  if (xa == xb) return traj;
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw ValidationError("integrate: tolerances must be positive");

  const double dir = xb > xa ? 1.0 : -1.0;
  const double span = std::abs(xb - xa);
  const double hmax = opt.h_max > 0.0 ? std::min(opt.h_max, span) : span;
  const Eigen::Index n = y0.size();
  const double nn = static_cast<double>(std::max<Eigen::Index>(n, 1));

  auto norm = [&](const V& e, const V& ya, const V& yb) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sk = opt.atol + opt.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      const double q = std::abs(e[i]) / sk;
      s += q * q;
    }
    return std::sqrt(s / nn);
  };

  double x = xa;
  V y = std::move(y0);
  V k1, k2, k3, k4, k5, k6, k7, yt, y1;
  try {
    k1 = field(x, y);
  } catch (const DomainError&) {
    traj.set_status(Status::left_domain);
    return traj;
  }

  // initial step (Hairer & Wanner, hinit)
  double h;
  {
    V sk(n);
    double dnf = 0.0, dny = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = opt.atol + opt.rtol * std::abs(y[i]);
      dnf += std::pow(std::abs(k1[i]) / s, 2);
      dny += std::pow(std::abs(y[i]) / s, 2);
    }
    h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min(h, hmax);
    double der2 = 0.0;
    try {
      V k2t = field(x + dir * h, V(y + dir * h * k1));
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = opt.atol + opt.rtol * std::abs(y[i]);
        der2 += std::pow(std::abs(k2t[i] - k1[i]) / s, 2);
      }
      der2 = std::sqrt(der2 / nn) / h;
    } catch (const DomainError&) {
      der2 = 0.0;
      h *= 1e-3;
    }
    const double der12 = std::max(der2, std::sqrt(dnf / nn));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
    h = std::min({100.0 * h, h1, hmax});
    if (!(h > 0.0) || !std::isfinite(h)) h = std::min(1e-6, hmax);
  }

  const double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
  const double facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;
  double facold = 1e-4;
  bool reject = false;
  std::size_t steps = 0;

  while (true) {
    if (steps++ > opt.max_steps) {
      traj.set_status(Status::blew_up);
      return traj;
    }
    const double remaining = std::abs(xb - x);
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const double hmin = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x));
    if (h < hmin) {
      traj.set_status(Status::blew_up);
      return traj;
    }
    const double hs = dir * h;
    double err;
    bool domain_fail = false;
    try {
      yt = y + hs * D::a21 * k1;
      k2 = field(x + D::c2 * hs, yt);
      yt = y + hs * (D::a31 * k1 + D::a32 * k2);
      k3 = field(x + D::c3 * hs, yt);
      yt = y + hs * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3);
      k4 = field(x + D::c4 * hs, yt);
      yt = y + hs * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4);
      k5 = field(x + D::c5 * hs, yt);
      yt = y + hs * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5);
      k6 = field(x + hs, yt);
      y1 = y + hs * (D::a71 * k1 + D::a73 * k3 + D::a74 * k4 + D::a75 * k5 + D::a76 * k6);
      const double xn = last ? xb : x + hs;
      k7 = field(xn, y1);
      V e = hs * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);
      err = detail::all_finite(e) && detail::all_finite(y1) ? norm(e, y, y1)
                                                           : std::numeric_limits<double>::infinity();
      if (err <= 1.0 && !guard(xn, y1)) domain_fail = true;
    } catch (const DomainError&) {
      err = std::numeric_limits<double>::infinity();
      domain_fail = true;
    }

    if (!std::isfinite(err) || domain_fail) {
      if (domain_fail && h < 1e3 * hmin) {
        traj.set_status(Status::left_domain);
        return traj;
      }
      h *= 0.25;
      reject = true;
      continue;
    }

    const double fac11 = std::pow(err, expo1);
    double fac = fac11 / std::pow(facold, beta);
    fac = std::max(facc2, std::min(facc1, fac / safe));
    double hnew = h / fac;

    if (err <= 1.0) {
      facold = std::max(err, 1e-4);
      const double xn = last ? xb : x + hs;
      typename Trajectory<Scalar>::Segment seg;
      seg.x0 = x;
      seg.h = xn - x;
      const double hh = seg.h;
      V ydiff = y1 - y;
      V bspl = hh * k1 - ydiff;
      seg.c1 = y;
      seg.c4 = ydiff - hh * k7 - bspl;
      seg.c5 = hh * (D::d1 * k1 + D::d3 * k3 + D::d4 * k4 + D::d5 * k5 + D::d6 * k6 + D::d7 * k7);
      seg.c2 = std::move(ydiff);
      seg.c3 = std::move(bspl);
      x = xn;
      y = y1;
      k1 = k7;
      if (hook(x, y)) {
        try {
          k1 = field(x, y);
        } catch (const DomainError&) {
          traj.push(std::move(seg), x, y);
          traj.set_status(Status::left_domain);
          return traj;
        }
      }
      traj.push(std::move(seg), x, y);
      if (detail::max_abs(y) > opt.blowup) {
        traj.set_status(Status::blew_up);
        return traj;
      }
      if (last) return traj;
      if (reject) hnew = std::min(hnew, h);
      reject = false;
      h = std::min(hnew, hmax);
    } else {
      hnew = h / std::min(facc1, fac11 / safe);
      reject = true;
      h = hnew;
    }
  }
}

// Convenience wrapper with a state-only domain predicate.
template <class Scalar, class Field, class Domain>
Trajectory<Scalar> integrate_ivp(Field&& field, double xa, double xb, State<Scalar> y0, const Options& opt,
                                 Domain&& domain) {
  return integrate<Scalar>(std::forward<Field>(field), xa, xb, std::move(y0), opt,
                           [&](double, const State<Scalar>& y) { return domain(y); });
}

template <class Scalar, class Field>
Trajectory<Scalar> integrate_ivp(Field&& field, double xa, double xb, State<Scalar> y0, const Options& opt = {}) {
  return integrate<Scalar>(std::forward<Field>(field), xa, xb, std::move(y0), opt);
}

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
struct MatrixPropagation {
  Trajectory<Scalar> trajectory;  // column-major flattening of the tracked block
  Eigen::Index rows = 0, cols = 0;
  Matrix<Scalar> end;             // tracked block at the end of the span
  double log_scale = 0.0;         // sum of log|det R| over checkpoints
  double phase = 0.0;             // sum of arg det R
  std::vector<double> checkpoints;
  std::optional<double> rank_deficient_at;

  Matrix<Scalar> at(double x) const {
    State<Scalar> v = trajectory(x);
    return Eigen::Map<const Matrix<Scalar>>(v.data(), rows, cols);
  }
  bool completed() const { return trajectory.completed(); }
};

// Y' = M(x) Y. With renorm, the tracked block is re-orthonormalised by QR whenever a
// column norm leaves [1e-4, 1e4]; the determinant of the accumulated R factors is kept
// in (log_scale, phase), so det(true block) = det(end) * exp(log_scale + i*phase)
// for square blocks, and the column span is always exact.
template <class Scalar, class Coeff>
MatrixPropagation<Scalar> integrate_linear_matrix(Coeff&& coeff, double xa, double xb, const Matrix<Scalar>& Y0,
                                                  const Options& opt_in = {}, bool renorm = true) {
  MatrixPropagation<Scalar> out;
  out.rows = Y0.rows();
  out.cols = Y0.cols();
  const Eigen::Index r = out.rows, c = out.cols;
  Options opt = opt_in;
  opt.blowup = renorm ? 1e300 : std::max(opt.blowup, 1e300);

  auto field = [&](double x, const State<Scalar>& y) -> State<Scalar> {
    Eigen::Map<const Matrix<Scalar>> Y(y.data(), r, c);
    Matrix<Scalar> dY = coeff(x) * Y;
    return Eigen::Map<const State<Scalar>>(dY.data(), r * c);
  };
  auto hook = [&](double x, State<Scalar>& y) -> bool {
    if (!renorm || c == 0) return false;
    Eigen::Map<Matrix<Scalar>> Y(y.data(), r, c);
    bool trigger = false;
    for (Eigen::Index j = 0; j < c; ++j) {
      const double nj = Y.col(j).norm();
      if (nj < 1e-4 || nj > 1e4) trigger = true;
    }
    if (!trigger) return false;
    Eigen::HouseholderQR<Matrix<Scalar>> qr(Y);
    Matrix<Scalar> R = qr.matrixQR().topLeftCorner(c, c).template triangularView<Eigen::Upper>();
    Matrix<Scalar> Q = qr.householderQ() * Matrix<Scalar>::Identity(r, c);
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c; ++j) {
      const double d = std::abs(R(j, j));
      dmax = std::max(dmax, d);
      dmin = std::min(dmin, d);
      out.log_scale += std::log(d);
      out.phase += std::arg(std::complex<double>(R(j, j)));
    }
    if (!out.rank_deficient_at && !(dmin > 1e-13 * dmax)) out.rank_deficient_at = x;
    Y = Q;
    out.checkpoints.push_back(x);
    return true;
  };

  State<Scalar> y0 = Eigen::Map<const State<Scalar>>(Y0.data(), r * c);
  out.trajectory = integrate<Scalar>(field, xa, xb, std::move(y0), opt, NoGuard{}, hook);
  const State<Scalar>& yb = out.trajectory.back();
  out.end = Eigen::Map<const Matrix<Scalar>>(yb.data(), r, c);
  return out;
}

}  // namespace steadytube::ode
