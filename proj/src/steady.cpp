#include "steadytube/steady.hpp"

#include "steadytube/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace steadytube {

namespace {

Vec concat(const Vec& a, const Vec& b) {
  Vec u(a.size() + b.size());
  u << a, b;
  return u;
}

// Shared state behind a shot-based profile's dense evaluators.
struct ShotEvaluator {
  SystemDef sys;
  Vec u0, c2, c1, fii0, b0c2;
  Shot shot;

  Vec state(double x) const {
    const int r = sys.r;
    Vec uii = shot.ii(x);
    if (r == 0) return uii;
    const auto& nodes = shot.ii.nodes();
    auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
    std::size_t i = it == nodes.end() ? nodes.size() - 1 : static_cast<std::size_t>(it - nodes.begin());
    if (nodes[i] == x) return shot.states[i];
    return concat(resolve_hyperbolic(sys, uii, c1, shot.states[i].head(r)), uii);
  }

  Vec derivative(double x) const {
    const Vec u = state(x);
    const int r = sys.r, m = sys.m();
    const Vec fu = sys.f(u);
    Vec dii = sys.b22(u).partialPivLu().solve(Vec(fu.tail(m) - fii0 + b0c2));
    Vec du(sys.n);
    du.tail(m) = dii;
    if (r > 0) {
      const Mat a = sys.jac_f(u);
      du.head(r) = -a.topLeftCorner(r, r).partialPivLu().solve(a.topRightCorner(r, m) * dii);
    }
    return du;
  }
};

double svd_rcond(const Mat& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  return s[0] > 0 ? s[s.size() - 1] / s[0] : 0.0;
}

}  // namespace

Vec resolve_hyperbolic(const SystemDef& sys, const Vec& u_ii, const Vec& fi_target, const Vec& guess) {
  const int r = sys.r, m = sys.m();
  if (r == 0) return Vec(0);
  if (u_ii.size() != m || fi_target.size() != r || guess.size() != r)
    throw ValidationError("resolve_hyperbolic: dimension mismatch");
  Vec ui = guess;
  const double tol = 1e-12 * std::max(1.0, fi_target.norm());
  for (int it = 0; it < 50; ++it) {
    Vec u = concat(ui, u_ii);
    if (!sys.in_domain(u)) throw NumericalError("resolve_hyperbolic: iterate left the admissible set");
    const Vec res = sys.f(u).head(r) - fi_target;
    if (!res.allFinite()) throw NumericalError("resolve_hyperbolic: non-finite flux");
    if (res.norm() <= tol) return ui;
    const Mat j = sys.jac_f(u).topLeftCorner(r, r);
    if (svd_rcond(j) < 1e-14) throw NumericalError("resolve_hyperbolic: singular (df_I)_I");
    const Vec d = j.partialPivLu().solve(res);
    double t = 1.0;
    Vec trial = ui - d;
    while (!sys.in_domain(concat(trial, u_ii)) && t > 1e-10) {
      t *= 0.5;
      trial = ui - t * d;
    }
    if (t <= 1e-10) throw NumericalError("resolve_hyperbolic: Newton step cannot stay in the admissible set");
    ui = trial;
  }
  Vec u = concat(ui, u_ii);
  if (sys.in_domain(u) && (sys.f(u).head(r) - fi_target).norm() <= 1e3 * tol) return ui;
  throw NumericalError("resolve_hyperbolic: constraint unsolvable (Newton did not converge)");
}

Shot shoot(const SystemDef& sys, const Vec& u0, const Vec& c2, const ShootOptions& opt) {
  sys.require_domain(u0);
  const int r = sys.r, m = sys.m();
  if (c2.size() != m) throw ValidationError("shoot: c2 has wrong dimension");
  const Vec f0 = sys.f(u0);
  const Vec c1 = f0.head(r);
  const Vec fii0 = f0.tail(m);
  const Vec b0c2 = sys.b22(u0) * c2;
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
    if (!sys.in_domain(u)) throw DomainError("shoot: state left the admissible set");
    return sys.b22(u).partialPivLu().solve(Vec(sys.f(u).tail(m) - fii0 + b0c2));
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
  shot.constants = {c1, c2};
  shot.ii = ode::integrate<double>(field, 0.0, 1.0, Vec(u0.tail(m)), o, guard);
  shot.states.reserve(shot.ii.size());
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
      shot.states.push_back(Vec::Constant(sys.n, std::numeric_limits<double>::quiet_NaN()));
    }
  }
  return shot;
}

std::optional<Vec> phi(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Vec& c2, const ShootOptions& opt) {
  if (u1ii.size() != sys.m()) throw ValidationError("phi: U1II has wrong dimension");
  Shot s = shoot(sys, u0, c2, opt);
  if (!s.reached_end()) return std::nullopt;
  Vec v = s.ii.back() - u1ii;
  if (!v.allFinite()) return std::nullopt;
  return v;
}

Mat jacobian_dphi(const SystemDef& sys, const Vec& u0, const Vec& c2, const ShootOptions& opt) {
  const int m = sys.m();
  const Vec zero = Vec::Zero(m);
  auto end = [&](const Vec& c) { return phi(sys, u0, zero, c, opt); };
  std::optional<Vec> base;
  bool base_tried = false;
  Mat j(m, m);
  for (int k = 0; k < m; ++k) {
    const double h = 1e-6 * (1.0 + std::abs(c2[k]));
    Vec cp = c2, cm = c2;
    cp[k] += h;
    cm[k] -= h;
    const auto fp = end(cp);
    const auto fm = end(cm);
    if (fp && fm) {
      j.col(k) = (*fp - *fm) / (cp[k] - cm[k]);
      continue;
    }
    if (!base_tried) {
      base = end(c2);
      base_tried = true;
    }
    if (base && fp) j.col(k) = (*fp - *base) / (cp[k] - c2[k]);
    else if (base && fm) j.col(k) = (*base - *fm) / (c2[k] - cm[k]);
    else throw NumericalError("jacobian_dphi: all finite-difference probes failed (Jacobian unavailable)");
  }
  return j;
}

SteadyProfile profile_from_shot(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Shot& shot) {
  auto ev = std::make_shared<ShotEvaluator>();
  ev->sys = sys;
  ev->u0 = u0;
  ev->c2 = shot.constants.c2;
  ev->c1 = shot.constants.c1;
  ev->fii0 = sys.f(u0).tail(sys.m());
  ev->b0c2 = sys.b22(u0) * shot.constants.c2;
  ev->shot = shot;
  SteadyProfile p;
  p.u0 = u0;
  p.u1ii = u1ii;
  p.constants = shot.constants;
  p.grid = shot.ii.nodes();
  p.states = shot.states;
  p.state = [ev](double x) { return ev->state(x); };
  p.derivative = [ev](double x) { return ev->derivative(x); };
  if (shot.reached_end()) p.residual = (shot.ii.back() - u1ii).norm();
  else p.residual = std::numeric_limits<double>::infinity();
  return p;
}

Mat phi1(const Mat& mat) {
  const Eigen::Index m = mat.rows();
  if (m == 0) return Mat(0, 0);
  auto series = [](const Mat& f) {
    Mat sum = Mat::Identity(f.rows(), f.cols());
    Mat term = Mat::Identity(f.rows(), f.cols());
    for (int k = 1; k < 200; ++k) {
      term = term * f / static_cast<double>(k + 1);
      sum += term;
      if (term.norm() <= 1e-18 * sum.norm()) break;
    }
    return sum;
  };
  auto invertible_part = [](const Mat& f) -> Mat {
    Mat e = f.exp();
    return f.partialPivLu().solve(Mat(e - Mat::Identity(f.rows(), f.cols())));
  };
  const double scale = mat.norm();
  if (scale == 0.0) return Mat::Identity(m, m);
  if (scale < 0.5) return series(mat);
  // ker(M^m) ⊕ range(M^m)
  Mat power = Mat::Identity(m, m);
  for (Eigen::Index k = 0; k < m; ++k) power = power * (mat / scale);
  Eigen::FullPivLU<Mat> lu(power);
  lu.setThreshold(1e-10);
  const Mat ker = lu.rank() < m ? Mat(lu.kernel()) : Mat(m, 0);
  const Mat img = lu.rank() > 0 ? Mat(lu.image(power)) : Mat(m, 0);
  if (ker.cols() == 0) return invertible_part(mat);
  if (img.cols() == 0) return series(mat);
  Mat pinv(m, m);
  pinv << ker, img;
  const Eigen::PartialPivLU<Mat> plu(pinv);
  const Mat blocks = plu.solve(Mat(mat * pinv));
  const Eigen::Index k = ker.cols();
  Mat out = Mat::Zero(m, m);
  out.topLeftCorner(k, k) = series(blocks.topLeftCorner(k, k));
  out.bottomRightCorner(m - k, m - k) = invertible_part(blocks.bottomRightCorner(m - k, m - k));
  return pinv * out * plu.inverse();
}

SteadyProfile constant_profile(const SystemDef& sys, const Vec& u0) {
  sys.require_domain(u0);
  const int r = sys.r, m = sys.m();
  SteadyProfile p;
  p.u0 = u0;
  p.u1ii = u0.tail(m);
  p.constants = {sys.f(u0).head(r), Vec::Zero(m)};
  p.grid = {0.0, 1.0};
  p.states = {u0, u0};
  p.state = [u0](double) { return u0; };
  const int n = sys.n;
  p.derivative = [n](double) { return Vec(Vec::Zero(n)); };
  const JacobianBlocks b = evaluate_blocks(sys, u0);
  p.dphi = b.a11_invertible ? phi1(reduced_matrix(b)) : Mat::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
  p.det_dphi = p.dphi.determinant();
  p.nondegenerate = std::abs(p.det_dphi) > 1e-8;
  p.converged = true;
  p.notes.push_back("constant state; dPhi from the closed form");
  return p;
}

SteadyProfile solve_steady(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Vec& c2_guess,
                           const SolveOptions& opt) {
  sys.require_domain(u0);
  const int m = sys.m();
  if (u1ii.size() != m || c2_guess.size() != m) throw ValidationError("solve_steady: dimension mismatch");
  const double tol = 1e-9 * (1.0 + u1ii.norm());
  Vec c = c2_guess;
  auto f0 = phi(sys, u0, u1ii, c, opt.shoot);
  if (!f0) throw NumericalError("solve_steady: Phi undefined at the initial guess (shot left the domain)");
  Vec fc = *f0;
  std::vector<std::string> notes;
  int it = 0;
  bool stalled = false;
  while (fc.norm() > tol && it < opt.max_iterations) {
    const Mat j = jacobian_dphi(sys, u0, c, opt.jacobian);
    Vec d;
    if (svd_rcond(j) < 1e-13) {
      d = -j.transpose() * fc;
      notes.push_back("iteration " + std::to_string(it) + ": dPhi singular, gradient step");
    } else {
      d = -j.partialPivLu().solve(fc);
    }
    const double f2 = fc.squaredNorm();
    const double slope = 2.0 * fc.dot(j * d);  // directional derivative of |Phi|^2
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const Vec trial = c + t * d;
      auto ft = phi(sys, u0, u1ii, trial, opt.shoot);
      if (ft && ft->squaredNorm() <= f2 + 1e-4 * t * std::min(slope, 0.0)) {
        c = trial;
        fc = *ft;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++it;
    if (!accepted) {
      stalled = true;
      notes.push_back("line search failed at iteration " + std::to_string(it));
      break;
    }
  }
  const Shot shot = shoot(sys, u0, c, opt.shoot);
  SteadyProfile p = profile_from_shot(sys, u0, u1ii, shot);
  p.iterations = it;
  p.converged = p.residual <= tol;
  if (!p.converged && !stalled && it >= opt.max_iterations) notes.push_back("maximum iterations reached");
  p.notes = notes;
  try {
    p.dphi = jacobian_dphi(sys, u0, c, opt.jacobian);
    p.det_dphi = p.dphi.determinant();
    p.nondegenerate = std::abs(p.det_dphi) > opt.degeneracy;
  } catch (const NumericalError& e) {
    p.notes.push_back(e.what());
    p.dphi = Mat::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
    p.det_dphi = std::numeric_limits<double>::quiet_NaN();
  }
  return p;
}

LinearClosedForm linear_closed_form(const Mat& a, const Mat& b22, const Vec& u0, const Vec& u1ii) {
  const Eigen::Index n = a.rows(), m = b22.rows(), r = n - m;
  if (a.cols() != n || b22.cols() != m || m < 1 || m > n || u0.size() != n || u1ii.size() != m)
    throw ValidationError("linear_closed_form: dimension mismatch");
  const Mat a11 = a.topLeftCorner(r, r), a12 = a.topRightCorner(r, m);
  Mat inner = a.bottomRightCorner(m, m);
  if (r > 0) inner -= a.bottomLeftCorner(m, r) * a11.partialPivLu().solve(a12);
  const Mat at = b22.partialPivLu().solve(inner);

  Eigen::EigenSolver<Mat> es(at, false);
  for (const cplx& ev : es.eigenvalues()) {
    const double k = std::round(ev.imag() / (2.0 * std::numbers::pi));
    if (k == 0.0) continue;
    const cplx target(0.0, 2.0 * std::numbers::pi * k);
    if (std::abs(ev - target) <= 1e-8 * (1.0 + std::abs(ev))) {
      std::ostringstream os;
      os << "linear_closed_form: spectral condition violated, eigenvalue " << ev.real() << (ev.imag() < 0 ? "-" : "+")
         << std::abs(ev.imag()) << "i ~ 2*pi*i*" << k;
      throw SingularMapError(os.str(), ev);
    }
  }
  const Mat map = phi1(at);
  const Vec u0ii = u0.tail(m);
  const Vec c2 = map.partialPivLu().solve(Vec(u1ii - u0ii));

  LinearClosedForm out;
  out.reduced = at;
  out.c2 = c2;
  out.c_tilde = c2 - at * u0ii;
  const Mat coupling = r > 0 ? Mat(a11.partialPivLu().solve(a12)) : Mat(0, m);
  const Vec u0i = u0.head(r);
  auto state = [=](double x) {
    Vec w = x * (phi1(Mat(x * at)) * c2);
    Vec u(n);
    u.head(r) = u0i - coupling * w;
    u.tail(m) = u0ii + w;
    return u;
  };
  auto deriv = [=](double x) {
    Vec w = x * (phi1(Mat(x * at)) * c2);
    Vec dw = at * w + c2;
    Vec du(n);
    du.head(r) = -coupling * dw;
    du.tail(m) = dw;
    return du;
  };
  SteadyProfile& p = out.profile;
  p.u0 = u0;
  p.u1ii = u1ii;
  p.constants = {Vec(a11 * u0i + a12 * u0ii), c2};
  for (int i = 0; i <= 200; ++i) {
    const double x = i / 200.0;
    p.grid.push_back(x);
    p.states.push_back(state(x));
  }
  p.state = state;
  p.derivative = deriv;
  p.residual = (state(1.0).tail(m) - u1ii).norm();
  p.dphi = map;
  p.det_dphi = map.determinant();
  p.nondegenerate = std::abs(p.det_dphi) > 1e-8;
  p.converged = true;
  return out;
}

EntropyDiagnostic entropy_dissipation(const SystemDef& sys, const SteadyProfile& profile) {
  if (!sys.entropy) throw UnsupportedError("entropy_dissipation: system '" + sys.name + "' has no entropy pair");
  const EntropyPair& ent = *sys.entropy;
  const int r = sys.r, m = sys.m();
  const Vec u0 = profile.state(0.0);
  const Vec g0 = ent.gradient(u0);
  auto bu = [&](const Vec& u, const Vec& du) {
    Vec v = Vec::Zero(sys.n);
    v.tail(m) = sys.b22(u) * du.tail(m);
    return v;
  };
  auto boundary = [&](double x) {
    const Vec u = profile.state(x), du = profile.derivative(x);
    const double qn = ent.flux(u) - g0.dot(sys.f(u));
    return qn - (ent.gradient(u) - g0).dot(bu(u, du));
  };
  auto integrand = [&](double x) {
    const Vec u = profile.state(x), du = profile.derivative(x);
    const Vec w = sys.jac_f0(u) * du;
    return w.dot(ent.hessian(u) * bu(u, du));
  };
  (void)r;
  EntropyDiagnostic d;
  d.boundary_term = boundary(1.0) - boundary(0.0);
  double mn = std::numeric_limits<double>::infinity();
  for (double x : profile.grid) mn = std::min(mn, integrand(x));
  for (int i = 0; i <= 2000; ++i) mn = std::min(mn, integrand(i / 2000.0));
  d.min_integrand = mn;
  // split at the nodes so the quadrature sees the layers
  const std::vector<double>& g = profile.grid;
  std::vector<double> cuts;
  const std::size_t stride = std::max<std::size_t>(1, g.size() / 200);
  for (std::size_t i = 0; i < g.size(); i += stride) cuts.push_back(g[i]);
  if (cuts.empty() || cuts.front() > 0.0) cuts.insert(cuts.begin(), 0.0);
  if (cuts.back() < 1.0) cuts.push_back(1.0);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, cuts[i], cuts[i + 1], 10, 1e-12);
  }
  d.dissipation = total;
  return d;
}

std::vector<Vec> halton_points(int count, int dim, std::uint64_t seed) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (dim > 16) throw ValidationError("halton_points: dimension above 16 not supported");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec shift(dim);
  for (int d = 0; d < dim; ++d) shift[d] = seed == 0 ? 0.0 : uni(rng);
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    Vec p(dim);
    for (int d = 0; d < dim; ++d) {
      double f = 1.0, v = 0.0;
      for (int k = i; k > 0; k /= primes[d]) {
        f /= primes[d];
        v += f * (k % primes[d]);
      }
      p[d] = std::fmod(v + shift[d], 1.0);
    }
    pts.push_back(p);
  }
  return pts;
}

DegreeResult brouwer_degree(const SystemDef& sys, const Vec& u0, const Vec& u1ii, const Vec& box_lo,
                            const Vec& box_hi, const DegreeOptions& opt) {
  const int m = sys.m();
  if (box_lo.size() != m || box_hi.size() != m) throw ValidationError("brouwer_degree: box has wrong dimension");
  if ((box_hi - box_lo).minCoeff() <= 0.0) throw ValidationError("brouwer_degree: empty box");
  if (opt.n_starts < 1) throw ValidationError("brouwer_degree: n_starts must be positive");
  sys.require_domain(u0);
  const auto unit = halton_points(opt.n_starts, m, opt.seed);

  struct Outcome {
    bool ok = false;
    Vec c2;
    double det = 0.0;
  };
  std::vector<Outcome> outcomes(unit.size());
  parallel_for(unit.size(), opt.jobs, [&](std::size_t i) {
    const Vec start = box_lo + unit[i].cwiseProduct(box_hi - box_lo);
    try {
      SteadyProfile p = solve_steady(sys, u0, u1ii, start, opt.solve);
      if (p.converged) outcomes[i] = {true, p.constants.c2, p.det_dphi};
    } catch (const Error&) {
    }
  });

  DegreeResult res;
  std::vector<Outcome> found;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++res.failed_starts;
      continue;
    }
    const bool inside = ((o.c2 - box_lo).minCoeff() >= 0.0) && ((box_hi - o.c2).minCoeff() >= 0.0);
    if (!inside) {
      ++res.outside_box;
      continue;
    }
    found.push_back(o);
  }
  std::sort(found.begin(), found.end(), [](const Outcome& a, const Outcome& b) {
    return std::lexicographical_compare(a.c2.data(), a.c2.data() + a.c2.size(), b.c2.data(), b.c2.data() + b.c2.size());
  });
  for (const auto& o : found) {
    bool dup = false;
    for (auto& root : res.roots) {
      if ((root.c2 - o.c2).norm() <= opt.dedup_radius) {
        ++root.hits;
        dup = true;
        break;
      }
    }
    if (dup) continue;
    DegreeRoot root;
    root.c2 = o.c2;
    root.det_dphi = o.det;
    root.degenerate = !(std::abs(o.det) >= opt.degeneracy);
    root.sign = root.degenerate ? 0 : (o.det > 0 ? 1 : -1);
    root.hits = 1;
    if (root.degenerate) {
      std::ostringstream os;
      os << "degenerate root (|det dPhi| = " << std::abs(o.det) << " < " << opt.degeneracy
         << "): data is not a regular value";
      res.warnings.push_back(os.str());
    }
    res.roots.push_back(root);
  }
  for (const auto& root : res.roots) res.degree += root.sign;
  return res;
}

}  // namespace steadytube
