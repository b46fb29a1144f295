#pragma once

#include "steadytube/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace steadytube::oracle {

// Chebyshev differentiation matrix on the Gauss–Lobatto points of [0,1], y_0 = 0.
inline Mat cheb_matrix(int n, Vec& y) {
  const int np = n + 1;
  Vec x(np), c(np);
  for (int j = 0; j < np; ++j) {
    x[j] = std::cos(std::numbers::pi * j / n);
    c[j] = (j == 0 || j == n ? 2.0 : 1.0) * (j % 2 ? -1.0 : 1.0);
  }
  Mat d = Mat::Zero(np, np);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < np; ++j)
      if (i != j) d(i, j) = (c[i] / c[j]) / (x[i] - x[j]);
  for (int i = 0; i < np; ++i) d(i, i) = -d.row(i).sum();
  y = (1.0 - x.array()) / 2.0;
  return -2.0 * d;
}

// Finite eigenvalues of  lambda A0 V = B V'' - A V'  on [0,1] with V(0) = 0, V_II(1) = 0,
// B = diag(0_r, B22), by Chebyshev collocation on n + 1 points.
inline std::vector<cplx> constant_coefficient_eigenvalues(const Mat& a0, const Mat& a, const Mat& b22, int r,
                                                          int n = 199) {
  const int dim = static_cast<int>(a.rows());
  const int np = n + 1;
  Vec y;
  const Mat d = cheb_matrix(n, y);
  const Mat d2 = d * d;
  Mat b = Mat::Zero(dim, dim);
  b.bottomRightCorner(dim - r, dim - r) = b22;
  const int size = dim * np;
  Mat l = Mat::Zero(size, size), m = Mat::Zero(size, size);
  for (int k = 0; k < dim; ++k)
    for (int q = 0; q < dim; ++q) {
      l.block(k * np, q * np, np, np) = b(k, q) * d2 - a(k, q) * d;
      m.block(k * np, q * np, np, np) = a0(k, q) * Mat::Identity(np, np);
    }
  auto pin = [&](int row) {
    l.row(row).setZero();
    m.row(row).setZero();
    l(row, row) = 1.0;
  };
  for (int k = 0; k < dim; ++k) pin(k * np);
  for (int k = r; k < dim; ++k) pin(k * np + n);
  Eigen::GeneralizedEigenSolver<Mat> ges(l, m, false);
  std::vector<cplx> out;
  const auto alphas = ges.alphas();
  const auto betas = ges.betas();
  for (int i = 0; i < size; ++i) {
    if (std::abs(betas[i]) < 1e-12 * (1.0 + std::abs(alphas[i]))) continue;
    const cplx lam = alphas[i] / betas[i];
    if (std::isfinite(lam.real()) && std::isfinite(lam.imag())) out.push_back(lam);
  }
  std::sort(out.begin(), out.end(), [](cplx p, cplx q) { return std::abs(p) < std::abs(q); });
  return out;
}

// Eigenvalues that agree to 1e-6 relative between two resolutions (drops spurious modes).
inline std::vector<cplx> converged_eigenvalues(const Mat& a0, const Mat& a, const Mat& b22, int r, int n = 199,
                                               int n_check = 120) {
  const auto fine = constant_coefficient_eigenvalues(a0, a, b22, r, n);
  const auto coarse = constant_coefficient_eigenvalues(a0, a, b22, r, n_check);
  std::vector<cplx> out;
  for (cplx p : fine) {
    double best = INFINITY;
    for (cplx q : coarse) best = std::min(best, std::abs(p - q));
    if (best <= 1e-6 * (1.0 + std::abs(p))) out.push_back(p);
  }
  return out;
}

inline std::vector<cplx> inside_circle(const std::vector<cplx>& pts, cplx center, double radius) {
  std::vector<cplx> out;
  for (cplx p : pts)
    if (std::abs(p - center) < radius) out.push_back(p);
  return out;
}

}  // namespace steadytube::oracle
