#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace steadytube {

// exp(log_mag + i*phase); keeps Evans values meaningful across exponential scales.
struct ScaledComplex {
  double log_mag = -std::numeric_limits<double>::infinity();
  double phase = 0.0;

  static ScaledComplex from(std::complex<double> z) {
    if (z == std::complex<double>(0.0, 0.0)) return {};
    return {std::log(std::abs(z)), std::arg(z)};
  }

  bool is_zero() const { return std::isinf(log_mag) && log_mag < 0; }

  std::complex<double> value() const {
    if (is_zero()) return {0.0, 0.0};
    return std::polar(std::exp(log_mag), phase);
  }

  // unit-modulus direction, always representable
  std::complex<double> direction() const { return std::polar(1.0, phase); }

  // +1 / -1 for values on the real axis (phase near 0 or pi)
  int real_sign() const { return std::cos(phase) >= 0.0 ? 1 : -1; }

  // principal phase in (-pi, pi]
  double principal_phase() const { return std::remainder(phase, 2.0 * std::numbers::pi); }

  ScaledComplex operator*(const ScaledComplex& o) const { return {log_mag + o.log_mag, phase + o.phase}; }
  ScaledComplex operator/(const ScaledComplex& o) const { return {log_mag - o.log_mag, phase - o.phase}; }
};

}  // namespace steadytube
