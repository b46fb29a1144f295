#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace steadytube {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: unknown keys, invalid parameters, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A state outside the admissible set of the system.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Solver failure: nonconvergence, singular maps, unsolvable constraints.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularMapError : public NumericalError {
 public:
  SingularMapError(const std::string& what, cplx eigenvalue)
      : NumericalError(what), eigenvalue_(eigenvalue) {}
  cplx eigenvalue() const { return eigenvalue_; }

 private:
  cplx eigenvalue_;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace steadytube
