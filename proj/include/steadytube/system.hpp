#pragma once

#include "steadytube/types.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace steadytube {

using VecFn = std::function<Vec(const Vec&)>;
using MatFn = std::function<Mat(const Vec&)>;

// Convex entropy pair in the conserved variables W = f0(U).
struct EntropyPair {
  std::function<double(const Vec&)> eta;   // eta(W(U))
  std::function<double(const Vec&)> flux;  // q(U)
  VecFn gradient;                          // d eta / dW at U
  MatFn hessian;                           // d^2 eta / dW^2 at U
};

struct SystemDef {
  std::string name;
  int n = 0;
  int r = 0;
  VecFn f0;
  VecFn f;
  MatFn b22;
  MatFn jac_f0_fn;                                   // optional
  MatFn jac_f_fn;                                    // optional
  std::function<Mat(const Vec&, const Vec&)> db22_fn;  // optional: (U, V) -> dB22(U)[V]
  MatFn symmetrizer;                                 // optional, acts on the normalised system
  std::optional<EntropyPair> entropy;
  std::function<bool(const Vec&)> domain;            // optional: everything admissible
  nlohmann::ordered_json params = nlohmann::ordered_json::object();

  int m() const { return n - r; }
  bool in_domain(const Vec& u) const;
  void require_domain(const Vec& u) const;  // throws DomainError
  Mat jac_f0(const Vec& u) const;
  Mat jac_f(const Vec& u) const;
  Mat db22(const Vec& u, const Vec& v) const;
};

struct JacobianBlocks {
  Mat a0, a;
  Mat a11, a12, a21, a22;
  Mat b22;
  bool a11_invertible = true;
  double a11_rcond = 1.0;
};

JacobianBlocks evaluate_blocks(const SystemDef& sys, const Vec& u);

// Ã = B22^{-1}(A22 - A21 A11^{-1} A12)
Mat reduced_matrix(const JacobianBlocks& b);

// Same matrix through the symmetrised factorisation of the normalised system.
Mat reduced_matrix_symmetrized(const JacobianBlocks& b, const Mat& s);

// Normalised blocks: A0 -> I, A -> A0^{-1} A, B22 -> (A0_22)^{-1} B22.
JacobianBlocks normalize_blocks(const JacobianBlocks& b);

// Central differences with h = eps^{1/3} max(1, |u_j|).
Mat fd_jacobian(const VecFn& g, const Vec& u);

enum class Verdict { pass, fail, not_applicable, not_evaluable };
const char* to_string(Verdict v);

struct Witness {
  cplx eigenvalue{0.0, 0.0};
  Vec state;
  std::string detail;
};

struct CheckResult {
  Verdict verdict = Verdict::not_applicable;
  double margin = 0.0;  // worst value of the tested quantity over the samples
  std::optional<Witness> witness;
  std::string note;
};

struct AssumptionReport {
  CheckResult h1, h2, h3, speccond, fsymm;
  std::size_t samples = 0;
};

AssumptionReport check_assumptions(const SystemDef& sys, const std::vector<Vec>& samples, double tol = 1e-8);

struct IsentropicParams {
  double gamma = 2.0;
  double a = 1.0;
  double nu = 1.0;
};

struct FullGasParams {
  double Gamma = 0.4;
  double alpha = 1.0;
  double nu = 1.0;
};

SystemDef make_isentropic_ns(const IsentropicParams& p);
SystemDef make_full_gas(const FullGasParams& p);
// f0 = A0 U, f = A U, constant B22 of size n - r; A0 defaults to the identity.
SystemDef make_linear(const Mat& a, const Mat& b22, std::optional<Mat> a0 = std::nullopt,
                      std::optional<Mat> symmetrizer = std::nullopt);
SystemDef make_rotation_example();

// name in {linear, rotation_example, isentropic_ns, full_gas}; unknown keys rejected.
SystemDef builtin(const std::string& name, const nlohmann::json& params);

// {"system": name, ...params}
SystemDef system_from_json(const nlohmann::json& block);

nlohmann::ordered_json to_json(const AssumptionReport& report);

}  // namespace steadytube
