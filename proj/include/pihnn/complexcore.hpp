#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pihnn {

using C64 = std::complex<double>;

/// Raised when a computation produces NaN or Inf. The message names the context.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on violated preconditions (shape mismatch, out-of-range argument).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool is_finite(C64 z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

/// A holomorphic value carried with its first and second z-derivatives.
struct Jet2 {
  C64 f{};
  C64 d1{};
  C64 d2{};

  friend Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.f + b.f, a.d1 + b.d1, a.d2 + b.d2}; }
  friend Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.f - b.f, a.d1 - b.d1, a.d2 - b.d2}; }
  friend Jet2 operator*(C64 s, const Jet2& a) { return {s * a.f, s * a.d1, s * a.d2}; }
  // Leibniz rule truncated at order two.
  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    return {a.f * b.f, a.d1 * b.f + a.f * b.d1, a.d2 * b.f + 2.0 * a.d1 * b.d1 + a.f * b.d2};
  }
  friend bool operator==(const Jet2&, const Jet2&) = default;
};

inline bool is_finite(const Jet2& j) { return is_finite(j.f) && is_finite(j.d1) && is_finite(j.d2); }

/// Entire, non-polynomial activation functions.
enum class ActivationKind { Exp, Cos, Sin, CosSqrt };

std::string_view to_string(ActivationKind kind);
ActivationKind activation_from_string(std::string_view name);

/// Value and first three derivatives of an activation at one point.
struct ActivationDerivs {
  C64 d0, d1, d2, d3;
};

ActivationDerivs activation_derivs(ActivationKind kind, C64 z);

/// k-th derivative (k >= 0) of cos(sqrt(z)) from its even power series
/// sum_n (-1)^n z^n / (2n)!. Accurate for moderate |z|; used near the origin
/// and as a reference.
C64 cos_sqrt_series(C64 z, int order);

/// Identity jet (z, 1, 0).
Jet2 jet_seed(C64 z);

/// sum_i w_i * x_i on every jet component, plus bias on the value only.
Jet2 jet_affine(std::span<const C64> weights, C64 bias, std::span<const Jet2> inputs);

/// Composes an activation with a jet (Faa di Bruno, order two).
/// Throws NonFiniteError mentioning `context` when the result overflows.
Jet2 jet_activate(ActivationKind kind, const Jet2& x, std::string_view context = {});

}  // namespace pihnn
