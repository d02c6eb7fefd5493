#include "pihnn/complexcore.hpp"

#include <cmath>
#include <string>

namespace pihnn {

namespace {

// Below this modulus cos(sqrt(z)) and its derivatives come from the power
// series. The closed forms for the second and third derivative lose digits to
// cancellation like 1/|z| and 1/|z|^2, so the switch sits well away from 0.
constexpr double kCosSqrtSeriesRadius = 1.0;

ActivationDerivs cos_sqrt_closed_form(C64 z) {
  const C64 s = std::sqrt(z);
  const C64 sn = std::sin(s);
  const C64 cs = std::cos(s);
  const C64 s2 = s * s;
  const C64 s3 = s2 * s;
  return {
      cs,
      -sn / (2.0 * s),
      (sn - s * cs) / (4.0 * s3),
      ((s2 - 3.0) * sn + 3.0 * s * cs) / (8.0 * s3 * s2),
  };
}

}  // namespace

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Exp:
      return "exp";
    case ActivationKind::Cos:
      return "cos";
    case ActivationKind::Sin:
      return "sin";
    case ActivationKind::CosSqrt:
      return "cos_sqrt";
  }
  return "?";
}

ActivationKind activation_from_string(std::string_view name) {
  if (name == "exp") return ActivationKind::Exp;
  if (name == "cos") return ActivationKind::Cos;
  if (name == "sin") return ActivationKind::Sin;
  if (name == "cos_sqrt") return ActivationKind::CosSqrt;
  throw ContractError("unknown activation '" + std::string(name) + "' (expected exp, cos, sin or cos_sqrt)");
}

C64 cos_sqrt_series(C64 z, int order) {
  if (order < 0) throw ContractError("cos_sqrt_series: negative derivative order");
  // term_n = (-1)^n n!/(n-k)! z^(n-k) / (2n)!, starting at n = k.
  C64 term = 1.0;
  for (int n = 1; n <= order; ++n) {
    // (-1)^n * n / ((2n-1)(2n)) applied cumulatively gives (-1)^k k! / (2k)!
    term *= -static_cast<double>(n) / (static_cast<double>(2 * n - 1) * (2 * n));
  }
  C64 sum = term;
  for (int n = order + 1; n < order + 200; ++n) {
    // ratio term_n / term_{n-1} = -z * n / ((n-k) (2n-1) (2n))
    term *= -z * static_cast<double>(n) / (static_cast<double>(n - order) * (2.0 * n - 1.0) * (2.0 * n));
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

ActivationDerivs activation_derivs(ActivationKind kind, C64 z) {
  switch (kind) {
    case ActivationKind::Exp: {
      const C64 e = std::exp(z);
      return {e, e, e, e};
    }
    case ActivationKind::Cos: {
      const C64 c = std::cos(z);
      const C64 s = std::sin(z);
      return {c, -s, -c, s};
    }
    case ActivationKind::Sin: {
      const C64 c = std::cos(z);
      const C64 s = std::sin(z);
      return {s, c, -s, -c};
    }
    case ActivationKind::CosSqrt:
      if (std::abs(z) < kCosSqrtSeriesRadius) {
        return {cos_sqrt_series(z, 0), cos_sqrt_series(z, 1), cos_sqrt_series(z, 2), cos_sqrt_series(z, 3)};
      }
      return cos_sqrt_closed_form(z);
  }
  throw ContractError("activation_derivs: invalid activation kind");
}

Jet2 jet_seed(C64 z) {
  if (!is_finite(z)) throw ContractError("jet_seed: non-finite input coordinate");
  return {z, 1.0, 0.0};
}

Jet2 jet_affine(std::span<const C64> weights, C64 bias, std::span<const Jet2> inputs) {
  if (weights.empty() || weights.size() != inputs.size()) {
    throw ContractError("jet_affine: expected equal nonzero lengths, got " + std::to_string(weights.size()) +
                        " weights and " + std::to_string(inputs.size()) + " inputs");
  }
  Jet2 out{bias, 0.0, 0.0};
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.f += weights[i] * inputs[i].f;
    out.d1 += weights[i] * inputs[i].d1;
    out.d2 += weights[i] * inputs[i].d2;
  }
  return out;
}

Jet2 jet_activate(ActivationKind kind, const Jet2& x, std::string_view context) {
  const ActivationDerivs a = activation_derivs(kind, x.f);
  Jet2 out{a.d0, a.d1 * x.d1, a.d2 * x.d1 * x.d1 + a.d1 * x.d2};
  if (!is_finite(out)) {
    std::string msg = "non-finite value in ";
    msg += to_string(kind);
    msg += " activation";
    if (!context.empty()) {
      msg += " (";
      msg += context;
      msg += ")";
    }
    throw NonFiniteError(msg);
  }
  return out;
}

}  // namespace pihnn
