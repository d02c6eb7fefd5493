#include "pihnn/elasticity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pihnn {

namespace {

void require_unit(Vec2 n) {
  const double norm = std::hypot(n.x, n.y);
  if (std::abs(norm - 1.0) > 1e-12) {
    throw ContractError("boundary normal is not a unit vector (|n| = " + std::to_string(norm) + ")");
  }
}

}  // namespace

Material Material::make(double lambda, double mu, PlaneMode mode) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ContractError("material: shear modulus mu must be positive");
  if (!(lambda > -2.0 / 3.0 * mu) || !std::isfinite(lambda)) {
    throw ContractError("material: lambda must exceed -2mu/3");
  }
  return Material(lambda, mu, mode);
}

double Material::lambda_tilde() const {
  return mode_ == PlaneMode::PlaneStrain ? lambda_ : 2.0 * lambda_ * mu_ / (lambda_ + 2.0 * mu_);
}

double Material::gamma() const {
  const double l = lambda_tilde();
  return (l + 3.0 * mu_) / (l + mu_);
}

MaterialConstants material_derived(double lambda, double mu, PlaneMode mode) {
  const Material m = Material::make(lambda, mu, mode);
  return {m.lambda_tilde(), m.gamma()};
}

FieldPoint km_fields(C64 z, const KMState& s, const Material& mat, bool with_displacement) {
  if (with_displacement && !s.has_potentials) {
    throw ContractError("km_fields: displacements need phi and psi, which stress-only networks do not provide");
  }
  const C64 zbar_ddphi = std::conj(z) * s.ddphi;
  FieldPoint f;
  f.sxx = (2.0 * s.dphi - zbar_ddphi - s.dpsi).real();
  f.syy = (2.0 * s.dphi + zbar_ddphi + s.dpsi).real();
  f.sxy = (zbar_ddphi + s.dpsi).imag();
  f.has_displacement = with_displacement;
  if (with_displacement) {
    const C64 u = (mat.gamma() * s.phi - z * std::conj(s.dphi) - std::conj(s.psi)) / (2.0 * mat.mu());
    f.ux = u.real();
    f.uy = u.imag();
  }
  return f;
}

std::string_view to_string(BCKind kind) {
  switch (kind) {
    case BCKind::Traction:
      return "traction";
    case BCKind::Displacement:
      return "displacement";
    case BCKind::Symmetry:
      return "symmetry";
    case BCKind::Interface:
      return "interface";
  }
  return "?";
}

Vec2 BoundaryValue::at(Vec2 normal) const {
  switch (profile) {
    case BoundaryProfile::Constant:
      return vector;
    case BoundaryProfile::Pressure:
      return {-magnitude * normal.x, -magnitude * normal.y};
    case BoundaryProfile::Shear:
      return {magnitude * normal.y, -magnitude * normal.x};
  }
  return vector;
}

std::vector<double> bc_residual(const BoundaryCondition& bc, const FieldPoint& f, Vec2 n, C64 /*z*/) {
  require_unit(n);
  switch (bc.kind) {
    case BCKind::Traction: {
      const Vec2 t = f.traction(n);
      const Vec2 t0 = bc.value.at(n);
      return {t.x - t0.x, t.y - t0.y};
    }
    case BCKind::Displacement: {
      if (!f.has_displacement) throw ContractError("bc_residual: displacement condition on a stress-only field");
      const Vec2 u0 = bc.value.at(n);
      return {f.ux - u0.x, f.uy - u0.y};
    }
    case BCKind::Symmetry: {
      if (!f.has_displacement) throw ContractError("bc_residual: symmetry condition on a stress-only field");
      return {cross(f.traction(n), n), dot(f.displacement(), n)};
    }
    case BCKind::Interface:
      break;
  }
  throw ContractError("bc_residual: interface conditions need both adjoining fields (use interface_residual)");
}

std::vector<double> interface_residual(const FieldPoint& f1, const FieldPoint& f2, Vec2 n) {
  require_unit(n);
  if (!f1.has_displacement || !f2.has_displacement) {
    throw ContractError("interface_residual: both fields must carry displacements");
  }
  const Vec2 t1 = f1.traction(n);
  const Vec2 t2 = f2.traction(n);
  return {f1.ux - f2.ux, f1.uy - f2.uy, t1.x - t2.x, t1.y - t2.y};
}

std::string GroupKey::label() const {
  std::string s(to_string(kind));
  s += "[" + std::to_string(subdomain);
  if (partner >= 0) s += "," + std::to_string(partner);
  s += "]";
  return s;
}

double loss_weight(double group_length, double outer_length) {
  if (!(outer_length > 0.0)) throw ContractError("loss_weight: outer boundary length must be positive");
  if (group_length < 0.0) throw ContractError("loss_weight: negative group length");
  return group_length / outer_length;
}

LossBreakdown assemble_loss(std::span<const SampleResidual> samples, const std::map<GroupKey, double>& group_lengths,
                            double outer_length) {
  std::map<GroupKey, std::vector<const SampleResidual*>> members;
  for (const SampleResidual& s : samples) {
    if (!group_lengths.contains(s.group)) {
      throw ContractError("assemble_loss: sample " + std::to_string(s.index) + " belongs to unknown group " +
                          s.group.label());
    }
    members[s.group].push_back(&s);
  }
  LossBreakdown out;
  for (const auto& [key, length] : group_lengths) {
    const double alpha = loss_weight(length, outer_length);
    auto it = members.find(key);
    if (it == members.end() || it->second.empty()) {
      if (length > 0.0) throw ContractError("assemble_loss: group " + key.label() + " has length but no samples");
      continue;
    }
    auto& group = it->second;
    std::sort(group.begin(), group.end(), [](const SampleResidual* a, const SampleResidual* b) {
      return a->index < b->index;
    });
    double sum = 0.0;
    for (const SampleResidual* s : group) {
      double sq = 0.0;
      for (double r : s->residual) sq += r * r;
      sum += sq;
    }
    const double term = alpha * (sum / static_cast<double>(group.size()));
    out.components[key.label()] = term;
    out.weights[key.label()] = alpha;
    out.total += term;
  }
  return out;
}

}  // namespace pihnn
