#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pihnn/complexcore.hpp"

namespace pihnn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
/// Scalar 2D cross product a x b.
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

enum class PlaneMode { PlaneStrain, PlaneStress };

/// Isotropic material. Moduli in MPa.
class Material {
 public:
  /// Validates mu > 0 and lambda > -2mu/3.
  static Material make(double lambda, double mu, PlaneMode mode);

  double lambda() const { return lambda_; }
  double mu() const { return mu_; }
  PlaneMode mode() const { return mode_; }
  /// lambda in plane strain, 2 lambda mu / (lambda + 2 mu) in plane stress.
  double lambda_tilde() const;
  /// Kolosov constant (l + 3mu)/(l + mu) with l = lambda_tilde().
  double gamma() const;

  friend bool operator==(const Material&, const Material&) = default;

 private:
  Material(double lambda, double mu, PlaneMode mode) : lambda_(lambda), mu_(mu), mode_(mode) {}
  double lambda_;
  double mu_;
  PlaneMode mode_;
};

struct MaterialConstants {
  double lambda_tilde;
  double gamma;
};

MaterialConstants material_derived(double lambda, double mu, PlaneMode mode);

/// Potentials at a point. In stress-only networks phi and psi are absent.
struct KMState {
  C64 phi{};
  C64 dphi{};
  C64 ddphi{};
  C64 psi{};
  C64 dpsi{};
  bool has_potentials = true;
};

/// Stress (MPa) and, when available, displacement (m) at a point.
struct FieldPoint {
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  double ux = 0.0;
  double uy = 0.0;
  bool has_displacement = true;

  Vec2 traction(Vec2 n) const { return {sxx * n.x + sxy * n.y, sxy * n.x + syy * n.y}; }
  Vec2 displacement() const { return {ux, uy}; }
};

/// Kolosov-Muskhelishvili map from potentials to stresses and displacements.
/// Throws ContractError when displacements are requested without potentials.
FieldPoint km_fields(C64 z, const KMState& s, const Material& mat, bool with_displacement = true);

enum class BCKind { Traction, Displacement, Symmetry, Interface };

std::string_view to_string(BCKind kind);

/// Named boundary data. Constant carries a vector; Pressure p gives the
/// traction -p n; Shear tau gives tau (n_y, -n_x), the normal turned clockwise.
enum class BoundaryProfile { Constant, Pressure, Shear };

struct BoundaryValue {
  BoundaryProfile profile = BoundaryProfile::Constant;
  Vec2 vector{};
  double magnitude = 0.0;

  Vec2 at(Vec2 normal) const;
  friend bool operator==(const BoundaryValue&, const BoundaryValue&) = default;
};

struct BoundaryCondition {
  BCKind kind = BCKind::Traction;
  BoundaryValue value{};
  std::array<int, 2> interface_ids{-1, -1};

  static BoundaryCondition traction(BoundaryValue v) { return {BCKind::Traction, v, {-1, -1}}; }
  static BoundaryCondition displacement(BoundaryValue v) { return {BCKind::Displacement, v, {-1, -1}}; }
  static BoundaryCondition symmetry() { return {BCKind::Symmetry, {}, {-1, -1}}; }
  static BoundaryCondition interface(int a, int b) { return {BCKind::Interface, {}, {a, b}}; }

  friend bool operator==(const BoundaryCondition&, const BoundaryCondition&) = default;
};

/// Residual of an outer boundary condition at one point; two components.
/// Interface conditions go through interface_residual instead.
std::vector<double> bc_residual(const BoundaryCondition& bc, const FieldPoint& f, Vec2 n, C64 z);

/// (u1 - u2, (sigma1 - sigma2) n), four components.
std::vector<double> interface_residual(const FieldPoint& f1, const FieldPoint& f2, Vec2 n);

/// Loss groups: one per (kind, subdomain) on the outer boundary and one per
/// interface pair (subdomain < partner).
struct GroupKey {
  BCKind kind = BCKind::Traction;
  int subdomain = 0;
  int partner = -1;

  std::string label() const;
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct SampleResidual {
  std::size_t index = 0;
  GroupKey group;
  std::vector<double> residual;
};

struct LossBreakdown {
  double total = 0.0;
  /// alpha * mean squared residual norm, keyed by GroupKey::label().
  std::map<std::string, double> components;
  std::map<std::string, double> weights;
};

/// alpha = l(group) / l(outer boundary).
double loss_weight(double group_length, double outer_length);

/// Weighted sum over groups of the sample mean of squared residual norms.
/// Within a group samples are summed in ascending `index` order. Throws when a
/// group with positive length has no samples or a sample's group is unknown.
LossBreakdown assemble_loss(std::span<const SampleResidual> samples, const std::map<GroupKey, double>& group_lengths,
                            double outer_length);

}  // namespace pihnn
