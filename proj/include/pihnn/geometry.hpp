#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pihnn/elasticity.hpp"
#include "pihnn/rng.hpp"

namespace pihnn {

struct LineShape {
  C64 p0;
  C64 p1;
  friend bool operator==(const LineShape&, const LineShape&) = default;
};

/// Circular arc traversed from theta0 to theta1 (either direction).
struct ArcShape {
  C64 center;
  double radius = 1.0;
  double theta0 = 0.0;
  double theta1 = 0.0;
  friend bool operator==(const ArcShape&, const ArcShape&) = default;
};

/// Side of the traversal direction the outward normal points to.
enum class NormalSide { Left, Right };

struct BoundaryPiece {
  std::string name;
  std::variant<LineShape, ArcShape> shape;
  BoundaryCondition bc;
  NormalSide normal_side = NormalSide::Right;
  /// One id for outer pieces, two for interfaces.
  std::vector<int> subdomains{0};

  bool is_interface() const { return bc.kind == BCKind::Interface; }
  friend bool operator==(const BoundaryPiece&, const BoundaryPiece&) = default;
};

double piece_length(const BoundaryPiece& p);
/// Point at arc-length fraction t in [0, 1].
C64 piece_point(const BoundaryPiece& p, double t);
/// Unit tangent along the traversal direction.
Vec2 piece_tangent(const BoundaryPiece& p, double t);
Vec2 outward_normal(const BoundaryPiece& p, double t);

/// Throws ContractError on zero length, non-positive radius, or inconsistent
/// subdomain tags.
void validate_piece(const BoundaryPiece& p, int n_subdomains);

struct DomainSpec {
  std::vector<BoundaryPiece> pieces;
  int n_subdomains = 1;

  void validate() const;
  /// l(dOmega): total length of non-interface pieces.
  double outer_length() const;
  /// Length of every loss group present in the domain.
  std::map<GroupKey, double> group_lengths() const;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

GroupKey group_of(const BoundaryPiece& p);

struct BoundarySample {
  C64 z;
  Vec2 normal;
  int piece = 0;
  std::array<int, 2> subdomains{0, -1};
  double t = 0.0;
};

/// Largest-remainder apportionment of n points over pieces of given lengths.
/// A piece left with zero points borrows one from the currently largest count.
std::vector<int> allocate_samples(std::span<const double> lengths, int n);

/// n points uniform in arc length, counts per piece from allocate_samples.
/// Samples are ordered by piece, then by draw.
std::vector<BoundarySample> sample_boundary(const DomainSpec& spec, int n, Rng& rng);

}  // namespace pihnn
