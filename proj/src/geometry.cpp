#include "pihnn/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pihnn {

namespace {

Vec2 to_vec(C64 z) { return {z.real(), z.imag()}; }

Vec2 normalized(Vec2 v) {
  const double n = std::hypot(v.x, v.y);
  return {v.x / n, v.y / n};
}

}  // namespace

double piece_length(const BoundaryPiece& p) {
  if (const auto* line = std::get_if<LineShape>(&p.shape)) return std::abs(line->p1 - line->p0);
  const auto& arc = std::get<ArcShape>(p.shape);
  return arc.radius * std::abs(arc.theta1 - arc.theta0);
}

C64 piece_point(const BoundaryPiece& p, double t) {
  if (const auto* line = std::get_if<LineShape>(&p.shape)) return line->p0 + t * (line->p1 - line->p0);
  const auto& arc = std::get<ArcShape>(p.shape);
  const double theta = arc.theta0 + t * (arc.theta1 - arc.theta0);
  return arc.center + std::polar(arc.radius, theta);
}

Vec2 piece_tangent(const BoundaryPiece& p, double t) {
  if (const auto* line = std::get_if<LineShape>(&p.shape)) {
    const C64 d = line->p1 - line->p0;
    if (std::abs(d) == 0.0) throw ContractError("piece '" + p.name + "' is degenerate");
    return normalized(to_vec(d));
  }
  const auto& arc = std::get<ArcShape>(p.shape);
  if (arc.theta1 == arc.theta0 || !(arc.radius > 0.0)) throw ContractError("piece '" + p.name + "' is degenerate");
  const double theta = arc.theta0 + t * (arc.theta1 - arc.theta0);
  const double dir = arc.theta1 > arc.theta0 ? 1.0 : -1.0;
  return {-std::sin(theta) * dir, std::cos(theta) * dir};
}

Vec2 outward_normal(const BoundaryPiece& p, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ContractError("outward_normal: parameter outside [0, 1]");
  const Vec2 tan = piece_tangent(p, t);
  return p.normal_side == NormalSide::Left ? Vec2{-tan.y, tan.x} : Vec2{tan.y, -tan.x};
}

void validate_piece(const BoundaryPiece& p, int n_subdomains) {
  const std::string where = "piece '" + p.name + "': ";
  if (const auto* arc = std::get_if<ArcShape>(&p.shape)) {
    if (!(arc->radius > 0.0)) throw ContractError(where + "arc radius must be positive");
  }
  if (!(piece_length(p) > 0.0)) throw ContractError(where + "length must be positive");
  for (int id : p.subdomains) {
    if (id < 0 || id >= n_subdomains) throw ContractError(where + "subdomain id " + std::to_string(id) + " out of range");
  }
  if (p.is_interface()) {
    if (p.subdomains.size() != 2 || p.subdomains[0] == p.subdomains[1]) {
      throw ContractError(where + "interface pieces need two distinct subdomain ids");
    }
    const auto& ids = p.bc.interface_ids;
    const bool same = (ids[0] == p.subdomains[0] && ids[1] == p.subdomains[1]) ||
                      (ids[0] == p.subdomains[1] && ids[1] == p.subdomains[0]);
    if (!same) throw ContractError(where + "interface ids do not match the piece's subdomains");
  } else if (p.subdomains.size() != 1) {
    throw ContractError(where + "outer pieces belong to exactly one subdomain");
  }
}

void DomainSpec::validate() const {
  if (n_subdomains < 1) throw ContractError("domain: at least one subdomain required");
  if (pieces.empty()) throw ContractError("domain: no boundary pieces");
  for (const auto& p : pieces) validate_piece(p, n_subdomains);
  if (!(outer_length() > 0.0)) throw ContractError("domain: outer boundary has zero length");
}

double DomainSpec::outer_length() const {
  double total = 0.0;
  for (const auto& p : pieces) {
    if (!p.is_interface()) total += piece_length(p);
  }
  return total;
}

GroupKey group_of(const BoundaryPiece& p) {
  if (p.is_interface()) {
    return {BCKind::Interface, std::min(p.subdomains[0], p.subdomains[1]), std::max(p.subdomains[0], p.subdomains[1])};
  }
  return {p.bc.kind, p.subdomains[0], -1};
}

std::map<GroupKey, double> DomainSpec::group_lengths() const {
  std::map<GroupKey, double> out;
  for (const auto& p : pieces) out[group_of(p)] += piece_length(p);
  return out;
}

std::vector<int> allocate_samples(std::span<const double> lengths, int n) {
  const int k = static_cast<int>(lengths.size());
  if (k == 0) throw ContractError("allocate_samples: no pieces");
  if (n < k) {
    throw ContractError("sample_boundary: " + std::to_string(n) + " points cannot cover " + std::to_string(k) +
                        " pieces");
  }
  double total = 0.0;
  for (double l : lengths) total += l;
  std::vector<int> counts(k);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double share = n * lengths[i] / total;
    counts[i] = static_cast<int>(std::floor(share));
    assigned += counts[i];
    remainders.emplace_back(share - counts[i], i);
  }
  // Largest remainder first; ties go to the lower piece index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int r = 0; assigned < n; ++r, ++assigned) ++counts[remainders[r].second];
  for (int i = 0; i < k; ++i) {
    if (counts[i] == 0) {
      auto donor = std::max_element(counts.begin(), counts.end());
      --*donor;
      counts[i] = 1;
    }
  }
  return counts;
}

std::vector<BoundarySample> sample_boundary(const DomainSpec& spec, int n, Rng& rng) {
  spec.validate();
  std::vector<double> lengths;
  for (const auto& p : spec.pieces) lengths.push_back(piece_length(p));
  const std::vector<int> counts = allocate_samples(lengths, n);
  std::vector<BoundarySample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < spec.pieces.size(); ++i) {
    const BoundaryPiece& p = spec.pieces[i];
    for (int k = 0; k < counts[i]; ++k) {
      BoundarySample s;
      s.t = rng.uniform();
      s.z = piece_point(p, s.t);
      s.normal = outward_normal(p, s.t);
      s.piece = static_cast<int>(i);
      s.subdomains = {p.subdomains[0], p.subdomains.size() > 1 ? p.subdomains[1] : -1};
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace pihnn
