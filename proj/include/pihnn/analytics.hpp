#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "pihnn/loss.hpp"
#include "pihnn/problem.hpp"

namespace pihnn {

/// Radial and hoop stress of a ring of radii r < R under outer pressure p.
/// Throws ContractError unless 0 < r < R and r <= rho <= R.
std::pair<double, double> ring_exact_stress(double rho, double p, double r, double R);

/// (phi', psi') of the ring solution. Throws ContractError at z = 0.
std::pair<C64, C64> ring_exact_potentials(C64 z, double p, double r, double R);

/// Stress components in the frame rotated by theta (radial, hoop, shear when
/// theta is the polar angle).
struct PolarStress {
  double srr = 0.0;
  double stt = 0.0;
  double srt = 0.0;
};

PolarStress to_polar(const FieldPoint& f, double theta);
FieldPoint from_polar(const PolarStress& s, double theta);

/// Winding number (in turns) of the boundary of subdomain `s` around z; pieces are
/// oriented so that their outward normal lies on the right. Arcs enter
/// exactly, not through a polygonal approximation.
double winding_number(const DomainSpec& domain, int s, C64 z);

/// Subdomain containing z, or -1 when z lies outside every subdomain.
int locate(const DomainSpec& domain, C64 z);

GridBox bounding_box(const DomainSpec& domain);

/// Cell-centred grid of nx x ny points, row-major in x (index j * nx + i).
struct GridField {
  int nx = 0;
  int ny = 0;
  std::vector<double> x;
  std::vector<double> y;
  /// Subdomain of each point, -1 where masked.
  std::vector<int> region;
  std::vector<FieldPoint> values;
  bool has_displacement = false;

  bool masked(std::size_t k) const { return region[k] < 0; }
  std::size_t size() const { return x.size(); }
};

GridField make_grid(const DomainSpec& domain, const GridBox& box, int nx, int ny);

/// Evaluates every unmasked grid point with the network of its subdomain.
GridField evaluate_grid(const Networks& nets, const ProblemSpec& problem, const GridBox& box, int nx, int ny);

/// Same grid with values from a closed-form field.
GridField reference_grid(const GridField& shape, const std::function<FieldPoint(C64)>& field,
                         bool has_displacement);

/// Root mean square of componentwise differences over unmasked points.
struct GridError {
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  /// Absent when either grid lacks displacements.
  std::optional<double> ux;
  std::optional<double> uy;
};

/// Throws ContractError when the grids or their masks differ.
GridError grid_l2_error(const GridField& a, const GridField& b);

/// Field CSV: x, y, sxx, syy, sxy, ux, uy with empty cells where masked or
/// without displacements.
void write_field_csv(std::ostream& os, const GridField& g);

/// Ring diagnostics on a grid: relative L2 errors of phi', psi', sigma_r and
/// sigma_theta and the RMS of the polar shear stress.
struct RingErrors {
  double dphi = 0.0;
  double dpsi = 0.0;
  double srr = 0.0;
  double stt = 0.0;
  double srt_rms = 0.0;
  int points = 0;
};

RingErrors ring_errors(const NetPair& pair, const Material& mat, const RingReference& ring, const GridField& grid);

/// Central-difference divergence of the stress field at z with step h.
std::pair<double, double> equilibrium_residual(const std::function<FieldPoint(C64)>& field, C64 z, double h);
std::pair<double, double> equilibrium_residual(const NetPair& pair, const Material& mat, C64 z, double h);

/// Five-point Laplacian of sxx + syy at z.
double trace_laplacian(const std::function<FieldPoint(C64)>& field, C64 z, double h);

/// Stress-only evaluation of a network pair at one point.
std::function<FieldPoint(C64)> stress_field(const NetPair& pair, const Material& mat);

/// Per-layer sampled variances after initialization.
struct VarianceRow {
  int layer = 0;
  /// Var[Re y] + Var[Im y] of the phi branch pre-activations over units and
  /// batch, i.e. the complex variance.
  double var_y = 0.0;
  double var_grad_phi = 0.0;
  double var_grad_dphi = 0.0;
  double var_grad_ddphi = 0.0;
  double var_grad_loss = 0.0;
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
  bool overflow = false;
  std::string overflow_message;

  void write_csv(std::ostream& os) const;
};

/// Square [-1, 1]^2 with zero displacement on y = +-1 and zero traction on
/// x = +-1, standard networks.
ProblemSpec appendix_square_problem(std::vector<int> hidden, ActivationKind activation);

struct DiagnosticsConfig {
  double beta = 0.5;
  int m_e = 3;
  int probe = 10000;
  int batch = 1000;
  std::uint64_t seed = 0;
};

/// Initializes the problem's networks (subdomain 0) with the given beta and
/// m_e, runs one forward pass and four backward passes on a boundary batch and
/// reports per weight layer of the phi branch:
///  - the complex variance of the pre-activation values,
///  - the complex variance over the layer's weight entries of the gradients of
///    Re(mean phi), Re(mean phi') and Re(mean phi'') over the batch and of the
///    boundary loss.
/// Overflow in the forward pass sets `overflow` instead of throwing; an empty
/// or all-zero probe is rejected.
VarianceReport init_diagnostics(const ProblemSpec& problem, const DiagnosticsConfig& cfg);

/// Entry-wise mean of reports with equal layer counts.
VarianceReport average_reports(std::span<const VarianceReport> reports);

}  // namespace pihnn
