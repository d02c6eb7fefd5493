#include "pihnn/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pihnn/training.hpp"

namespace pihnn {

namespace {

void check_ring(double p, double r, double R) {
  if (!(r > 0.0 && r < R) || !std::isfinite(p)) throw ContractError("ring: need 0 < r < R and finite p");
}

// Angle subtended at z by the segment a -> b, in (-pi, pi].
double subtended(C64 a, C64 b, C64 z) { return std::arg((b - z) / (a - z)); }

double piece_winding(const BoundaryPiece& p, C64 z) {
  if (const auto* line = std::get_if<LineShape>(&p.shape)) return subtended(line->p0, line->p1, z);
  const auto& arc = std::get<ArcShape>(p.shape);
  const C64 a = piece_point(p, 0.0);
  const C64 b = piece_point(p, 1.0);
  // Outside the circle the arc can be deformed into its chord without
  // crossing z.
  if (std::abs(z - arc.center) >= arc.radius) return subtended(a, b, z);
  // Inside, the direction to the arc turns monotonically with the arc itself.
  const double two_pi = 2.0 * std::numbers::pi;
  const double sweep = arc.theta1 - arc.theta0;
  if (std::abs(sweep) >= two_pi) return sweep > 0.0 ? two_pi : -two_pi;
  double w = subtended(a, b, z);
  if (sweep > 0.0 && w < 0.0) w += two_pi;
  if (sweep < 0.0 && w > 0.0) w -= two_pi;
  return w;
}

double complex_variance(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  const C64 mean = m.mean();
  return (m.array() - mean).abs2().mean();
}

}  // namespace

std::pair<double, double> ring_exact_stress(double rho, double p, double r, double R) {
  check_ring(p, r, R);
  const double slack = 1e-12 * R;
  if (!(rho >= r - slack && rho <= R + slack)) throw ContractError("ring_exact_stress: rho outside [r, R]");
  const double k = -p * R * R / (R * R - r * r);
  const double q = r * r / (rho * rho);
  return {k * (1.0 - q), k * (1.0 + q)};
}

std::pair<C64, C64> ring_exact_potentials(C64 z, double p, double r, double R) {
  check_ring(p, r, R);
  if (z == C64(0.0)) throw ContractError("ring_exact_potentials: z = 0");
  const double k = R * R / (R * R - r * r);
  return {C64(-0.5 * p * k), C64(-p * r * r * k) / (z * z)};
}

PolarStress to_polar(const FieldPoint& f, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {f.sxx * c * c + 2.0 * f.sxy * s * c + f.syy * s * s, f.sxx * s * s - 2.0 * f.sxy * s * c + f.syy * c * c,
          (f.syy - f.sxx) * s * c + f.sxy * (c * c - s * s)};
}

FieldPoint from_polar(const PolarStress& p, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  FieldPoint f;
  f.sxx = p.srr * c * c - 2.0 * p.srt * s * c + p.stt * s * s;
  f.syy = p.srr * s * s + 2.0 * p.srt * s * c + p.stt * c * c;
  f.sxy = (p.srr - p.stt) * s * c + p.srt * (c * c - s * s);
  f.has_displacement = false;
  return f;
}

double winding_number(const DomainSpec& domain, int s, C64 z) {
  double total = 0.0;
  for (const BoundaryPiece& p : domain.pieces) {
    const auto& ids = p.subdomains;
    const bool first = !ids.empty() && ids[0] == s;
    const bool second = ids.size() > 1 && ids[1] == s;
    if (!first && !second) continue;
    // Traversal with the normal of subdomain s on the right.
    double sign = p.normal_side == NormalSide::Right ? 1.0 : -1.0;
    if (second) sign = -sign;
    total += sign * piece_winding(p, z);
  }
  return total / (2.0 * std::numbers::pi);
}

int locate(const DomainSpec& domain, C64 z) {
  for (int s = 0; s < domain.n_subdomains; ++s) {
    if (winding_number(domain, s, z) > 0.5) return s;
  }
  return -1;
}

GridBox bounding_box(const DomainSpec& domain) {
  GridBox box{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  auto take = [&](C64 z) {
    box.x0 = std::min(box.x0, z.real());
    box.x1 = std::max(box.x1, z.real());
    box.y0 = std::min(box.y0, z.imag());
    box.y1 = std::max(box.y1, z.imag());
  };
  for (const BoundaryPiece& p : domain.pieces) {
    take(piece_point(p, 0.0));
    take(piece_point(p, 1.0));
    if (const auto* arc = std::get_if<ArcShape>(&p.shape)) {
      const double lo = std::min(arc->theta0, arc->theta1);
      const double hi = std::max(arc->theta0, arc->theta1);
      const double quarter = std::numbers::pi / 2.0;
      for (double k = std::ceil(lo / quarter); k * quarter <= hi; k += 1.0) {
        take(arc->center + std::polar(arc->radius, k * quarter));
      }
    }
  }
  return box;
}

GridField make_grid(const DomainSpec& domain, const GridBox& box, int nx, int ny) {
  if (nx < 1 || ny < 1) throw ContractError("grid: sizes must be positive");
  if (!(box.x1 > box.x0 && box.y1 > box.y0)) throw ContractError("grid: empty box");
  GridField g;
  g.nx = nx;
  g.ny = ny;
  const double dx = (box.x1 - box.x0) / nx;
  const double dy = (box.y1 - box.y0) / ny;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = box.x0 + (i + 0.5) * dx;
      const double y = box.y0 + (j + 0.5) * dy;
      g.x.push_back(x);
      g.y.push_back(y);
      g.region.push_back(locate(domain, {x, y}));
    }
  }
  g.values.assign(g.x.size(), FieldPoint{});
  return g;
}

GridField evaluate_grid(const Networks& nets, const ProblemSpec& problem, const GridBox& box, int nx, int ny) {
  if (static_cast<int>(nets.size()) != problem.domain.n_subdomains) {
    throw ContractError("evaluate_grid: network count does not match the subdomain count");
  }
  GridField g = make_grid(problem.domain, box, nx, ny);
  g.has_displacement = problem.network.mode == NetworkMode::Standard;
  for (int s = 0; s < problem.domain.n_subdomains; ++s) {
    std::vector<std::size_t> idx;
    std::vector<C64> zs;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.region[k] == s) {
        idx.push_back(k);
        zs.emplace_back(g.x[k], g.y[k]);
      }
    }
    const std::vector<FieldPoint> f = eval_fields(nets[s], zs, problem.material);
    for (std::size_t k = 0; k < idx.size(); ++k) g.values[idx[k]] = f[k];
  }
  return g;
}

GridField reference_grid(const GridField& shape, const std::function<FieldPoint(C64)>& field, bool has_displacement) {
  GridField g = shape;
  g.has_displacement = has_displacement;
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.values[k] = g.masked(k) ? FieldPoint{} : field({g.x[k], g.y[k]});
  }
  return g;
}

GridError grid_l2_error(const GridField& a, const GridField& b) {
  if (a.nx != b.nx || a.ny != b.ny || a.x != b.x || a.y != b.y) throw ContractError("grid_l2_error: grids differ");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.masked(k) != b.masked(k)) throw ContractError("grid_l2_error: masks differ");
  }
  const bool disp = a.has_displacement && b.has_displacement;
  double s[5] = {0, 0, 0, 0, 0};
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.masked(k)) continue;
    const FieldPoint& p = a.values[k];
    const FieldPoint& q = b.values[k];
    s[0] += (p.sxx - q.sxx) * (p.sxx - q.sxx);
    s[1] += (p.syy - q.syy) * (p.syy - q.syy);
    s[2] += (p.sxy - q.sxy) * (p.sxy - q.sxy);
    if (disp) {
      s[3] += (p.ux - q.ux) * (p.ux - q.ux);
      s[4] += (p.uy - q.uy) * (p.uy - q.uy);
    }
    ++n;
  }
  if (n == 0) throw ContractError("grid_l2_error: every point is masked");
  const double inv = 1.0 / static_cast<double>(n);
  GridError e{std::sqrt(s[0] * inv), std::sqrt(s[1] * inv), std::sqrt(s[2] * inv), std::nullopt, std::nullopt};
  if (disp) {
    e.ux = std::sqrt(s[3] * inv);
    e.uy = std::sqrt(s[4] * inv);
  }
  return e;
}

void write_field_csv(std::ostream& os, const GridField& g) {
  os << "x,y,sxx,syy,sxy,ux,uy\n";
  for (std::size_t k = 0; k < g.size(); ++k) {
    os << format_real(g.x[k]) << ',' << format_real(g.y[k]);
    if (g.masked(k)) {
      os << ",,,,,\n";
      continue;
    }
    const FieldPoint& f = g.values[k];
    os << ',' << format_real(f.sxx) << ',' << format_real(f.syy) << ',' << format_real(f.sxy) << ',';
    if (g.has_displacement) {
      os << format_real(f.ux) << ',' << format_real(f.uy);
    } else {
      os << ',';
    }
    os << '\n';
  }
}

RingErrors ring_errors(const NetPair& pair, const Material& mat, const RingReference& ring, const GridField& grid) {
  std::vector<C64> zs;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!grid.masked(k)) zs.emplace_back(grid.x[k], grid.y[k]);
  }
  if (zs.empty()) throw ContractError("ring_errors: no interior grid points");
  const std::vector<Jet2> phi = forward_batch(pair.phi, zs);
  const std::vector<Jet2> psi = forward_batch(pair.psi, zs);
  double e[4] = {0, 0, 0, 0};
  double n[4] = {0, 0, 0, 0};
  double shear = 0.0;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const KMState s = km_state_from_jets(phi[k], psi[k], pair.phi.mode);
    const auto [dphi, dpsi] = ring_exact_potentials(zs[k], ring.p, ring.r, ring.R);
    e[0] += std::norm(s.dphi - dphi);
    n[0] += std::norm(dphi);
    e[1] += std::norm(s.dpsi - dpsi);
    n[1] += std::norm(dpsi);
    const PolarStress ps = to_polar(km_fields(zs[k], s, mat, false), std::arg(zs[k]));
    const auto [srr, stt] = ring_exact_stress(std::abs(zs[k]), ring.p, ring.r, ring.R);
    e[2] += (ps.srr - srr) * (ps.srr - srr);
    n[2] += srr * srr;
    e[3] += (ps.stt - stt) * (ps.stt - stt);
    n[3] += stt * stt;
    shear += ps.srt * ps.srt;
  }
  RingErrors out;
  out.dphi = std::sqrt(e[0] / n[0]);
  out.dpsi = std::sqrt(e[1] / n[1]);
  out.srr = std::sqrt(e[2] / n[2]);
  out.stt = std::sqrt(e[3] / n[3]);
  out.srt_rms = std::sqrt(shear / static_cast<double>(zs.size()));
  out.points = static_cast<int>(zs.size());
  return out;
}

std::function<FieldPoint(C64)> stress_field(const NetPair& pair, const Material& mat) {
  return [&pair, mat](C64 z) { return km_fields(z, mlp_forward(pair.phi, pair.psi, z), mat, false); };
}

std::pair<double, double> equilibrium_residual(const std::function<FieldPoint(C64)>& field, C64 z, double h) {
  if (!(h >= 1e-6 && h <= 1e-2)) throw ContractError("equilibrium_residual: h must lie in [1e-6, 1e-2]");
  const FieldPoint xp = field(z + h);
  const FieldPoint xm = field(z - h);
  const FieldPoint yp = field(z + C64(0.0, h));
  const FieldPoint ym = field(z - C64(0.0, h));
  const double inv = 1.0 / (2.0 * h);
  return {(xp.sxx - xm.sxx) * inv + (yp.sxy - ym.sxy) * inv, (xp.sxy - xm.sxy) * inv + (yp.syy - ym.syy) * inv};
}

std::pair<double, double> equilibrium_residual(const NetPair& pair, const Material& mat, C64 z, double h) {
  return equilibrium_residual(stress_field(pair, mat), z, h);
}

double trace_laplacian(const std::function<FieldPoint(C64)>& field, C64 z, double h) {
  if (!(h >= 1e-6 && h <= 1e-2)) throw ContractError("trace_laplacian: h must lie in [1e-6, 1e-2]");
  auto trace = [&](C64 w) {
    const FieldPoint f = field(w);
    return f.sxx + f.syy;
  };
  return (trace(z + h) + trace(z - h) + trace(z + C64(0.0, h)) + trace(z - C64(0.0, h)) - 4.0 * trace(z)) / (h * h);
}

void VarianceReport::write_csv(std::ostream& os) const {
  os << "layer,var_y,var_grad_phi,var_grad_dphi,var_grad_ddphi,var_grad_loss,overflow\n";
  for (const VarianceRow& r : rows) {
    os << r.layer << ',' << format_real(r.var_y) << ',' << format_real(r.var_grad_phi) << ','
       << format_real(r.var_grad_dphi) << ',' << format_real(r.var_grad_ddphi) << ',' << format_real(r.var_grad_loss) << ','
       << (overflow ? 1 : 0) << '\n';
  }
}

ProblemSpec appendix_square_problem(std::vector<int> hidden, ActivationKind activation) {
  ProblemSpec p;
  p.name = "appendix_square";
  const BoundaryValue zero{};
  auto line = [](std::string name, C64 a, C64 b, BoundaryCondition bc) {
    BoundaryPiece piece;
    piece.name = std::move(name);
    piece.shape = LineShape{a, b};
    piece.bc = bc;
    piece.normal_side = NormalSide::Right;
    return piece;
  };
  // Counter-clockwise, so the outward normal is on the right.
  p.domain.pieces = {
      line("bottom", {-1, -1}, {1, -1}, BoundaryCondition::displacement(zero)),
      line("right", {1, -1}, {1, 1}, BoundaryCondition::traction(zero)),
      line("top", {1, 1}, {-1, 1}, BoundaryCondition::displacement(zero)),
      line("left", {-1, 1}, {-1, -1}, BoundaryCondition::traction(zero)),
  };
  p.network.hidden = std::move(hidden);
  p.network.activation = activation;
  p.network.mode = NetworkMode::Standard;
  return p;
}

VarianceReport init_diagnostics(const ProblemSpec& problem, const DiagnosticsConfig& cfg) {
  problem.validate();
  if (cfg.probe < 1) throw ContractError("init_diagnostics: empty probe");
  if (cfg.batch < 1) throw ContractError("init_diagnostics: empty batch");
  Rng probe_rng(derive_seed(cfg.seed, 1));
  const std::vector<BoundarySample> probe = sample_boundary(problem.domain, cfg.probe, probe_rng);
  Rng batch_rng(derive_seed(cfg.seed, 0));
  const std::vector<BoundarySample> batch = sample_boundary(problem.domain, cfg.batch, batch_rng);

  const std::vector<int> widths = HoloMLP::widths_for(problem.network.hidden);
  Networks nets;
  for (int s = 0; s < problem.domain.n_subdomains; ++s) {
    InitConfig ic;
    ic.beta = cfg.beta;
    ic.m_e = cfg.m_e;
    for (const BoundarySample& p : probe) {
      if (p.subdomains[0] == s || p.subdomains[1] == s) ic.probe.push_back(p.z);
    }
    NetPair pair{HoloMLP::zeros(widths, problem.network.activation, problem.network.mode),
                 HoloMLP::zeros(widths, problem.network.activation, problem.network.mode)};
    Rng rng_phi(derive_seed(cfg.seed, 2 + 2 * static_cast<std::uint64_t>(s)));
    Rng rng_psi(derive_seed(cfg.seed, 3 + 2 * static_cast<std::uint64_t>(s)));
    init_weights(pair.phi, ic, rng_phi);
    init_weights(pair.psi, ic, rng_psi);
    nets.push_back(std::move(pair));
  }

  VarianceReport report;
  const std::size_t n_layers = widths.size() - 1;
  report.rows.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) report.rows[l].layer = static_cast<int>(l + 1);
  try {
    LossTape lt = loss_forward(nets, batch, problem);
    const MlpRecord& phi = lt.records[0][0];
    const CMatrix& out = lt.tape.value(phi.output);
    const Eigen::Index b = out.cols() / 3;
    for (std::size_t l = 0; l < n_layers; ++l) {
      report.rows[l].var_y = complex_variance(lt.tape.value(phi.preactivations[l]).leftCols(b));
    }
    for (int block = 0; block < 3; ++block) {
      CMatrix seed = CMatrix::Zero(1, out.cols());
      seed.middleCols(block * b, b).setConstant(1.0 / static_cast<double>(b));
      lt.tape.backward(phi.output, seed);
      for (std::size_t l = 0; l < n_layers; ++l) {
        const double v = complex_variance(lt.tape.grad(phi.weights[l]));
        (block == 0 ? report.rows[l].var_grad_phi : block == 1 ? report.rows[l].var_grad_dphi : report.rows[l].var_grad_ddphi) = v;
      }
    }
    lt.tape.backward(lt.loss);
    for (std::size_t l = 0; l < n_layers; ++l) report.rows[l].var_grad_loss = complex_variance(lt.tape.grad(phi.weights[l]));
  } catch (const NonFiniteError& e) {
    report.overflow = true;
    report.overflow_message = e.what();
  }
  for (const VarianceRow& r : report.rows) {
    for (double v : {r.var_y, r.var_grad_phi, r.var_grad_dphi, r.var_grad_ddphi, r.var_grad_loss}) {
      if (!std::isfinite(v)) {
        report.overflow = true;
        if (report.overflow_message.empty()) report.overflow_message = "non-finite variance";
      }
    }
  }
  return report;
}

VarianceReport average_reports(std::span<const VarianceReport> reports) {
  if (reports.empty()) throw ContractError("average_reports: no reports");
  VarianceReport out;
  out.rows = reports.front().rows;
  for (auto& r : out.rows) r = VarianceRow{r.layer};
  for (const VarianceReport& rep : reports) {
    if (rep.rows.size() != out.rows.size()) throw ContractError("average_reports: layer counts differ");
    out.overflow = out.overflow || rep.overflow;
    if (out.overflow_message.empty()) out.overflow_message = rep.overflow_message;
    for (std::size_t l = 0; l < out.rows.size(); ++l) {
      out.rows[l].var_y += rep.rows[l].var_y;
      out.rows[l].var_grad_phi += rep.rows[l].var_grad_phi;
      out.rows[l].var_grad_dphi += rep.rows[l].var_grad_dphi;
      out.rows[l].var_grad_ddphi += rep.rows[l].var_grad_ddphi;
      out.rows[l].var_grad_loss += rep.rows[l].var_grad_loss;
    }
  }
  const double inv = 1.0 / static_cast<double>(reports.size());
  for (auto& r : out.rows) {
    r.var_y *= inv;
    r.var_grad_phi *= inv;
    r.var_grad_dphi *= inv;
    r.var_grad_ddphi *= inv;
    r.var_grad_loss *= inv;
  }
  return out;
}

}  // namespace pihnn
