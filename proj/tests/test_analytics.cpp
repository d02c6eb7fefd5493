#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pihnn/analytics.hpp"
#include "pihnn/config.hpp"
#include "pihnn/training.hpp"

using namespace pihnn;

namespace {

ProblemSpec load(const char* name) {
  return load_config(testing::source_path(std::string("configs/") + name + ".json"));
}

const char* const kConfigs[] = {"ring_quadrant", "plate_hole_quadrant", "clamped_square", "rail_section",
                                "dd_plate_hole"};

// Divergence theorem with a midpoint rule on each piece.
double boundary_area(const DomainSpec& d, int s) {
  double area = 0.0;
  const int m = 4000;
  for (const BoundaryPiece& p : d.pieces) {
    const auto it = std::find(p.subdomains.begin(), p.subdomains.end(), s);
    if (it == p.subdomains.end()) continue;
    const double sign = it == p.subdomains.begin() ? 1.0 : -1.0;
    const double ds = piece_length(p) / m;
    for (int k = 0; k < m; ++k) {
      const double t = (k + 0.5) / m;
      const C64 z = piece_point(p, t);
      const Vec2 n = outward_normal(p, t);
      area += 0.5 * sign * (z.real() * n.x + z.imag() * n.y) * ds;
    }
  }
  return area;
}

FieldPoint ring_field(C64 z) {
  const auto [srr, stt] = ring_exact_stress(std::abs(z), -1.0, 0.5, 2.0);
  FieldPoint f = from_polar({srr, stt, 0.0}, std::arg(z));
  f.has_displacement = false;
  return f;
}

}  // namespace

TEST_CASE("ring closed form") {
  const double p = -1.0, r = 0.5, R = 2.0;
  const auto inner = ring_exact_stress(r, p, r, R);
  const auto outer = ring_exact_stress(R, p, r, R);
  const auto mid = ring_exact_stress(1.0, p, r, R);
  CHECK(std::abs(inner.first) < 1e-14);
  CHECK(outer.first == doctest::Approx(-p).epsilon(1e-14));
  CHECK(mid.first == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(mid.second == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  const auto [dphi, dpsi] = ring_exact_potentials(C64(1.0, 1.0), p, r, R);
  CHECK(std::abs(dphi - C64(8.0 / 15.0)) < 1e-14);
  CHECK(std::abs(ring_exact_potentials(C64(1e8, 0.0), p, r, R).second) < 1e-15);
  CHECK(std::abs(dpsi - C64(4.0 / 15.0) / (C64(1.0, 1.0) * C64(1.0, 1.0))) < 1e-14);
  CHECK_THROWS_AS(ring_exact_stress(0.1, p, r, R), ContractError);
  CHECK_THROWS_AS(ring_exact_stress(1.0, p, R, r), ContractError);
  CHECK_THROWS_AS(ring_exact_potentials(C64(0.0), p, r, R), ContractError);
}

TEST_CASE("potentials reproduce the closed-form stresses") {
  const Material mat = Material::make(1.0, 1.0, PlaneMode::PlaneStrain);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double rho = 0.5 + 1.5 * rng.uniform();
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    const C64 z = std::polar(rho, th);
    const auto [dphi, dpsi] = ring_exact_potentials(z, -1.0, 0.5, 2.0);
    KMState s;
    s.dphi = dphi;
    s.ddphi = 0.0;
    s.dpsi = dpsi;
    const PolarStress ps = to_polar(km_fields(z, s, mat, false), th);
    const auto [srr, stt] = ring_exact_stress(rho, -1.0, 0.5, 2.0);
    CHECK(std::abs(ps.srr - srr) < 1e-10);
    CHECK(std::abs(ps.stt - stt) < 1e-10);
    CHECK(std::abs(ps.srt) < 1e-10);
  }
}

TEST_CASE("polar rotation round trip") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    FieldPoint f;
    f.sxx = rng.normal();
    f.syy = rng.normal();
    f.sxy = rng.normal();
    const double th = 7.0 * rng.normal();
    const PolarStress p = to_polar(f, th);
    const FieldPoint g = from_polar(p, th);
    CHECK(std::abs(g.sxx - f.sxx) < 1e-12);
    CHECK(std::abs(g.syy - f.syy) < 1e-12);
    CHECK(std::abs(g.sxy - f.sxy) < 1e-12);
    // Trace is invariant.
    CHECK(std::abs(p.srr + p.stt - f.sxx - f.syy) < 1e-12);
  }
  const PolarStress zero = to_polar({1.0, 2.0, 3.0}, 0.0);
  CHECK(zero.srr == 1.0);
  CHECK(zero.stt == 2.0);
  CHECK(zero.srt == 3.0);
}

TEST_CASE("grid error behaves like a distance") {
  const ProblemSpec p = load("ring_quadrant");
  const GridField shape = make_grid(p.domain, bounding_box(p.domain), 30, 30);
  const GridField a = reference_grid(shape, ring_field, false);
  const GridField b = reference_grid(shape, [](C64 z) { FieldPoint f = ring_field(z); f.sxx += 0.1 * z.real(); return f; }, false);
  const GridField c = reference_grid(shape, [](C64 z) { FieldPoint f = ring_field(z); f.sxy -= 0.2; return f; }, false);
  const GridError aa = grid_l2_error(a, a);
  CHECK(aa.sxx == 0.0);
  CHECK(aa.syy == 0.0);
  CHECK(aa.sxy == 0.0);
  CHECK_FALSE(aa.ux.has_value());
  const GridError ab = grid_l2_error(a, b);
  const GridError ba = grid_l2_error(b, a);
  CHECK(ab.sxx == ba.sxx);
  CHECK(ab.sxx > 0.0);
  const GridError ac = grid_l2_error(a, c);
  const GridError bc = grid_l2_error(b, c);
  CHECK(ac.sxy == doctest::Approx(0.2).epsilon(1e-12));
  for (auto f : {&GridError::sxx, &GridError::syy, &GridError::sxy}) CHECK(ac.*f <= ab.*f + bc.*f + 1e-15);
  const GridField other = make_grid(p.domain, bounding_box(p.domain), 20, 30);
  CHECK_THROWS_AS(grid_l2_error(a, reference_grid(other, ring_field, false)), ContractError);
}

TEST_CASE("network fields are in equilibrium with harmonic trace") {
  const ProblemSpec p = load("ring_quadrant");
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg = p.training;
    cfg.seed = seed;
    const Networks nets = initialize_networks(p, cfg).nets;
    const auto field = stress_field(nets[0], p.material);
    double scale = 0.0;
    std::vector<C64> zs;
    for (int k = 0; k < 100; ++k) {
      zs.push_back(std::polar(0.6 + 1.3 * rng.uniform(), std::numbers::pi * (0.5 + 0.5 * rng.uniform())));
      const FieldPoint f = field(zs.back());
      scale = std::max({scale, std::abs(f.sxx), std::abs(f.syy), std::abs(f.sxy)});
    }
    for (const C64 z : zs) {
      const auto [rx, ry] = equilibrium_residual(nets[0], p.material, z, 1e-4);
      CHECK(std::hypot(rx, ry) < 1e-5 * std::max(1.0, scale));
      CHECK(std::abs(trace_laplacian(field, z, 1e-3)) < 1e-3 * std::max(1.0, scale));
    }
  }
  // The closed form is exact too.
  const auto [rx, ry] = equilibrium_residual(ring_field, C64(1.0, 0.0), 1e-4);
  CHECK(std::hypot(rx, ry) < 1e-6);
  CHECK(std::abs(trace_laplacian(ring_field, C64(0.0, 1.0), 1e-3)) < 1e-5);
}

TEST_CASE("winding numbers and masks") {
  const ProblemSpec ring = load("ring_quadrant");
  CHECK(winding_number(ring.domain, 0, C64(-1.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(winding_number(ring.domain, 0, C64(1.0, 1.0))) < 1e-12);
  CHECK(std::abs(winding_number(ring.domain, 0, C64(-0.2, 0.2))) < 1e-12);
  CHECK(locate(ring.domain, C64(-1.0, 1.0)) == 0);
  CHECK(locate(ring.domain, C64(-0.1, 0.1)) == -1);
  CHECK(locate(ring.domain, C64(-1.9, 1.9)) == -1);

  const ProblemSpec dd = load("dd_plate_hole");
  CHECK(locate(dd.domain, C64(1.1, 1.1)) == 0);
  CHECK(locate(dd.domain, C64(-1.1, 1.1)) == 1);
  CHECK(locate(dd.domain, C64(-1.1, -1.1)) == 2);
  CHECK(locate(dd.domain, C64(1.1, -1.1)) == 3);
  CHECK(locate(dd.domain, C64(0.1, 0.1)) == -1);
}

TEST_CASE("masked grid area matches the enclosed area") {
  for (const char* name : kConfigs) {
    CAPTURE(std::string(name));
    const ProblemSpec p = load(name);
    const GridBox box = bounding_box(p.domain);
    const int n = 400;
    const GridField g = make_grid(p.domain, box, n, n);
    const double cell = (box.x1 - box.x0) * (box.y1 - box.y0) / (n * n);
    for (int s = 0; s < p.domain.n_subdomains; ++s) {
      const double exact = boundary_area(p.domain, s);
      CHECK(exact > 0.0);
      const auto count = std::count(g.region.begin(), g.region.end(), s);
      CHECK(count * cell == doctest::Approx(exact).epsilon(0.01));
    }
  }
  const ProblemSpec ring = load("ring_quadrant");
  CHECK(boundary_area(ring.domain, 0) == doctest::Approx(std::numbers::pi * (4.0 - 0.25) / 4.0).epsilon(1e-6));
}

TEST_CASE("initialization diagnostics") {
  const ProblemSpec p = appendix_square_problem({20, 20}, ActivationKind::Exp);
  DiagnosticsConfig cfg;
  cfg.probe = 0;
  CHECK_THROWS_AS(init_diagnostics(p, cfg), ContractError);
  cfg.probe = 500;
  cfg.batch = 200;
  const VarianceReport r = init_diagnostics(p, cfg);
  CHECK_FALSE(r.overflow);
  CHECK(r.rows.size() == 3);
  for (const auto& row : r.rows) {
    CHECK(std::isfinite(row.var_y));
    CHECK(row.var_y > 0.0);
  }
  const VarianceReport again = init_diagnostics(p, cfg);
  CHECK(again.rows[1].var_y == r.rows[1].var_y);
  const VarianceReport avg = average_reports(std::vector<VarianceReport>{r, again});
  CHECK(avg.rows[2].var_grad_loss == doctest::Approx(r.rows[2].var_grad_loss));
}

TEST_CASE("field csv layout") {
  const ProblemSpec p = load("ring_quadrant");
  const GridField shape = make_grid(p.domain, bounding_box(p.domain), 3, 2);
  const GridField g = reference_grid(shape, ring_field, false);
  std::ostringstream os;
  write_field_csv(os, g);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,y,sxx,syy,sxy,ux,uy");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    CHECK(line.substr(line.size() - 2) == ",,");
  }
  CHECK(rows == 6);
}
