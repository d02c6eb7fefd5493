#include <algorithm>
#include <random>

#include "doctest.h"
#include "pihnn/elasticity.hpp"
#include "pihnn/geometry.hpp"

using namespace pihnn;

TEST_CASE("derived material constants") {
  const Material strain = Material::make(1.0, 1.0, PlaneMode::PlaneStrain);
  CHECK(strain.lambda_tilde() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(strain.gamma() == doctest::Approx(2.0).epsilon(1e-15));

  const Material stress = Material::make(1.0, 1.0, PlaneMode::PlaneStress);
  CHECK(stress.lambda_tilde() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // (3 - nu) / (1 + nu) with nu = 1/4
  CHECK(stress.gamma() == doctest::Approx(2.2).epsilon(1e-15));

  CHECK_THROWS_AS(Material::make(1.0, 0.0, PlaneMode::PlaneStrain), ContractError);
  CHECK_THROWS_AS(Material::make(-1.0, 1.0, PlaneMode::PlaneStrain), ContractError);
}

TEST_CASE("km fields") {
  const Material mat = Material::make(1.0, 1.0, PlaneMode::PlaneStrain);

  const FieldPoint zero = km_fields({0.3, 0.2}, KMState{}, mat);
  CHECK(zero.sxx == 0.0);
  CHECK(zero.syy == 0.0);
  CHECK(zero.sxy == 0.0);
  CHECK(zero.ux == 0.0);
  CHECK(zero.uy == 0.0);

  KMState biaxial;
  biaxial.dphi = 0.75;
  const FieldPoint b = km_fields({-1.0, 2.0}, biaxial, mat, false);
  CHECK(b.sxx == doctest::Approx(1.5));
  CHECK(b.syy == doctest::Approx(1.5));
  CHECK(b.sxy == doctest::Approx(0.0));

  // phi = z^2, psi = z at z = 1 + i, evaluated by hand.
  const C64 z(1.0, 1.0);
  KMState s{z * z, 2.0 * z, 2.0, z, 1.0, true};
  const FieldPoint f = km_fields(z, s, mat);
  CHECK(f.sxx == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.syy == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(f.sxy == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(f.ux == doctest::Approx(-2.5).epsilon(1e-14));
  CHECK(f.uy == doctest::Approx(2.5).epsilon(1e-14));

  KMState stress_only = s;
  stress_only.has_potentials = false;
  CHECK_THROWS_AS(km_fields(z, stress_only, mat, true), ContractError);
}

TEST_CASE("boundary residuals") {
  const double p = 2.5;
  FieldPoint f;
  f.sxx = f.syy = p;
  const auto t = bc_residual(BoundaryCondition::traction({BoundaryProfile::Constant, {p, 0.0}, 0.0}), f, {1, 0}, 0.0);
  CHECK(t == std::vector<double>{0.0, 0.0});

  // Pressure q on a face with normal n loads it with -q n.
  FieldPoint hydro;
  hydro.sxx = hydro.syy = -3.0;
  const auto pr = bc_residual(BoundaryCondition::traction({BoundaryProfile::Pressure, {}, 3.0}), hydro,
                              {0.6, 0.8}, 0.0);
  CHECK(std::abs(pr[0]) < 1e-15);
  CHECK(std::abs(pr[1]) < 1e-15);

  FieldPoint sym;
  sym.sxx = 4.0;
  sym.syy = -1.0;
  sym.ux = 0.0;
  sym.uy = 0.7;
  const auto sr = bc_residual(BoundaryCondition::symmetry(), sym, {1, 0}, 0.0);
  CHECK(sr == std::vector<double>{0.0, 0.0});
  sym.sxy = 0.5;
  sym.ux = 0.25;
  const auto sr2 = bc_residual(BoundaryCondition::symmetry(), sym, {1, 0}, 0.0);
  CHECK(std::abs(sr2[0]) == doctest::Approx(0.5));
  CHECK(sr2[1] == doctest::Approx(0.25));

  FieldPoint moved;
  moved.ux = 1.0;
  moved.uy = 2.0;
  CHECK(bc_residual(BoundaryCondition::displacement({}), moved, {0, 1}, 0.0) == std::vector<double>{1.0, 2.0});

  FieldPoint stress_only;
  stress_only.has_displacement = false;
  CHECK_THROWS_AS(bc_residual(BoundaryCondition::displacement({}), stress_only, {0, 1}, 0.0), ContractError);
  CHECK_THROWS_AS(bc_residual(BoundaryCondition::interface(0, 1), f, {0, 1}, 0.0), ContractError);
  CHECK_THROWS_AS(bc_residual(BoundaryCondition::symmetry(), f, {0, 2}, 0.0), ContractError);
}

TEST_CASE("interface residuals") {
  FieldPoint f1;
  f1.sxx = 1.0;
  f1.syy = -2.0;
  f1.sxy = 0.5;
  f1.ux = 0.1;
  f1.uy = -0.3;
  CHECK(interface_residual(f1, f1, {1, 0}) == std::vector<double>{0, 0, 0, 0});

  FieldPoint f2 = f1;
  f2.sxy -= 0.4;
  const auto r = interface_residual(f1, f2, {1, 0});
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 0.0);
  CHECK(r[3] == doctest::Approx(0.4));

  f2.ux = 0.3;
  f2.syy = 1.0;
  const auto a = interface_residual(f1, f2, {0.6, 0.8});
  const auto b = interface_residual(f1, f2, {-0.6, -0.8});
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
  CHECK(a[2] == doctest::Approx(-b[2]));
  CHECK(a[3] == doctest::Approx(-b[3]));
}

TEST_CASE("loss weights on a square with two clamped and two free edges") {
  DomainSpec d;
  const C64 c[4] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  for (int k = 0; k < 4; ++k) {
    BoundaryPiece p;
    p.name = "edge" + std::to_string(k);
    p.shape = LineShape{c[k], c[(k + 1) % 4]};
    p.bc = k % 2 == 0 ? BoundaryCondition::displacement({}) : BoundaryCondition::traction({});
    d.pieces.push_back(p);
  }
  const auto lengths = d.group_lengths();
  CHECK(lengths.size() == 2);
  for (const auto& [key, len] : lengths) CHECK(loss_weight(len, d.outer_length()) == 0.5);
}

TEST_CASE("assemble_loss") {
  const GroupKey neumann{BCKind::Traction, 0, -1};
  const std::map<GroupKey, double> one{{neumann, 2.0}};

  std::vector<SampleResidual> zeros{{0, neumann, {0.0, 0.0}}, {1, neumann, {0.0, 0.0}}};
  CHECK(assemble_loss(zeros, one, 2.0).total == 0.0);

  std::vector<SampleResidual> unit{{0, neumann, {1.0, 0.0}}, {1, neumann, {0.0, 1.0}}};
  CHECK(assemble_loss(unit, one, 2.0).total == 1.0);

  const GroupKey other{BCKind::Displacement, 0, -1};
  std::vector<SampleResidual> stray{{0, other, {1.0, 0.0}}};
  CHECK_THROWS_AS(assemble_loss(stray, one, 2.0), ContractError);
  CHECK_THROWS_AS(assemble_loss({}, one, 2.0), ContractError);
  CHECK_THROWS_AS(loss_weight(1.0, 0.0), ContractError);
}

TEST_CASE("assemble_loss ignores the order of samples") {
  const GroupKey a{BCKind::Traction, 0, -1};
  const GroupKey b{BCKind::Displacement, 0, -1};
  const std::map<GroupKey, double> lengths{{a, 3.0}, {b, 1.0}};
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<SampleResidual> samples;
  for (std::size_t i = 0; i < 97; ++i) samples.push_back({i, i % 3 ? a : b, {u(gen), u(gen)}});
  const double reference = assemble_loss(samples, lengths, 4.0).total;
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(samples.begin(), samples.end(), gen);
    CHECK(assemble_loss(samples, lengths, 4.0).total == reference);
  }
}
