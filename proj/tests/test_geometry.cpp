#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "pihnn/config.hpp"
#include "pihnn/geometry.hpp"

using namespace pihnn;

namespace {

BoundaryPiece line(C64 a, C64 b, NormalSide side = NormalSide::Right) {
  BoundaryPiece p;
  p.name = "line";
  p.shape = LineShape{a, b};
  p.normal_side = side;
  return p;
}

BoundaryPiece arc(C64 c, double r, double t0, double t1, NormalSide side = NormalSide::Right) {
  BoundaryPiece p;
  p.name = "arc";
  p.shape = ArcShape{c, r, t0, t1};
  p.normal_side = side;
  return p;
}

const char* kShipped[] = {"ring_quadrant", "plate_hole_quadrant", "clamped_square", "rail_section",
                          "dd_plate_hole"};

ProblemSpec shipped(const std::string& name) { return load_config(testing::source_path("configs/" + name + ".json")); }

}  // namespace

TEST_CASE("piece lengths") {
  CHECK(piece_length(line(0.0, {3.0, 4.0})) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(piece_length(arc(0.0, 2.0, 0.0, std::numbers::pi / 2)) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
  CHECK_THROWS_AS(validate_piece(arc(0.0, 2.0, 1.0, 1.0), 1), ContractError);
  CHECK_THROWS_AS(validate_piece(arc(0.0, -1.0, 0.0, 1.0), 1), ContractError);
  CHECK_THROWS_AS(validate_piece(line(1.0, 1.0), 1), ContractError);
  BoundaryPiece bad_tag = line(0.0, 1.0);
  bad_tag.subdomains = {3};
  CHECK_THROWS_AS(validate_piece(bad_tag, 2), ContractError);
}

TEST_CASE("outward normals") {
  const Vec2 up = outward_normal(line(0.0, 1.0, NormalSide::Left), 0.5);
  CHECK(up.x == doctest::Approx(0.0));
  CHECK(up.y == doctest::Approx(1.0));
  const Vec2 out = outward_normal(arc(0.0, 1.0, 0.0, std::numbers::pi / 2), 0.0);
  CHECK(out.x == doctest::Approx(1.0));
  CHECK(out.y == doctest::Approx(0.0));
  // A hole: material outside the circle, normal towards the centre.
  const Vec2 in = outward_normal(arc(0.0, 1.0, 0.0, std::numbers::pi / 2, NormalSide::Left), 0.0);
  CHECK(in.x == doctest::Approx(-1.0));
  CHECK(in.y == doctest::Approx(0.0));
}

TEST_CASE("sample allocation") {
  const std::vector<double> two{1.0, 3.0};
  CHECK(allocate_samples(two, 200) == std::vector<int>{50, 150});
  const std::vector<double> tiny{100.0, 0.001};
  const auto counts = allocate_samples(tiny, 10);
  CHECK(counts[0] + counts[1] == 10);
  CHECK(counts[1] >= 1);
}

TEST_CASE("arc samples lie on the circle") {
  DomainSpec d;
  d.pieces.push_back(arc({0.5, -0.25}, 1.75, 0.3, 2.1));
  Rng rng(4);
  const auto s = sample_boundary(d, 10, rng);
  CHECK(s.size() == 10);
  for (const auto& b : s) CHECK(std::abs(std::abs(b.z - C64(0.5, -0.25)) - 1.75) < 1e-12);
}

TEST_CASE("ring quadrant perimeter and allocation") {
  const ProblemSpec ring = shipped("ring_quadrant");
  const double R = 2.0, r = 0.5;
  const double perimeter = std::numbers::pi * R / 2 + std::numbers::pi * r / 2 + 2 * (R - r);
  CHECK(std::abs(ring.domain.outer_length() - perimeter) < 1e-9);

  Rng rng(0);
  const auto samples = sample_boundary(ring.domain, 200, rng);
  std::map<GroupKey, int> counts;
  for (const auto& s : samples) counts[group_of(ring.domain.pieces[s.piece])]++;
  for (const auto& [key, len] : ring.domain.group_lengths()) {
    CHECK(std::abs(counts[key] - 200.0 * len / perimeter) <= 1.0);
  }
}

TEST_CASE("sample normals are unit and orthogonal to the tangent") {
  for (const char* name : kShipped) {
    CAPTURE(std::string(name));
    const ProblemSpec spec = shipped(name);
    Rng rng(1);
    for (const auto& s : sample_boundary(spec.domain, 500, rng)) {
      const Vec2 t = piece_tangent(spec.domain.pieces[s.piece], s.t);
      CHECK(std::abs(std::hypot(s.normal.x, s.normal.y) - 1.0) < 1e-12);
      CHECK(std::abs(dot(s.normal, t)) < 1e-12);
    }
  }
}

TEST_CASE("per-piece counts follow length within one point") {
  for (const char* name : kShipped) {
    CAPTURE(std::string(name));
    const ProblemSpec spec = shipped(name);
    double total = 0.0;
    for (const auto& p : spec.domain.pieces) total += piece_length(p);
    for (int n : {20, 200, 600, spec.training.n_train}) {
      CAPTURE(n);
      Rng rng(2);
      const auto samples = sample_boundary(spec.domain, n, rng);
      CHECK(samples.size() == static_cast<std::size_t>(n));
      std::vector<int> counts(spec.domain.pieces.size());
      for (const auto& s : samples) counts[s.piece]++;
      // Pieces whose share rounds to zero borrow one point each from the
      // largest count, which may then sit that many points further off.
      int lifted = 0;
      for (const auto& p : spec.domain.pieces) lifted += n * piece_length(p) / total < 0.5 ? 1 : 0;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        const double ideal = n * piece_length(spec.domain.pieces[k]) / total;
        CHECK(counts[k] >= 1);
        CHECK(std::abs(counts[k] - ideal) <= 1.0 + lifted);
      }
      if (n == spec.training.n_train) CHECK(lifted == 0);
    }
  }
}

TEST_CASE("outer loss weights sum to one") {
  for (const char* name : kShipped) {
    CAPTURE(std::string(name));
    const ProblemSpec spec = shipped(name);
    double sum = 0.0;
    for (const auto& [key, len] : spec.domain.group_lengths()) {
      if (key.kind != BCKind::Interface) sum += loss_weight(len, spec.domain.outer_length());
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("sampling replays bit for bit") {
  const ProblemSpec spec = shipped("dd_plate_hole");
  Rng a(77), b(77);
  const auto s1 = sample_boundary(spec.domain, 300, a);
  const auto s2 = sample_boundary(spec.domain, 300, b);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].z == s2[i].z);
    CHECK(s1[i].normal == s2[i].normal);
    CHECK(s1[i].subdomains == s2[i].subdomains);
  }
}

TEST_CASE("interface samples carry both subdomains") {
  const ProblemSpec spec = shipped("dd_plate_hole");
  Rng rng(3);
  int interface_samples = 0;
  for (const auto& s : sample_boundary(spec.domain, 600, rng)) {
    if (spec.domain.pieces[s.piece].is_interface()) {
      ++interface_samples;
      CHECK(s.subdomains[1] >= 0);
      CHECK(s.subdomains[0] != s.subdomains[1]);
    } else {
      CHECK(s.subdomains[1] == -1);
    }
  }
  CHECK(interface_samples > 0);
}
