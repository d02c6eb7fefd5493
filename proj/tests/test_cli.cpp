#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pihnn/cli.hpp"
#include "pihnn/config.hpp"

using namespace pihnn;
namespace fs = std::filesystem;

namespace {

const char* const kConfigs[] = {"ring_quadrant", "plate_hole_quadrant", "clamped_square", "rail_section",
                                "dd_plate_hole"};

std::string config_path(const char* name) { return testing::source_path(std::string("configs/") + name + ".json"); }

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_command(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("pihnn_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A short ring run so the command tests stay quick.
fs::path short_ring(const fs::path& dir, int epochs = 20) {
  ProblemSpec p = load_config(config_path("ring_quadrant"));
  p.training.epochs = epochs;
  const fs::path path = dir / "ring.json";
  write_file_atomic(path, write_config(p));
  return path;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("shipped ring config") {
  const ProblemSpec p = load_config(config_path("ring_quadrant"));
  CHECK(p.domain.pieces.size() == 4);
  CHECK(p.domain.n_subdomains == 1);
  REQUIRE(p.ring.has_value());
  CHECK(p.ring->r == 0.5);
  CHECK(p.ring->R == 2.0);
  CHECK(p.network.hidden == std::vector<int>{10, 10});
}

TEST_CASE("configs round trip") {
  for (const char* name : kConfigs) {
    CAPTURE(std::string(name));
    const ProblemSpec p = load_config(config_path(name));
    const ProblemSpec q = problem_from_json(nlohmann::json::parse(write_config(p)));
    CHECK(p == q);
    CHECK(write_config(q) == write_config(p));
  }
}

TEST_CASE("config errors point at the offending value") {
  nlohmann::json j = problem_to_json(load_config(config_path("ring_quadrant")));

  nlohmann::json missing = j;
  missing.erase("material");
  CHECK_THROWS_WITH_AS(problem_from_json(missing), doctest::Contains("material"), ConfigError);

  nlohmann::json unknown = j;
  unknown["geometry"]["pieces"][1]["colour"] = "red";
  CHECK_THROWS_WITH_AS(problem_from_json(unknown), doctest::Contains("/geometry/pieces/1"), ConfigError);
  CHECK_THROWS_WITH_AS(problem_from_json(unknown), doctest::Contains("colour"), ConfigError);

  nlohmann::json stress_only = j;
  stress_only["networks"]["mode"] = "stress_only";
  stress_only["geometry"]["pieces"][1]["bc"] = {{"kind", "displacement"}, {"value", {0.0, 0.0}}};
  CHECK_THROWS_AS(problem_from_json(stress_only), ContractError);

  nlohmann::json bad_radius = j;
  bad_radius["geometry"]["pieces"][0]["radius"] = -1.0;
  CHECK_THROWS_AS(problem_from_json(bad_radius), ContractError);

  const fs::path dir = scratch("parse");
  std::ofstream(dir / "broken.json") << "{\n  \"name\": \"x\",\n  oops\n}\n";
  CHECK_THROWS_WITH_AS(load_config(dir / "broken.json"), doctest::Contains("line 3"), ConfigError);
  CHECK_THROWS_WITH_AS(load_config(dir / "broken.json"), doctest::Contains("broken.json"), ConfigError);
}

TEST_CASE("train and eval the ring") {
  const fs::path dir = scratch("train");
  const fs::path cfg = short_ring(dir);
  const Run t = run({"train", cfg.string(), "--quiet", "--out", dir.string()});
  REQUIRE(t.code == 0);
  CHECK(contains(t.out, "final train loss "));
  CHECK(contains(t.out, "final test loss "));
  const fs::path ckpt = dir / "ring_quadrant_checkpoint.json";
  const fs::path hist = dir / "ring_quadrant_history.csv";
  REQUIRE(fs::exists(ckpt));
  const auto rows = lines_of(slurp(hist));
  CHECK(rows.size() == 21);
  CHECK(rows[0] == "epoch,train_loss,test_loss,ms");
  CHECK(rows[1].substr(0, 2) == "0,");
  CHECK(rows[1].back() == ',');

  const Run e = run({"eval", cfg.string(), ckpt.string(), "--grid", "12x10", "--out", dir.string()});
  REQUIRE(e.code == 0);
  const auto field = lines_of(slurp(dir / "ring_quadrant_field.csv"));
  CHECK(field.size() == 121);
  CHECK(field[0] == "x,y,sxx,syy,sxy,ux,uy");
  const auto ring = lines_of(slurp(dir / "ring_quadrant_ring_errors.csv"));
  REQUIRE(ring.size() == 7);
  CHECK(ring[0] == "quantity,value");
  CHECK(ring[1].rfind("dphi_rel_l2,", 0) == 0);
  CHECK(ring[6].rfind("points,", 0) == 0);

  // Checkpoint belongs to a different architecture.
  const Run bad = run({"eval", config_path("clamped_square"), ckpt.string(), "--out", dir.string()});
  CHECK(bad.code != 0);
  CHECK(contains(bad.err, "architecture"));
}

TEST_CASE("reruns are byte identical and the seed can be overridden") {
  const fs::path a = scratch("rerun_a");
  const fs::path b = scratch("rerun_b");
  const fs::path c = scratch("rerun_c");
  const fs::path cfg = short_ring(a, 10);
  REQUIRE(run({"train", cfg.string(), "--quiet", "--out", a.string()}).code == 0);
  REQUIRE(run({"train", cfg.string(), "--quiet", "--out", b.string()}).code == 0);
  REQUIRE(run({"train", cfg.string(), "--quiet", "--out", c.string(), "--seed", "7"}).code == 0);
  for (const char* f : {"ring_quadrant_checkpoint.json", "ring_quadrant_history.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) != slurp(c / f));
  }
  // Timing adds a filled ms column.
  REQUIRE(run({"train", cfg.string(), "--quiet", "--out", c.string(), "--timing"}).code == 0);
  const auto rows = lines_of(slurp(c / "ring_quadrant_history.csv"));
  CHECK(rows[1].back() != ',');
}

TEST_CASE("outputs are replaced atomically") {
  const fs::path dir = scratch("atomic");
  const fs::path target = dir / "nested" / "file.txt";
  write_file_atomic(target, "first\n");
  write_file_atomic(target, "second\n");
  CHECK(slurp(target) == "second\n");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir / "nested")) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("approx-demo writes a decreasing sweep") {
  const fs::path dir = scratch("approx");
  const Run r = run({"approx-demo", "--n", "16", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto rows = lines_of(slurp(dir / "approx_inv_shift.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "n,sup_error,max_abs_a,max_abs_c,solve_discrepancy");
  double prev = 1e300;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    std::istringstream in(rows[k]);
    std::string n, sup;
    std::getline(in, n, ',');
    std::getline(in, sup, ',');
    CHECK(std::stoi(n) == 4 << (k - 1));
    CHECK(std::stod(sup) < prev);
    prev = std::stod(sup);
  }
  CHECK(run({"approx-demo", "--target", "sine", "--out", dir.string()}).code != 0);
}

TEST_CASE("sample and init-check") {
  const fs::path dir = scratch("sample");
  const Run s = run({"sample", config_path("dd_plate_hole"), "--n", "100", "--out", dir.string()});
  REQUIRE(s.code == 0);
  const auto rows = lines_of(slurp(dir / "dd_plate_hole_samples.csv"));
  CHECK(rows.size() == 101);
  CHECK(rows[0] == "x,y,nx,ny,piece,subdomain,partner");

  const Run i = run({"init-check", config_path("ring_quadrant"), "--beta", "0.5", "--out", dir.string()});
  REQUIRE(i.code == 0);
  const auto var = lines_of(slurp(dir / "ring_quadrant_variance.csv"));
  CHECK(var.size() == 4);

  const Run warn = run({"init-check", config_path("ring_quadrant"), "--beta", "3", "--out", dir.string()});
  CHECK(warn.code == 0);
  CHECK(contains(warn.err, "warning"));
  CHECK(run({"init-check", config_path("ring_quadrant"), "--beta", "-1", "--out", dir.string()}).code != 0);
  CHECK(run({"init-check", config_path("ring_quadrant"), "--m-e", "1", "--out", dir.string()}).code != 0);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"fly"}).code == 2);
  CHECK(run({"train"}).code == 2);
  CHECK(run({"train", "/nonexistent/config.json"}).code == 2);
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(contains(help.out, "approx-demo"));

  const fs::path dir = scratch("threads");
  ::setenv("PIHNN_THREADS", "zero", 1);
  const Run t = run({"sample", config_path("ring_quadrant"), "--out", dir.string()});
  ::unsetenv("PIHNN_THREADS");
  CHECK(t.code == 1);
  CHECK(contains(t.err, "PIHNN_THREADS"));
}
