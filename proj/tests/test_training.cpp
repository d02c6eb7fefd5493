#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pihnn/analytics.hpp"
#include "pihnn/config.hpp"
#include "pihnn/training.hpp"

using namespace pihnn;

namespace {

ProblemSpec ring() { return load_config(testing::source_path("configs/ring_quadrant.json")); }

TrainConfig short_run(const ProblemSpec& p, int epochs) {
  TrainConfig cfg = p.training;
  cfg.epochs = epochs;
  return cfg;
}

}  // namespace

TEST_CASE("adam leaves parameters alone under a zero gradient") {
  AdamState st;
  std::vector<double> params{1.0, -2.0, 3.5};
  const std::vector<double> zeros(3, 0.0);
  for (int i = 0; i < 5; ++i) adam_step(st, zeros, 0.1, params);
  CHECK(params == std::vector<double>{1.0, -2.0, 3.5});
  for (double m : st.m) CHECK(m == 0.0);
  for (double v : st.v) CHECK(v == 0.0);
  CHECK(st.step == 5);
}

TEST_CASE("first adam step moves by the learning rate") {
  AdamState st;
  std::vector<double> params{0.0, 0.0, 0.0};
  const std::vector<double> g{2.0, -0.5, 1e3};
  adam_step(st, g, 0.01, params);
  CHECK(params[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(params[2] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam follows the scalar recurrence") {
  AdamState st;
  std::vector<double> params{0.7};
  const double gs[] = {0.3, -1.2, 0.05};
  double x = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = gs[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    const std::vector<double> grad{g};
    adam_step(st, grad, 0.05, params);
    CHECK(params[0] == doctest::Approx(x).epsilon(1e-14));
  }
}

TEST_CASE("adam rejects bad input") {
  AdamState st;
  std::vector<double> params{0.0, 0.0};
  const std::vector<double> bad{0.0, std::nan("")};
  CHECK_THROWS_AS(adam_step(st, bad, 0.1, params), NonFiniteError);
  const std::vector<double> shorter{1.0};
  CHECK_THROWS_AS(adam_step(st, shorter, 0.1, params), ContractError);
}

TEST_CASE("zero epochs returns the initialization") {
  const ProblemSpec p = ring();
  const TrainConfig cfg = short_run(p, 0);
  const TrainResult r = train(p, cfg);
  CHECK(r.history.rows.empty());
  CHECK(r.nets == initialize_networks(p, cfg).nets);
  CHECK(r.train_set.size() == static_cast<std::size_t>(cfg.n_train));
  CHECK(r.test_set.size() == static_cast<std::size_t>(cfg.n_test));
}

TEST_CASE("training is deterministic") {
  const ProblemSpec p = ring();
  const TrainConfig cfg = short_run(p, 30);
  const TrainResult a = train(p, cfg);
  const TrainResult b = train(p, cfg);
  CHECK(a.nets == b.nets);
  REQUIRE(a.history.rows.size() == 30);
  for (std::size_t e = 0; e < a.history.rows.size(); ++e) {
    CHECK(a.history.rows[e].train_loss == b.history.rows[e].train_loss);
    CHECK(a.history.rows[e].test_loss == b.history.rows[e].test_loss);
  }
  std::ostringstream sa, sb;
  a.history.write_csv(sa, false);
  b.history.write_csv(sb, false);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("first history row is the initial loss") {
  const ProblemSpec p = ring();
  const TrainConfig cfg = short_run(p, 3);
  const TrainResult r = train(p, cfg);
  const Networks init = initialize_networks(p, cfg).nets;
  CHECK(r.history.rows[0].train_loss == loss_forward(init, r.train_set, p).value());
  CHECK(r.history.rows[0].test_loss == doctest::Approx(evaluate_loss(init, r.test_set, p).total).epsilon(1e-12));
  CHECK(r.history.rows[2].epoch == 2);
}

TEST_CASE("zero learning rate keeps the loss constant") {
  const ProblemSpec p = ring();
  TrainConfig cfg = short_run(p, 5);
  cfg.lr = 0.0;
  const TrainResult r = train(p, cfg);
  for (const auto& row : r.history.rows) CHECK(row.train_loss == r.history.rows[0].train_loss);
  CHECK(r.nets == initialize_networks(p, cfg).nets);
}

TEST_CASE("the test set does not influence training") {
  const ProblemSpec p = ring();
  TrainConfig with = short_run(p, 20);
  TrainConfig without = with;
  without.n_test = 0;
  const TrainResult a = train(p, with);
  const TrainResult b = train(p, without);
  CHECK(a.nets == b.nets);
  for (std::size_t e = 0; e < a.history.rows.size(); ++e) {
    CHECK(a.history.rows[e].train_loss == b.history.rows[e].train_loss);
    CHECK(std::isnan(b.history.rows[e].test_loss));
  }
  std::ostringstream os;
  b.history.write_csv(os, false);
  CHECK(os.str().find(",,\n") != std::string::npos);
}

TEST_CASE("history csv layout") {
  History h;
  h.rows.push_back({0, 1.5, 0.25, 3.0});
  h.rows.push_back({1, 0.5, std::nan(""), 2.0});
  std::ostringstream plain, timed;
  h.write_csv(plain, false);
  h.write_csv(timed, true);
  CHECK(plain.str() ==
        "epoch,train_loss,test_loss,ms\n"
        "0,1.50000000000000000e+00,2.50000000000000000e-01,\n"
        "1,5.00000000000000000e-01,,\n");
  CHECK(timed.str().find("3.00000000000000000e+00\n") != std::string::npos);
  CHECK(format_real(0.1) == "1.00000000000000006e-01");
  CHECK(std::stod(format_real(0.1)) == 0.1);
}

TEST_CASE("ring training reduces the loss and recovers the solution") {
  const ProblemSpec p = ring();
  const TrainResult r = train(p, p.training);
  const double first = r.history.rows.front().train_loss;
  const double last = r.history.rows.back().train_loss;
  CHECK(last < first / 100.0);
  const GridField grid = evaluate_grid(r.nets, p, p.output.grid_box.value_or(bounding_box(p.domain)), p.output.grid_nx, p.output.grid_ny);
  const RingErrors e = ring_errors(r.nets[0], p.material, *p.ring, grid);
  CHECK(e.points > 0);
  CHECK(e.dphi < 0.1);
}

TEST_CASE("on_epoch sees every row") {
  const ProblemSpec p = ring();
  int seen = 0;
  TrainOptions opts;
  opts.on_epoch = [&](const HistoryRow& row) { CHECK(row.epoch == seen++); };
  train(p, short_run(p, 4), opts);
  CHECK(seen == 4);
}
