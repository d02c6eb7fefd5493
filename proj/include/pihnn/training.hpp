#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pihnn/loss.hpp"
#include "pihnn/problem.hpp"

namespace pihnn {

/// Adam on the real coordinates of all parameters (see flatten()).
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `params` in place. The state is sized on
/// first use. Throws NonFiniteError naming the first non-finite gradient
/// component and ContractError on a size mismatch.
void adam_step(AdamState& state, std::span<const double> grads, double lr, std::span<double> params);

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  /// NaN when there is no test set.
  double test_loss = 0.0;
  double ms = 0.0;
};

struct History {
  std::vector<HistoryRow> rows;

  /// Columns epoch, train_loss, test_loss, ms. The ms column is left empty
  /// unless `with_timing`, so untimed exports are reproducible byte for byte.
  void write_csv(std::ostream& os, bool with_timing) const;
};

/// Full-precision scientific notation used in every CSV.
std::string format_real(double x);

struct InitResult {
  Networks nets;
  std::vector<std::string> warnings;
};

/// Draws the probe (stream 1 of the seed) and initializes every branch of
/// every subdomain with its own stream. A subdomain's probe holds the probe
/// points on its own boundary.
InitResult initialize_networks(const ProblemSpec& problem, const TrainConfig& cfg);

struct TrainOptions {
  bool timing = false;
  /// Called after each epoch with the row just recorded.
  std::function<void(const HistoryRow&)> on_epoch;
};

struct TrainResult {
  Networks nets;
  History history;
  std::vector<BoundarySample> train_set;
  std::vector<BoundarySample> test_set;
  std::vector<std::string> warnings;
};

/// Draws the training and test sets once (stream 0 of the seed), initializes
/// the networks and runs `cfg.epochs` full-batch Adam steps. Row e holds the
/// losses of the parameters before step e. Throws NonFiniteError naming the
/// epoch when the loss overflows.
TrainResult train(const ProblemSpec& problem, const TrainConfig& cfg, const TrainOptions& options = {});

}  // namespace pihnn
