#include "pihnn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace pihnn {

void adam_step(AdamState& state, std::span<const double> grads, double lr, std::span<double> params) {
  if (grads.size() != params.size()) throw ContractError("adam_step: gradient and parameter sizes differ");
  if (state.m.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: state size does not match parameters");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw NonFiniteError("adam_step: non-finite gradient in component " + std::to_string(k));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const double g = grads[k];
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", x);
  return buf;
}

void History::write_csv(std::ostream& os, bool with_timing) const {
  os << "epoch,train_loss,test_loss,ms\n";
  for (const HistoryRow& r : rows) {
    os << r.epoch << ',' << format_real(r.train_loss) << ',';
    if (!std::isnan(r.test_loss)) os << format_real(r.test_loss);
    os << ',';
    if (with_timing) os << format_real(r.ms);
    os << '\n';
  }
}

InitResult initialize_networks(const ProblemSpec& problem, const TrainConfig& cfg) {
  problem.validate();
  cfg.validate();
  Rng probe_rng(derive_seed(cfg.seed, 1));
  const std::vector<BoundarySample> probe =
      sample_boundary(problem.domain, cfg.probe_factor * cfg.n_train, probe_rng);
  const std::vector<int> widths = HoloMLP::widths_for(problem.network.hidden);

  InitResult out;
  for (int s = 0; s < problem.domain.n_subdomains; ++s) {
    InitConfig ic;
    ic.beta = cfg.beta;
    ic.m_e = cfg.m_e;
    for (const BoundarySample& p : probe) {
      if (p.subdomains[0] == s || p.subdomains[1] == s) ic.probe.push_back(p.z);
    }
    NetPair pair{HoloMLP::zeros(widths, problem.network.activation, problem.network.mode),
                 HoloMLP::zeros(widths, problem.network.activation, problem.network.mode)};
    for (int branch = 0; branch < 2; ++branch) {
      Rng rng(derive_seed(cfg.seed, 2 + 2 * static_cast<std::uint64_t>(s) + branch));
      InitReport rep = init_weights(branch == 0 ? pair.phi : pair.psi, ic, rng);
      // Both branches of every subdomain share the beta check; report it once.
      if (s == 0 && branch == 0) {
        for (auto& w : rep.warnings) out.warnings.push_back(std::move(w));
      }
    }
    out.nets.push_back(std::move(pair));
  }
  return out;
}

TrainResult train(const ProblemSpec& problem, const TrainConfig& cfg, const TrainOptions& options) {
  TrainResult out;
  InitResult init = initialize_networks(problem, cfg);
  out.nets = std::move(init.nets);
  out.warnings = std::move(init.warnings);

  Rng sample_rng(derive_seed(cfg.seed, 0));
  out.train_set = sample_boundary(problem.domain, cfg.n_train, sample_rng);
  if (cfg.n_test > 0) out.test_set = sample_boundary(problem.domain, cfg.n_test, sample_rng);

  AdamState adam;
  double lr = cfg.lr;
  std::vector<double> params = flatten(out.nets);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    HistoryRow row;
    row.epoch = epoch;
    std::vector<double> grads;
    try {
      LossTape lt = loss_forward(out.nets, out.train_set, problem);
      row.train_loss = lt.value();
      grads = flatten(loss_backward(lt));
      row.test_loss = out.test_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : evaluate_loss(out.nets, out.test_set, problem).total;
      adam_step(adam, grads, lr, params);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("training aborted at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    unflatten(out.nets, params);
    lr *= cfg.lr_decay;
    row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.history.rows.push_back(row);
    if (options.on_epoch) options.on_epoch(row);
  }
  return out;
}

}  // namespace pihnn
