#include "pihnn/network.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <cmath>
#include <numbers>
#include <string>

namespace pihnn {

namespace {

using HighReal = boost::multiprecision::cpp_bin_float_50;

HighComplex to_high(C64 z) { return HighComplex(HighReal(z.real()), HighReal(z.imag())); }

C64 to_c64(const HighComplex& z) {
  return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

std::vector<C64> narrow(const std::vector<HighComplex>& v) {
  std::vector<C64> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(to_c64(x));
  return out;
}

// Applies the activation to a block matrix [F | D1 | D2] of B jets per row.
void activate_blocks(ActivationKind kind, Eigen::MatrixXcd& y, Eigen::Index batch, int layer) {
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const C64 f = y(i, j);
      const C64 d1 = y(i, batch + j);
      const C64 d2 = y(i, 2 * batch + j);
      const ActivationDerivs a = activation_derivs(kind, f);
      y(i, j) = a.d0;
      y(i, batch + j) = a.d1 * d1;
      y(i, 2 * batch + j) = a.d2 * d1 * d1 + a.d1 * d2;
    }
  }
  if (!y.allFinite()) {
    throw NonFiniteError("network forward: non-finite activation output in layer " + std::to_string(layer));
  }
}

double mean_abs2(const Eigen::MatrixXcd& x) { return x.cwiseAbs2().mean(); }

}  // namespace

std::string_view to_string(NetworkMode mode) {
  return mode == NetworkMode::Standard ? "standard" : "stress_only";
}

NetworkMode network_mode_from_string(std::string_view name) {
  if (name == "standard") return NetworkMode::Standard;
  if (name == "stress_only") return NetworkMode::StressOnly;
  throw ContractError("unknown network mode '" + std::string(name) + "' (expected standard or stress_only)");
}

HoloMLP HoloMLP::zeros(std::span<const int> widths, ActivationKind activation, NetworkMode mode) {
  if (widths.size() < 2) throw ContractError("network needs at least an input and an output width");
  if (widths.front() != 1 || widths.back() != 1) throw ContractError("network input and output widths must be 1");
  HoloMLP net;
  net.activation = activation;
  net.mode = mode;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    if (widths[l] < 1) throw ContractError("layer widths must be positive");
    net.layers.push_back({Eigen::MatrixXcd::Zero(widths[l], widths[l - 1]), Eigen::VectorXcd::Zero(widths[l])});
  }
  return net;
}

std::vector<int> HoloMLP::widths_for(std::span<const int> hidden) {
  std::vector<int> w{1};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

std::vector<int> HoloMLP::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(static_cast<int>(layers.front().weights.cols()));
  for (const auto& layer : layers) w.push_back(static_cast<int>(layer.weights.rows()));
  return w;
}

std::size_t HoloMLP::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

void HoloMLP::validate() const {
  if (layers.empty()) throw ContractError("network has no layers");
  if (layers.front().weights.cols() != 1) throw ContractError("network input width must be 1");
  if (layers.back().weights.rows() != 1) throw ContractError("network output width must be 1");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string where = "layer " + std::to_string(l + 1) + ": ";
    if (layer.bias.size() != layer.weights.rows()) throw ContractError(where + "bias length does not match weights");
    if (l > 0 && layer.weights.cols() != layers[l - 1].weights.rows()) {
      throw ContractError(where + "input width does not match the previous layer");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) throw NonFiniteError(where + "non-finite parameters");
  }
}

Jet2 forward_jet(const HoloMLP& net, C64 z) {
  std::vector<Jet2> x{jet_seed(z)};
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerParams& layer = net.layers[l];
    std::vector<Jet2> y(layer.weights.rows());
    std::vector<C64> row(layer.weights.cols());
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) row[k] = layer.weights(i, k);
      y[i] = jet_affine(row, layer.bias(i), x);
    }
    if (l + 1 < net.layers.size()) {
      const std::string context = "layer " + std::to_string(l + 1);
      for (auto& j : y) j = jet_activate(net.activation, j, context);
    }
    x = std::move(y);
  }
  if (!is_finite(x.front())) throw NonFiniteError("network forward: non-finite output");
  return x.front();
}

std::vector<Jet2> forward_batch(const HoloMLP& net, std::span<const C64> zs) {
  const auto batch = static_cast<Eigen::Index>(zs.size());
  if (batch == 0) return {};
  Eigen::MatrixXcd x(1, 3 * batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    if (!is_finite(zs[j])) throw NonFiniteError("network forward: non-finite input");
    x(0, j) = zs[j];
    x(0, batch + j) = 1.0;
    x(0, 2 * batch + j) = 0.0;
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerParams& layer = net.layers[l];
    Eigen::MatrixXcd y = layer.weights * x;
    y.leftCols(batch).colwise() += layer.bias;
    if (l + 1 < net.layers.size()) activate_blocks(net.activation, y, batch, static_cast<int>(l + 1));
    x = std::move(y);
  }
  if (!x.allFinite()) throw NonFiniteError("network forward: non-finite output");
  std::vector<Jet2> out(batch);
  for (Eigen::Index j = 0; j < batch; ++j) out[j] = {x(0, j), x(0, batch + j), x(0, 2 * batch + j)};
  return out;
}

KMState km_state_from_jets(const Jet2& phi_out, const Jet2& psi_out, NetworkMode mode) {
  KMState s;
  if (mode == NetworkMode::Standard) {
    s.phi = phi_out.f;
    s.dphi = phi_out.d1;
    s.ddphi = phi_out.d2;
    s.psi = psi_out.f;
    s.dpsi = psi_out.d1;
    s.has_potentials = true;
  } else {
    s.dphi = phi_out.f;
    s.ddphi = phi_out.d1;
    s.dpsi = psi_out.f;
    s.has_potentials = false;
  }
  return s;
}

KMState mlp_forward(const HoloMLP& net_phi, const HoloMLP& net_psi, C64 z) {
  if (net_phi.mode != net_psi.mode) throw ContractError("mlp_forward: phi and psi networks differ in mode");
  return km_state_from_jets(forward_jet(net_phi, z), forward_jet(net_psi, z), net_phi.mode);
}

std::pair<double, double> admissible_beta(NetworkMode mode) {
  if (mode == NetworkMode::StressOnly) return {(std::sqrt(5.0) - 1.0) / 2.0, 1.0};
  return {std::numbers::sqrt2 - 1.0, 1.0};
}

InitReport init_weights(HoloMLP& net, const InitConfig& cfg, Rng& rng) {
  net.validate();
  if (cfg.probe.empty()) throw ContractError("init_weights: empty probe");
  if (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta)) throw ContractError("init_weights: beta must be positive");
  if (cfg.m_e < 2) throw ContractError("init_weights: m_e must be at least 2");

  InitReport report;
  const auto [lo, hi] = admissible_beta(net.mode);
  // Tolerate the rounding in user-typed values of the interval ends.
  if (cfg.beta < lo - 1e-9 || cfg.beta > hi + 1e-9) {
    report.warnings.push_back("beta = " + std::to_string(cfg.beta) + " outside the admissible interval [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "] for " +
                              std::string(to_string(net.mode)) + " networks");
  }

  const int n_layers = static_cast<int>(net.layers.size());
  Eigen::MatrixXcd x(1, static_cast<Eigen::Index>(cfg.probe.size()));
  for (std::size_t j = 0; j < cfg.probe.size(); ++j) {
    if (!is_finite(cfg.probe[j])) throw NonFiniteError("init_weights: non-finite probe point");
    x(0, static_cast<Eigen::Index>(j)) = cfg.probe[j];
  }

  for (int l = 1; l <= n_layers; ++l) {
    LayerParams& layer = net.layers[l - 1];
    const bool use_probe = l < cfg.m_e;
    const double m = use_probe ? mean_abs2(x) : std::exp(cfg.beta);
    if (!std::isfinite(m)) {
      throw NonFiniteError("init_weights: probe overflow before layer " + std::to_string(l));
    }
    if (!(m > 0.0)) throw ContractError("init_weights: probe has zero second moment at layer " + std::to_string(l));
    const double fan_in = static_cast<double>(layer.weights.cols());
    const double variance = cfg.beta / (2.0 * fan_in * m);
    const double sd = std::sqrt(variance);
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) {
        const double re = rng.normal(sd);
        const double im = rng.normal(sd);
        layer.weights(i, k) = {re, im};
      }
    }
    layer.bias.setZero();
    report.second_moment.push_back(m);
    report.weight_variance.push_back(variance);

    if (l < n_layers && l + 1 < cfg.m_e) {
      Eigen::MatrixXcd y = layer.weights * x;
      for (Eigen::Index k = 0; k < y.size(); ++k) y(k) = activation_derivs(net.activation, y(k)).d0;
      x = std::move(y);
    }
  }
  return report;
}

std::vector<C64> ShallowApprox::a64() const { return narrow(a); }
std::vector<C64> ShallowApprox::b64() const { return narrow(b); }
std::vector<C64> ShallowApprox::c64() const { return narrow(c); }

namespace {

// Gaussian elimination with partial pivoting, used to cross-check the
// closed-form inverse of the roots-of-unity Vandermonde matrix.
std::vector<HighComplex> dense_solve(std::vector<std::vector<HighComplex>> m, std::vector<HighComplex> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (abs(m[r][col]) > abs(m[pivot][col])) pivot = r;
    }
    std::swap(m[col], m[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const HighComplex factor = m[r][col] / m[col][col];
      for (std::size_t k = col; k < n; ++k) m[r][k] -= factor * m[col][k];
      rhs[r] -= factor * rhs[col];
    }
  }
  std::vector<HighComplex> x(n);
  for (std::size_t i = n; i-- > 0;) {
    HighComplex acc = rhs[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= m[i][k] * x[k];
    x[i] = acc / m[i][i];
  }
  return x;
}

}  // namespace

ShallowApprox constructive_shallow(std::span<const C64> taylor, C64 z0, C64 xi, int n) {
  if (n <= 0) throw ContractError("constructive_shallow: n must be positive");
  if (taylor.size() < static_cast<std::size_t>(n)) {
    throw ContractError("constructive_shallow: need " + std::to_string(n) + " Taylor coefficients, got " +
                        std::to_string(taylor.size()));
  }
  const auto un = static_cast<std::size_t>(n);
  const HighComplex hz0 = to_high(z0);
  const HighComplex hxi = to_high(xi);
  const HighComplex exp_xi = exp(hxi);

  // s_k = g_k / (phi^(k)(xi) / k!) with phi = exp
  std::vector<HighComplex> s(un);
  HighReal factorial = 1;
  for (std::size_t k = 0; k < un; ++k) {
    if (k > 0) factorial *= static_cast<unsigned>(k);
    s[k] = to_high(taylor[k]) * HighComplex(factorial) / exp_xi;
  }

  ShallowApprox out;
  out.activation = ActivationKind::Exp;
  out.b.resize(un);
  out.c.resize(un);
  out.a.assign(un, HighComplex(0));
  const HighReal two_pi = 2 * boost::math::constants::pi<HighReal>();
  for (std::size_t j = 0; j < un; ++j) {
    const HighReal angle = two_pi * static_cast<unsigned>(j) / static_cast<unsigned>(n);
    out.b[j] = HighComplex(cos(angle), sin(angle));
    out.c[j] = hxi - out.b[j] * hz0;
  }
  // V_{kj} = b_j^k and V^{-1} = V^H / n, so a_j = (1/n) sum_k conj(b_j)^k s_k.
  for (std::size_t j = 0; j < un; ++j) {
    const HighComplex w = conj(out.b[j]);
    HighComplex power(1);
    HighComplex acc(0);
    for (std::size_t k = 0; k < un; ++k) {
      acc += power * s[k];
      power *= w;
    }
    out.a[j] = acc / HighComplex(static_cast<unsigned>(n));
  }

  std::vector<std::vector<HighComplex>> v(un, std::vector<HighComplex>(un));
  for (std::size_t j = 0; j < un; ++j) {
    HighComplex power(1);
    for (std::size_t k = 0; k < un; ++k) {
      v[k][j] = power;
      power *= out.b[j];
    }
  }
  const std::vector<HighComplex> dense = dense_solve(std::move(v), s);
  HighReal diff = 0;
  HighReal scale = 0;
  for (std::size_t j = 0; j < un; ++j) {
    diff = std::max(diff, HighReal(abs(out.a[j] - dense[j])));
    scale = std::max(scale, HighReal(abs(dense[j])));
  }
  out.solve_discrepancy = scale > 0 ? static_cast<double>(diff / scale) : static_cast<double>(diff);
  return out;
}

HighComplex shallow_eval_high(const ShallowApprox& s, const HighComplex& z) {
  HighComplex sum(0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    const HighComplex arg = s.b[j] * z + s.c[j];
    switch (s.activation) {
      case ActivationKind::Exp:
        sum += s.a[j] * exp(arg);
        break;
      case ActivationKind::Cos:
        sum += s.a[j] * cos(arg);
        break;
      case ActivationKind::Sin:
        sum += s.a[j] * sin(arg);
        break;
      case ActivationKind::CosSqrt:
        sum += s.a[j] * cos(sqrt(arg));
        break;
    }
  }
  return sum;
}

C64 shallow_eval(const ShallowApprox& s, C64 z) { return to_c64(shallow_eval_high(s, to_high(z))); }

void to_json(nlohmann::json& j, const HoloMLP& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        w.push_back({layer.weights(r, c).real(), layer.weights(r, c).imag()});
      }
    }
    nlohmann::json b = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) b.push_back({layer.bias(r).real(), layer.bias(r).imag()});
    layers.push_back({{"weights", std::move(w)}, {"bias", std::move(b)}});
  }
  j = nlohmann::json{{"widths", net.widths()},
                     {"activation", std::string(to_string(net.activation))},
                     {"mode", std::string(to_string(net.mode))},
                     {"layers", std::move(layers)}};
}

void from_json(const nlohmann::json& j, HoloMLP& net) {
  const auto widths = j.at("widths").get<std::vector<int>>();
  net = HoloMLP::zeros(widths, activation_from_string(j.at("activation").get<std::string>()),
                       network_mode_from_string(j.at("mode").get<std::string>()));
  const auto& layers = j.at("layers");
  if (layers.size() != net.layers.size()) throw ContractError("checkpoint: layer count does not match widths");
  auto read_pair = [](const nlohmann::json& p) {
    if (!p.is_array() || p.size() != 2) throw ContractError("checkpoint: expected [re, im] pairs");
    return C64(p[0].get<double>(), p[1].get<double>());
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    LayerParams& layer = net.layers[l];
    const auto& w = layers[l].at("weights");
    const auto& b = layers[l].at("bias");
    if (w.size() != static_cast<std::size_t>(layer.weights.size()) ||
        b.size() != static_cast<std::size_t>(layer.bias.size())) {
      throw ContractError("checkpoint: layer " + std::to_string(l + 1) + " has the wrong number of entries");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = read_pair(w[k++]);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = read_pair(b[r]);
  }
  net.validate();
}

}  // namespace pihnn
