#pragma once

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_complex.hpp>
#include "json.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pihnn/complexcore.hpp"
#include "pihnn/elasticity.hpp"
#include "pihnn/rng.hpp"

namespace pihnn {

struct LayerParams {
  Eigen::MatrixXcd weights;  // N_l x N_{l-1}
  Eigen::VectorXcd bias;     // N_l

  friend bool operator==(const LayerParams& a, const LayerParams& b) {
    return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
           a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
  }
};

enum class NetworkMode { Standard, StressOnly };

std::string_view to_string(NetworkMode mode);
NetworkMode network_mode_from_string(std::string_view name);

/// Holomorphic MLP with a single complex input and a single complex output.
/// Every layer but the last is followed by the activation.
///
/// In Standard mode the output is a potential (phi or psi); in StressOnly
/// mode it is the potential's derivative (phi' or psi').
struct HoloMLP {
  std::vector<LayerParams> layers;
  ActivationKind activation = ActivationKind::Exp;
  NetworkMode mode = NetworkMode::Standard;

  /// All-zero network with the given unit counts N_0 = 1, ..., N_L = 1.
  static HoloMLP zeros(std::span<const int> widths, ActivationKind activation, NetworkMode mode);
  /// widths {1, hidden..., 1}
  static std::vector<int> widths_for(std::span<const int> hidden);

  std::vector<int> widths() const;
  std::size_t parameter_count() const;
  void validate() const;

  friend bool operator==(const HoloMLP&, const HoloMLP&) = default;
};

/// Value, first and second derivative of the network output at z.
Jet2 forward_jet(const HoloMLP& net, C64 z);

/// Same as forward_jet on a batch, evaluated with matrix products.
std::vector<Jet2> forward_batch(const HoloMLP& net, std::span<const C64> zs);

/// Potentials from a (phi, psi) network pair. Both must share a mode.
KMState mlp_forward(const HoloMLP& net_phi, const HoloMLP& net_psi, C64 z);
KMState km_state_from_jets(const Jet2& phi_out, const Jet2& psi_out, NetworkMode mode);

/// Admissible interval [beta_lo, 1] for the initialization gain.
/// Standard: [sqrt(2) - 1, 1]; StressOnly: [(sqrt(5) - 1) / 2, 1].
std::pair<double, double> admissible_beta(NetworkMode mode);

struct InitConfig {
  double beta = 0.5;
  /// First layer whose weights assume Gaussian pre-activations. Values above
  /// L + 1 behave like L + 1 (every layer uses the probe).
  int m_e = 3;
  std::vector<C64> probe;
};

struct InitReport {
  /// Per layer: sample mean of |x_{l-1}|^2 from the probe, or e^beta once the
  /// Gaussian assumption applies.
  std::vector<double> second_moment;
  std::vector<double> weight_variance;
  std::vector<std::string> warnings;
};

/// Weight initialization for exponential-activation holomorphic networks.
///
/// Layers l < m_e draw Re and Im of each weight from N(0, beta / (2 N_{l-1} m_l))
/// with m_l the mean squared modulus of the probe propagated through the
/// already initialized layers; layers l >= m_e use m_l = e^beta. Biases are
/// zeroed. Draws go layer by layer in row-major order, real part first.
///
/// Throws ContractError for an empty probe or beta <= 0, NonFiniteError when
/// the propagated probe overflows. A beta outside admissible_beta(mode) is
/// reported as a warning.
InitReport init_weights(HoloMLP& net, const InitConfig& cfg, Rng& rng);

/// High-precision complex type for the constructive approximator; its
/// coefficients grow like k! and cancel on evaluation.
using HighComplex = boost::multiprecision::cpp_complex_50;

/// One-hidden-layer approximant sum_j a_j phi(b_j z + c_j).
struct ShallowApprox {
  std::vector<HighComplex> a;
  std::vector<HighComplex> b;
  std::vector<HighComplex> c;
  ActivationKind activation = ActivationKind::Exp;
  /// max_j |a_dft - a_dense| / max_j |a_dense| from the cross-check solve.
  double solve_discrepancy = 0.0;

  std::size_t size() const { return a.size(); }
  std::vector<C64> a64() const;
  std::vector<C64> b64() const;
  std::vector<C64> c64() const;
};

/// Matches the first n Taylor coefficients of g around z0 with frequencies at
/// the n-th roots of unity, shifts c_j = xi - b_j z0 and exponential
/// activation. `taylor` holds g_k = g^(k)(z0)/k! and must have at least n
/// entries.
ShallowApprox constructive_shallow(std::span<const C64> taylor, C64 z0, C64 xi, int n);

C64 shallow_eval(const ShallowApprox& s, C64 z);
HighComplex shallow_eval_high(const ShallowApprox& s, const HighComplex& z);

void to_json(nlohmann::json& j, const HoloMLP& net);
void from_json(const nlohmann::json& j, HoloMLP& net);

}  // namespace pihnn
