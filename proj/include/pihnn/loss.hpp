#pragma once

#include <map>
#include <span>
#include <vector>

#include "pihnn/autodiff.hpp"
#include "pihnn/geometry.hpp"
#include "pihnn/network.hpp"
#include "pihnn/problem.hpp"

namespace pihnn {

/// The two potential networks of one subdomain.
struct NetPair {
  HoloMLP phi;
  HoloMLP psi;
  friend bool operator==(const NetPair&, const NetPair&) = default;
};

/// One NetPair per subdomain.
using Networks = std::vector<NetPair>;

/// Gradient of a real loss for every complex parameter, stored as the complex
/// number dL/dRe(w) + i dL/dIm(w) in the parameter's own layout.
struct PairGrad {
  std::vector<LayerParams> phi;
  std::vector<LayerParams> psi;
};

struct WeightGrad {
  std::vector<PairGrad> nets;
};

/// Real coordinates of all parameters: subdomain, then phi before psi, then
/// layer, weights row-major before bias, real part before imaginary part.
std::vector<double> flatten(const Networks& nets);
std::vector<double> flatten(const WeightGrad& grad);
void unflatten(Networks& nets, std::span<const double> values);

/// Tape handles for one recorded network.
struct MlpRecord {
  std::vector<Tape::Var> weights;
  std::vector<Tape::Var> biases;
  /// Pre-activation jets y_l of every layer (the last one is the output).
  std::vector<Tape::Var> preactivations;
  Tape::Var output;
};

/// Records a network applied to a jet block matrix x (1 x 3B).
MlpRecord record_mlp(Tape& tape, const HoloMLP& net, Tape::Var x);

/// Jet input block [z | 1 | 0] for a batch of points.
CMatrix jet_input(std::span<const C64> zs);

struct LossTape {
  Tape tape;
  Tape::Var loss;
  std::vector<std::array<MlpRecord, 2>> records;
  /// alpha * mean squared residual per group.
  std::map<GroupKey, Tape::Var> group_terms;

  double value() const { return tape.scalar(loss); }
};

/// Records the boundary loss of all subdomain networks on a batch.
///
/// Each subdomain evaluates its networks once on every sample it touches;
/// interface samples are evaluated by both adjoining subdomains. Groups are
/// summed in GroupKey order and samples within a group in batch order.
/// Throws ContractError on an empty batch or a network count mismatch and
/// NonFiniteError naming the first offending sample.
LossTape loss_forward(const Networks& nets, std::span<const BoundarySample> batch, const ProblemSpec& problem);

WeightGrad loss_backward(LossTape& lt);

/// KM fields of one network pair on a batch of points. Displacements are
/// included in Standard mode only.
std::vector<FieldPoint> eval_fields(const NetPair& pair, std::span<const C64> zs, const Material& mat);

/// Per-sample residuals computed without a tape (index = position in batch).
std::vector<SampleResidual> sample_residuals(const Networks& nets, std::span<const BoundarySample> batch,
                                             const ProblemSpec& problem);

/// Tape-free loss: assemble_loss over sample_residuals.
LossBreakdown evaluate_loss(const Networks& nets, std::span<const BoundarySample> batch, const ProblemSpec& problem);

/// Largest relative deviation between the tape gradient and central
/// differences of evaluate_loss over every real parameter coordinate.
/// The deviation of a coordinate is |g - fd| / max(|g|, |fd|, 1e-3 max|g|).
double grad_check(const Networks& nets, std::span<const BoundarySample> batch, const ProblemSpec& problem,
                  double step);

}  // namespace pihnn
