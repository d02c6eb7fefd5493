#include "pihnn/problem.hpp"

#include <cmath>

namespace pihnn {

void TrainConfig::validate() const {
  if (epochs < 0) throw ContractError("training: epochs must be non-negative");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractError("training: lr must be a non-negative number");
  if (n_train < 1) throw ContractError("training: n_train must be positive");
  if (n_test < 0) throw ContractError("training: n_test must be non-negative");
  if (!(beta > 0.0)) throw ContractError("training: beta must be positive");
  if (m_e < 2) throw ContractError("training: m_e must be at least 2");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ContractError("training: lr_decay must lie in (0, 1]");
  if (probe_factor < 1) throw ContractError("training: probe_factor must be positive");
}

void ProblemSpec::validate() const {
  domain.validate();
  training.validate();
  if (network.hidden.empty()) throw ContractError("networks: at least one hidden layer required");
  for (int w : network.hidden) {
    if (w < 1) throw ContractError("networks: hidden widths must be positive");
  }
  if (network.mode == NetworkMode::StressOnly) {
    for (const auto& p : domain.pieces) {
      if (p.bc.kind != BCKind::Traction) {
        throw ContractError("networks: stress_only mode needs traction conditions only, but piece '" + p.name +
                            "' has a " + std::string(to_string(p.bc.kind)) + " condition");
      }
    }
  }
  if (output.grid_nx < 1 || output.grid_ny < 1) throw ContractError("outputs: grid sizes must be positive");
  if (ring && !(ring->r > 0.0 && ring->r < ring->R)) throw ContractError("reference: ring needs 0 < r < R");
}

}  // namespace pihnn
