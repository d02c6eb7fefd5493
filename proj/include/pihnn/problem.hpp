#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pihnn/elasticity.hpp"
#include "pihnn/geometry.hpp"
#include "pihnn/network.hpp"

namespace pihnn {

struct NetworkSpec {
  std::vector<int> hidden{10, 10};
  ActivationKind activation = ActivationKind::Exp;
  NetworkMode mode = NetworkMode::Standard;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct TrainConfig {
  int epochs = 1000;
  double lr = 0.03;
  int n_train = 200;
  int n_test = 20;
  std::uint64_t seed = 0;
  double beta = 0.5;
  int m_e = 3;
  /// Multiplicative learning-rate factor applied after every epoch.
  double lr_decay = 1.0;
  /// Probe size for the initialization, as a multiple of n_train.
  int probe_factor = 10;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Axis-aligned box for field grids.
struct GridBox {
  double x0 = 0.0;
  double x1 = 1.0;
  double y0 = 0.0;
  double y1 = 1.0;
  friend bool operator==(const GridBox&, const GridBox&) = default;
};

struct OutputSpec {
  int grid_nx = 40;
  int grid_ny = 40;
  /// Defaults to the bounding box of the boundary.
  std::optional<GridBox> grid_box;
  std::string directory = "out";

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

/// Pressurized ring quadrant with a closed-form solution.
struct RingReference {
  double p = -1.0;
  double r = 0.5;
  double R = 2.0;
  friend bool operator==(const RingReference&, const RingReference&) = default;
};

struct ProblemSpec {
  std::string name;
  Material material = Material::make(1.0, 1.0, PlaneMode::PlaneStrain);
  DomainSpec domain;
  NetworkSpec network;
  TrainConfig training;
  OutputSpec output;
  std::optional<RingReference> ring;

  /// Checks the domain, the training block and that stress-only networks are
  /// used with traction conditions only.
  void validate() const;
  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

}  // namespace pihnn
