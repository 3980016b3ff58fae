#pragma once

#include <Eigen/Dense>
#include <functional>
#include <variant>
#include <vector>

#include "probstl/rng.hpp"

namespace probstl {

struct MixtureComponent {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

struct StaticWeights {
  Eigen::VectorXd pi;
};

struct MarkovWeights {
  Eigen::MatrixXd transition;  // row-stochastic
  Eigen::VectorXd init;
};

// Maps the mode history (oldest first) to the next-step distribution.
using BlackBoxWeights = std::function<Eigen::VectorXd(const std::vector<int>&)>;

// Per-step Gaussian mixture; the mode is resampled every step according to
// the weight source.
struct MixtureNoiseModel {
  std::vector<MixtureComponent> components;
  std::variant<StaticWeights, MarkovWeights, BlackBoxWeights> weights;

  int mode_count() const { return static_cast<int>(components.size()); }
  int dim() const;
  void validate() const;  // throws ConfigError on inconsistent shapes or weights
};

using ModeSequence = std::vector<int>;

ModeSequence sample_mode_sequence(const MixtureNoiseModel& model, int t_H, RandomSource& rng);

}  // namespace probstl
