#pragma once

#include <vector>

#include "probstl/hdr.hpp"
#include "probstl/system.hpp"

namespace probstl {

// Plain per-step noise induced by freezing the mixture at a mode sequence:
// step t gets the mean and covariance of component modes[t].
NoiseSpec conditional_noise_spec(const MixtureNoiseModel& model, const ModeSequence& modes);

// Two-layer estimate: the outer layer samples mode sequences, the inner
// layer is one splitting run per sequence.  The variance splits into the
// spread of the outer estimates and the mean of the inner variances, both
// divided by the iteration count; `variance` is their sum.
struct MixtureEstimate {
  double probability = 0.0;
  double variance = 0.0;
  double std_dev = 0.0;
  double between_variance = 0.0;
  double within_variance = 0.0;
  bool upper_bound_only = false;  // any inner run hit the nesting cap
  std::vector<VerificationResult> runs;
};

// Runs n_outer independent conditional estimates.  Mixture channels (v,
// then w) get fresh mode sequences per iteration; plain channels pass
// through.  Iterations use pre-split rng streams, so config.threads may run
// them in parallel without changing the result.  A nonempty `jacobian`
// relinearizes the measurement map around each conditional expected path
// before the trajectory Gaussian is built.
MixtureEstimate mixture_estimate(const LtvSystem& sys, int t_H, const DomainOracle& oracle,
                                 int n_outer, const HdrConfig& config, RandomSource& rng,
                                 const JacobianFn& jacobian = nullptr);

}  // namespace probstl
