#include "probstl/mixture.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "probstl/errors.hpp"
#include "probstl/util.hpp"

namespace probstl {

NoiseSpec conditional_noise_spec(const MixtureNoiseModel& model, const ModeSequence& modes) {
  model.validate();
  if (modes.empty()) throw ConfigError("mode sequence is empty");
  NoiseSpec out;
  out.means.reserve(modes.size());
  out.covs.reserve(modes.size());
  for (int m : modes) {
    if (m < 0 || m >= model.mode_count())
      throw ConfigError("mode index " + std::to_string(m) + " is out of range");
    out.means.push_back(model.components[m].mu);
    out.covs.push_back(model.components[m].sigma);
  }
  return out;
}

MixtureEstimate mixture_estimate(const LtvSystem& sys, int t_H, const DomainOracle& oracle,
                                 int n_outer, const HdrConfig& config, RandomSource& rng,
                                 const JacobianFn& jacobian) {
  if (n_outer < 2) throw ConfigError("at least two outer iterations are required for a variance");
  sys.validate(t_H);

  // Streams are split before dispatch; the outer loop owns the parallelism
  // and the inner estimator runs single-threaded.
  std::vector<std::uint64_t> seeds(n_outer);
  for (auto& s : seeds) s = draw_seed(rng);
  HdrConfig inner = config;
  inner.threads = 1;

  MixtureEstimate est;
  est.runs.resize(n_outer);
  parallel_for(n_outer, config.threads, [&](int i) {
    try {
      Mt19937Source stream(seeds[i]);
      LtvSystem conditional = sys;
      if (sys.v.is_mixture())
        conditional.v = conditional_noise_spec(*sys.v.mixture,
                                               sample_mode_sequence(*sys.v.mixture, t_H, stream));
      if (sys.w.is_mixture())
        conditional.w = conditional_noise_spec(*sys.w.mixture,
                                               sample_mode_sequence(*sys.w.mixture, t_H, stream));
      if (jacobian) conditional.C = propagate_expected_state(conditional, jacobian, t_H).C;
      est.runs[i] = hdr_estimate(build_trajectory_gaussian(conditional, t_H), oracle, inner, stream);
    } catch (const EstimationError& e) {
      throw EstimationError("outer iteration " + std::to_string(i) + ": " + e.what());
    }
  });

  double mean = 0.0;
  for (const auto& r : est.runs) mean += r.probability;
  mean /= n_outer;
  double spread = 0.0, within = 0.0;
  for (const auto& r : est.runs) {
    spread += (r.probability - mean) * (r.probability - mean);
    within += r.variance;
    est.upper_bound_only = est.upper_bound_only || r.upper_bound_only;
  }
  spread /= n_outer - 1;
  within /= n_outer;

  est.probability = mean;
  est.between_variance = spread / n_outer;
  est.within_variance = within / n_outer;
  est.variance = est.between_variance + est.within_variance;
  est.std_dev = std::sqrt(est.variance);
  return est;
}

}  // namespace probstl
