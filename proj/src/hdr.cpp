#include "probstl/hdr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "probstl/errors.hpp"
#include "probstl/util.hpp"

namespace probstl {

namespace {

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int resolve_sample_count(const HdrConfig& config) {
  if (config.n_k > 0) {
    if (config.n_k < 8) throw ConfigError("per-nesting sample count is below the floor of 8");
    return config.n_k;
  }
  int expected = estimate_nestings(config.p_guess);
  return adaptive_sample_count(config.target_std, expected, config.n_cap).count;
}

}  // namespace

double variance_of_product(const std::vector<NestingRecord>& records) {
  double with_noise = 1.0, noiseless = 1.0;
  for (const auto& r : records) {
    double var_k = r.conditional * (1.0 - r.conditional) / r.samples;
    with_noise *= var_k + r.conditional * r.conditional;
    noiseless *= r.conditional * r.conditional;
  }
  return with_noise - noiseless;
}

SampleCountChoice adaptive_sample_count(double target_std, int expected_K, int cap) {
  if (!(target_std > 0.0)) throw ConfigError("target standard deviation must be positive");
  if (expected_K < 0) throw ConfigError("expected nesting count must be nonnegative");
  if (cap < 8) throw ConfigError("sample count cap is below the floor of 8");
  auto nominal_var = [&](int n) {
    return std::pow(0.25 + 0.25 / n, expected_K) - std::pow(0.25, expected_K);
  };
  double target_var = target_std * target_std;
  for (int n = 8; n <= cap; ++n)
    if (nominal_var(n) <= target_var) return {n, true};
  return {cap, false};
}

int estimate_nestings(double p_guess) {
  if (!(p_guess > 0.0) || p_guess > 1.0) throw ConfigError("probability guess must be in (0, 1]");
  return static_cast<int>(std::ceil(-std::log2(p_guess)));
}

VerificationResult hdr_estimate(const TrajectoryGaussian& gaussian, const DomainOracle& oracle,
                                const HdrConfig& config, RandomSource& rng) {
  if (config.K_cap < 1) throw ConfigError("nesting cap must be at least 1");
  if (!(config.ci_level > 0.0) || config.ci_level >= 1.0)
    throw ConfigError("confidence level must be in (0, 1)");
  if (config.n_d < 1) throw ConfigError("thinning factor must be at least 1");
  if (config.threads < 1) throw ConfigError("thread count must be at least 1");
  int n = resolve_sample_count(config);

  auto t0 = std::chrono::steady_clock::now();
  double target = oracle.cutoff();

  std::vector<StackedSignal> samples;
  samples.reserve(n);
  std::vector<double> scores(n);
  for (int i = 0; i < n; ++i) {
    samples.push_back(gaussian.sample(rng));
    scores[i] = oracle.score(samples[i]);
  }

  VerificationResult result;
  result.ci_level = config.ci_level;
  double product = 1.0;
  int enlarged = 0;

  for (;;) {
    double cutoff = std::min(median_of(scores), target);
    std::vector<int> in;
    in.reserve(n);
    for (int i = 0; i < n; ++i)
      if (scores[i] >= cutoff) in.push_back(i);
    double conditional = double(in.size()) / n;
    result.nestings.push_back(
        {int(result.nestings.size()), cutoff, n, int(in.size()), conditional});
    product *= conditional;

    bool final_nesting = cutoff == target;
    if (final_nesting || ++enlarged == config.K_cap) {
      result.upper_bound_only = !final_nesting;
      result.retained.reserve(in.size());
      for (int i : in) result.retained.push_back(samples[i]);
      break;
    }
    if (in.empty())
      throw EstimationError("no sample reached the nesting cutoff; cannot continue splitting");

    // Restart one chain per retained sample; quotas split the budget as
    // evenly as possible.  Seeds are drawn up front so the chains can run
    // on any number of threads without changing the result.
    DomainOracle tightened = oracle.with_cutoff(cutoff);
    int chains = int(in.size());
    std::vector<std::uint64_t> seeds(chains);
    for (auto& s : seeds) s = draw_seed(rng);
    std::vector<std::vector<StackedSignal>> chain_samples(chains);
    std::vector<std::vector<double>> chain_scores(chains);
    parallel_for(chains, config.threads, [&](int c) {
      int quota = n / chains + (c < n % chains ? 1 : 0);
      ChainConfig cc;
      cc.n_d = config.n_d;
      cc.seed = seeds[c];
      chain_samples[c] = sample_chain(samples[in[c]], quota, gaussian, tightened, cc);
      chain_scores[c].reserve(chain_samples[c].size());
      for (const auto& s : chain_samples[c]) chain_scores[c].push_back(oracle.score(s));
    });
    samples.clear();
    scores.clear();
    for (int c = 0; c < chains; ++c) {
      for (size_t i = 0; i < chain_samples[c].size(); ++i) {
        samples.push_back(std::move(chain_samples[c][i]));
        scores.push_back(chain_scores[c][i]);
      }
    }
  }

  result.probability = product;
  result.variance = variance_of_product(result.nestings);
  result.std_dev = std::sqrt(result.variance);
  double z = normal_quantile(0.5 + 0.5 * config.ci_level);
  result.ci_lo = std::max(0.0, product - z * result.std_dev);
  result.ci_hi = std::min(1.0, product + z * result.std_dev);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace probstl
