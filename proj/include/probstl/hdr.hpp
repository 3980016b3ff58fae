#pragma once

#include <cstdint>
#include <vector>

#include "probstl/ess.hpp"

namespace probstl {

// One nesting of the splitting estimator.  Cutoffs are score thresholds
// (negative while the domain is still enlarged); the final record sits at
// the target cutoff, normally 0.
struct NestingRecord {
  int level = 0;
  double cutoff = 0.0;
  int samples = 0;
  int in_count = 0;
  double conditional = 0.0;
};

struct VerificationResult {
  double probability = 0.0;
  double variance = 0.0;
  double std_dev = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double ci_level = 0.95;
  std::vector<NestingRecord> nestings;
  std::vector<StackedSignal> retained;  // in-domain samples of the last nesting
  double wall_seconds = 0.0;
  // Set when the nesting cap was hit before the target cutoff; `probability`
  // then holds the product of observed conditionals, an upper-bound scale.
  bool upper_bound_only = false;
};

struct HdrConfig {
  int n_k = 0;               // samples per nesting; 0 selects automatically
  double target_std = 0.05;  // automatic mode: requested standard deviation
  double p_guess = 0.01;     // automatic mode: prior probability guess
  int n_cap = 4096;          // automatic mode: largest allowed n_k
  int K_cap = 40;
  double ci_level = 0.95;
  int n_d = 4;   // ESS thinning within nestings
  int threads = 1;
};

// Multilevel splitting over ESS.  Starts from independent draws, then
// shrinks the enlarged domain by the empirical median of the scores
// (clipped at the oracle's own cutoff) until the target is reached, chaining
// from the retained samples at each nesting.  The probability is the
// product of the per-nesting conditionals.
VerificationResult hdr_estimate(const TrajectoryGaussian& gaussian, const DomainOracle& oracle,
                                const HdrConfig& config, RandomSource& rng);

// Variance of the product of independent binomial proportions:
// prod(p_k (1-p_k)/n_k + p_k^2) - prod(p_k^2).
double variance_of_product(const std::vector<NestingRecord>& records);

struct SampleCountChoice {
  int count = 0;
  bool target_met = false;
};

// Smallest per-nesting count (floor 8, at most cap) whose nominal
// all-halves variance keeps the standard deviation within target_std; when
// even cap falls short the cap is returned with target_met = false.
SampleCountChoice adaptive_sample_count(double target_std, int expected_K, int cap);

// ceil(-log2(p_guess)): the nesting count when every conditional is 1/2.
int estimate_nestings(double p_guess);

}  // namespace probstl
