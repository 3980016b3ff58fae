#pragma once

#include <cstdint>
#include <vector>

#include "probstl/ess.hpp"
#include "probstl/system.hpp"

namespace probstl {

struct McResult {
  double p_hat = 0.0;
  double variance = 0.0;  // p_hat (1 - p_hat) / n_mc
  int n_mc = 0;
  std::vector<std::uint8_t> satisfied;  // one flag per simulation
  double wall_seconds = 0.0;
};

// Simple random sampling: simulate the closed loop n_mc times (mixture
// modes drawn per step where applicable) and count robustness >= 0 at time
// zero.  The horizon is the formula's own.
McResult srs_estimate(const LtvSystem& sys, const StlFormula& formula, int n_mc, RandomSource& rng,
                      const MeasurementFn& measure = nullptr);

// Same sampler against an explicit domain over t_H steps, so the counted
// event can match a splitting run exactly (midpoint faces included).
McResult srs_estimate(const LtvSystem& sys, int t_H, const DomainOracle& oracle, int n_mc,
                      RandomSource& rng, const MeasurementFn& measure = nullptr);

}  // namespace probstl
