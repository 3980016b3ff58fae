#include "probstl/mc.hpp"

#include <chrono>

#include "probstl/errors.hpp"

namespace probstl {

McResult srs_estimate(const LtvSystem& sys, int t_H, const DomainOracle& oracle, int n_mc,
                      RandomSource& rng, const MeasurementFn& measure) {
  if (n_mc < 1) throw ConfigError("at least one simulation is required");
  sys.validate(t_H);
  auto t0 = std::chrono::steady_clock::now();

  NoisePlan plan(sys, t_H);
  McResult res;
  res.n_mc = n_mc;
  res.satisfied.resize(n_mc);
  long count = 0;
  for (int i = 0; i < n_mc; ++i) {
    StackedSignal traj = simulate_closed_loop(sys, t_H, plan.draw(rng), measure);
    bool ok = oracle.membership(traj);
    res.satisfied[i] = ok ? 1 : 0;
    count += ok;
  }
  res.p_hat = double(count) / n_mc;
  res.variance = res.p_hat * (1.0 - res.p_hat) / n_mc;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

McResult srs_estimate(const LtvSystem& sys, const StlFormula& formula, int n_mc, RandomSource& rng,
                      const MeasurementFn& measure) {
  return srs_estimate(sys, horizon(formula), DomainOracle{StlDomain{formula, 0.0}}, n_mc, rng,
                      measure);
}

}  // namespace probstl
