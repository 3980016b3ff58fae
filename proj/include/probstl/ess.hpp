#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "probstl/geometry.hpp"
#include "probstl/rng.hpp"
#include "probstl/system.hpp"

namespace probstl {

// Polytope-union slice target; `shift` enlarges every face outward, so the
// membership test is contains(x, shift) and the natural cutoff is -shift.
struct PolytopeDomain {
  UnionOfPolytopes region;
  double shift = 0.0;
};

// STL level-set slice target: robustness(formula, x, 0) >= level.
struct StlDomain {
  StlFormula formula;
  double level = 0.0;
};

// Slice target for elliptical slice sampling.  Membership is equivalent to
// score(x) >= cutoff(), where score is the union margin for polytopes and
// the robustness for formulas; with_cutoff keeps the geometry and moves the
// threshold, which is how the nesting estimator tightens domains.
class DomainOracle {
 public:
  explicit DomainOracle(PolytopeDomain d);
  explicit DomainOracle(StlDomain d);

  bool membership(const StackedSignal& x) const;
  double score(const StackedSignal& x) const;
  double cutoff() const;
  DomainOracle with_cutoff(double rho) const;

  // Active arcs of the ellipse x(theta) = mean + u cos(theta) + v sin(theta).
  EllipseArcs active_arcs(const Eigen::VectorXd& mean, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& v) const;

 private:
  std::variant<PolytopeDomain, StlDomain> domain_;
};

struct ChainConfig {
  int n_d = 4;  // thinning: keep every n_d-th step
  std::uint64_t seed = 0;
};

// One rejection-free slice move: draws one auxiliary point from the
// Gaussian, intersects the resulting ellipse with the domain, and samples
// the new state uniformly by arc length.  Exactly one angle draw per call.
StackedSignal ess_step(const StackedSignal& current, const TrajectoryGaussian& gaussian,
                       const DomainOracle& oracle, RandomSource& rng);

// Root-candidate construction for an STL level set: every predicate lifted
// at every step within the horizon, intersected with the ellipse at levels
// +level and -level; elementary arcs are classified by one robustness probe
// each.  `current` must satisfy the level set; `free` is the auxiliary
// draw.
EllipseArcs stl_active_arcs(const StackedSignal& current, const StackedSignal& free,
                            const TrajectoryGaussian& gaussian, const StlFormula& formula,
                            double level);

// Runs count * n_d steps from `start`, returning every n_d-th state.
std::vector<StackedSignal> sample_chain(const StackedSignal& start, int count,
                                        const TrajectoryGaussian& gaussian,
                                        const DomainOracle& oracle, const ChainConfig& config);

}  // namespace probstl
