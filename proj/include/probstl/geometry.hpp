#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "probstl/stl.hpp"

namespace probstl {

// a'x + b >= 0.
struct Halfspace {
  Eigen::VectorXd a;
  double b = 0.0;

  double evaluate(const Eigen::VectorXd& x) const { return a.dot(x) + b; }
};

// Conjunction of half-spaces.
struct Polytope {
  std::vector<Halfspace> faces;

  // min over faces; +inf for an empty face list is never produced because
  // construction requires at least one face.
  double margin(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x, double shift = 0.0) const;
};

// Disjunction of polytopes; may be empty (nothing is contained).
struct UnionOfPolytopes {
  std::vector<Polytope> members;

  double margin(const Eigen::VectorXd& x) const;  // max over members, -inf if empty
  bool contains(const Eigen::VectorXd& x, double shift = 0.0) const;
  int dim() const;
};

// Disjoint angular intervals on the ellipse parameter circle.  Intervals are
// stored as (lo, hi) with lo in [0, 2pi) and lo < hi <= lo + 2pi, sorted by
// lo; a full circle is the single interval (0, 2pi).
struct EllipseArcs {
  std::vector<std::pair<double, double>> intervals;
  double measure = 0.0;

  bool contains(double theta) const;
  // Maps a uniform draw on [0,1) to an angle uniform over the arcs.
  double sample(double u01) const;
};

// Roots of a'x(theta) + b + shift = 0 on x(theta) = mean + u cos + v sin.
struct EllipseRoots {
  int count = 0;          // 0, 1 (tangency), or 2
  double angles[2] = {0, 0};
  bool degenerate = false;  // constraint identically zero on the ellipse
};

EllipseRoots ellipse_halfspace_roots(const Eigen::VectorXd& mean, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& v, const Halfspace& hs, double shift);

// Canonical arcs from candidate boundary angles plus an activity probe.
// Candidates are sorted and deduplicated, every elementary arc between
// consecutive candidates is classified by probing its midpoint, and runs of
// active arcs are merged cyclically.  With no candidates membership is
// constant and a single probe decides the full circle.  Throws
// EstimationError when nothing is active.
EllipseArcs arcs_from_candidates(std::vector<double> candidates,
                                 const std::function<bool(double)>& active_at);

// Active arcs of the union with every face shifted outward by `shift`
// (larger shift enlarges the domain).  Requires some angle to be active.
EllipseArcs active_arcs_union(const Eigen::VectorXd& mean, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& v, const UnionOfPolytopes& domain,
                              double shift);

// Embeds a state-space predicate at step t into trajectory space (n * t_H).
Halfspace lift_predicate(const LinearPredicate& pred, int t, int t_H);

// Constraint on the segment midpoint between steps t and t+1.
Halfspace midpoint_constraint(const LinearPredicate& pred, int t, int t_H);

struct GoalSpec {
  Polytope region;
  int window_lo = 0;
  int window_hi = 0;  // inclusive step indices
};

// Failure decomposition of a reach-avoid task over t_H steps:
//   type_a: hit an obstacle (at a step, or between steps when midpoints are
//           enabled) while still reaching every goal in its window;
//   type_b: miss some goal throughout its window.
// Their union is the failure set.  `satisfaction` is the complementary
// domain when its enumeration fits the cap; std::nullopt delegates the
// satisfaction side to the STL-score path.
struct ReachAvoidDomains {
  UnionOfPolytopes type_a;
  UnionOfPolytopes type_b;
  std::optional<UnionOfPolytopes> satisfaction;
};

ReachAvoidDomains build_reach_avoid_domains(const Polytope& init,
                                            const std::vector<Polytope>& unsafe,
                                            const std::vector<GoalSpec>& goals, int t_H,
                                            bool midpoints, long enumeration_cap = 100000);

// The reach-avoid task as a formula: init at step 0, obstacles avoided at
// every step, every goal reached within its window.  Step-sampled only; the
// midpoint refinement has no formula counterpart.
StlFormula build_reach_avoid_formula(const Polytope& init, const std::vector<Polytope>& unsafe,
                                     const std::vector<GoalSpec>& goals, int t_H);

// Concatenation of the two failure unions.
UnionOfPolytopes failure_union(const ReachAvoidDomains& domains);

}  // namespace probstl
