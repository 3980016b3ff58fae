#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace probstl {

// Affine half-space constraint h(x) = a'x + b, satisfied when h(x) >= 0.
// All comparison operators are normalized to this form at parse time; strict
// and non-strict inequalities are not distinguished.
struct LinearPredicate {
  Eigen::VectorXd a;
  double b = 0.0;

  double evaluate(const Eigen::VectorXd& x) const { return a.dot(x) + b; }
  bool operator==(const LinearPredicate& o) const {
    return b == o.b && a.size() == o.a.size() && (a.array() == o.a.array()).all();
  }
};

// Discrete-time trajectory stored as one stacked vector
// [x_0', x_1', ..., x_{steps-1}']'.
struct StackedSignal {
  Eigen::VectorXd data;
  int state_dim = 0;
  int steps = 0;

  StackedSignal() = default;
  StackedSignal(Eigen::VectorXd d, int n);

  Eigen::VectorXd state(int t) const { return data.segment(t * state_dim, state_dim); }
};

// Temporal-logic formula over discrete time.  Grammar:
//   phi := pred | !phi | phi & phi | phi | phi
//        | G[t1,t2] phi | F[t1,t2] phi | phi U[t1,t2] phi
// Intervals are inclusive integer step offsets, 0 <= t1 <= t2.
class StlFormula {
 public:
  enum class Kind { Predicate, Not, And, Or, Always, Eventually, Until };

  struct Node {
    Kind kind;
    LinearPredicate pred;            // Predicate only
    int t1 = 0, t2 = 0;              // temporal operators only
    std::shared_ptr<const Node> left, right;
  };

  static StlFormula predicate(LinearPredicate p);
  static StlFormula negation(StlFormula f);
  static StlFormula conjunction(StlFormula l, StlFormula r);
  static StlFormula disjunction(StlFormula l, StlFormula r);
  static StlFormula always(int t1, int t2, StlFormula f);
  static StlFormula eventually(int t1, int t2, StlFormula f);
  static StlFormula until(int t1, int t2, StlFormula l, StlFormula r);

  const Node& root() const { return *node_; }
  std::shared_ptr<const Node> root_ptr() const { return node_; }
  int state_dim() const;

  bool operator==(const StlFormula& o) const;

 private:
  explicit StlFormula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// Parses formula text; predicates are affine comparisons over variables
// x1..x<state_dim> with operators >=, <=, >, <.  Throws ParseError with
// line/column on malformed input.
StlFormula parse_formula(const std::string& text, int state_dim);

// Same grammar, but interval bounds are nonnegative seconds mapped to the
// step grid of width dt so the window is covered: lo = floor(a/dt),
// hi = ceil(b/dt).
StlFormula parse_formula(const std::string& text, int state_dim, double dt);

// Canonical text form; parse_formula(pretty_print(f), n) == f structurally.
std::string pretty_print(const StlFormula& f);

// Number of time steps required to evaluate the formula at time 0:
// predicates need 1, temporal operators add their upper bound.
int horizon(const StlFormula& f);

// Quantitative satisfaction of the formula at step t.  min/max semantics;
// requires signal.steps >= t + horizon(f).
double robustness(const StlFormula& f, const StackedSignal& signal, int t);

// Same recursion with predicate values supplied by a callback; pred indices
// follow collect_predicates order.  This is what the ellipse machinery uses
// to evaluate probe angles in O(1) per predicate-time pair.
double robustness_from_values(const StlFormula& f,
                              const std::function<double(int pred, int t)>& value,
                              int t);

// Distinct predicates in syntactic order (duplicates by exact (a, b) match
// are collapsed).
std::vector<LinearPredicate> collect_predicates(const StlFormula& f);

// True when robustness(f, signal, 0) >= level.
bool in_level_set(const StlFormula& f, const StackedSignal& signal, double level);

}  // namespace probstl
