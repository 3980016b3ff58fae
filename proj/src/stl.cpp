#include "probstl/stl.hpp"

#include <algorithm>
#include <limits>

#include "probstl/errors.hpp"

namespace probstl {

namespace {

using Node = StlFormula::Node;
using Kind = StlFormula::Kind;

std::shared_ptr<const Node> make_node(Node n) {
  return std::make_shared<const Node>(std::move(n));
}

void check_interval(int t1, int t2) {
  if (t1 < 0 || t2 < 0) throw ConfigError("interval bounds must be nonnegative");
  if (t1 > t2) throw ConfigError("inverted interval [" + std::to_string(t1) + "," +
                                 std::to_string(t2) + "]");
}

int node_state_dim(const Node& n) {
  if (n.kind == Kind::Predicate) return int(n.pred.a.size());
  int d = node_state_dim(*n.left);
  if (n.right) d = std::max(d, node_state_dim(*n.right));
  return d;
}

int node_horizon(const Node& n) {
  switch (n.kind) {
    case Kind::Predicate:
      return 1;
    case Kind::Not:
      return node_horizon(*n.left);
    case Kind::And:
    case Kind::Or:
      return std::max(node_horizon(*n.left), node_horizon(*n.right));
    case Kind::Always:
    case Kind::Eventually:
      return n.t2 + node_horizon(*n.left);
    case Kind::Until:
      return n.t2 + std::max(node_horizon(*n.left), node_horizon(*n.right));
  }
  return 1;
}

bool node_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Kind::Predicate) return a.pred == b.pred;
  if (a.t1 != b.t1 || a.t2 != b.t2) return false;
  if (!node_equal(*a.left, *b.left)) return false;
  if (a.right || b.right) {
    if (!a.right || !b.right) return false;
    return node_equal(*a.right, *b.right);
  }
  return true;
}

void collect(const Node& n, std::vector<LinearPredicate>& out) {
  if (n.kind == Kind::Predicate) {
    for (const auto& p : out)
      if (p == n.pred) return;
    out.push_back(n.pred);
    return;
  }
  collect(*n.left, out);
  if (n.right) collect(*n.right, out);
}

// Memoized evaluation over (node, time); nodes are indexed by a pre-order
// walk so the memo is a dense table.
struct Evaluator {
  const std::function<double(int pred, int t)>& value;
  std::vector<const Node*> nodes;
  std::vector<int> pred_index;           // per node, -1 unless Predicate
  std::vector<int> left_id, right_id;    // -1 when absent
  std::vector<std::vector<double>> memo;
  std::vector<std::vector<char>> known;

  Evaluator(const Node& root, const std::function<double(int, int)>& v,
            const std::vector<LinearPredicate>& preds, int max_t)
      : value(v) {
    index(root, preds);
    memo.assign(nodes.size(), std::vector<double>(max_t + 1, 0.0));
    known.assign(nodes.size(), std::vector<char>(max_t + 1, 0));
  }

  int index(const Node& n, const std::vector<LinearPredicate>& preds) {
    int id = int(nodes.size());
    nodes.push_back(&n);
    pred_index.push_back(-1);
    left_id.push_back(-1);
    right_id.push_back(-1);
    if (n.kind == Kind::Predicate) {
      for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == n.pred) {
          pred_index[id] = int(i);
          break;
        }
    } else {
      left_id[id] = index(*n.left, preds);
      if (n.right) right_id[id] = index(*n.right, preds);
    }
    return id;
  }

  double eval(int id, int t) {
    if (known[id][t]) return memo[id][t];
    const Node& n = *nodes[id];
    double r = 0.0;
    switch (n.kind) {
      case Kind::Predicate:
        r = value(pred_index[id], t);
        break;
      case Kind::Not:
        r = -eval(left_id[id], t);
        break;
      case Kind::And:
        r = std::min(eval(left_id[id], t), eval(right_id[id], t));
        break;
      case Kind::Or:
        r = std::max(eval(left_id[id], t), eval(right_id[id], t));
        break;
      case Kind::Always: {
        r = std::numeric_limits<double>::infinity();
        for (int tau = t + n.t1; tau <= t + n.t2; ++tau) r = std::min(r, eval(left_id[id], tau));
        break;
      }
      case Kind::Eventually: {
        r = -std::numeric_limits<double>::infinity();
        for (int tau = t + n.t1; tau <= t + n.t2; ++tau) r = std::max(r, eval(left_id[id], tau));
        break;
      }
      case Kind::Until: {
        r = -std::numeric_limits<double>::infinity();
        // guard accumulates min over tau' in [t, tau] of the left operand
        double guard = std::numeric_limits<double>::infinity();
        for (int tp = t; tp < t + n.t1; ++tp) guard = std::min(guard, eval(left_id[id], tp));
        for (int tau = t + n.t1; tau <= t + n.t2; ++tau) {
          guard = std::min(guard, eval(left_id[id], tau));
          r = std::max(r, std::min(eval(right_id[id], tau), guard));
        }
        break;
      }
    }
    memo[id][t] = r;
    known[id][t] = 1;
    return r;
  }
};

}  // namespace

StackedSignal::StackedSignal(Eigen::VectorXd d, int n) : data(std::move(d)), state_dim(n) {
  if (n <= 0 || data.size() % n != 0)
    throw ConfigError("stacked signal length " + std::to_string(data.size()) +
                      " is not a multiple of the state dimension " + std::to_string(n));
  steps = int(data.size() / n);
}

StlFormula StlFormula::predicate(LinearPredicate p) {
  if (p.a.size() == 0) throw ConfigError("predicate has empty coefficient vector");
  Node n;
  n.kind = Kind::Predicate;
  n.pred = std::move(p);
  return StlFormula(make_node(std::move(n)));
}

StlFormula StlFormula::negation(StlFormula f) {
  Node n;
  n.kind = Kind::Not;
  n.left = f.node_;
  return StlFormula(make_node(std::move(n)));
}

StlFormula StlFormula::conjunction(StlFormula l, StlFormula r) {
  Node n;
  n.kind = Kind::And;
  n.left = l.node_;
  n.right = r.node_;
  return StlFormula(make_node(std::move(n)));
}

StlFormula StlFormula::disjunction(StlFormula l, StlFormula r) {
  Node n;
  n.kind = Kind::Or;
  n.left = l.node_;
  n.right = r.node_;
  return StlFormula(make_node(std::move(n)));
}

StlFormula StlFormula::always(int t1, int t2, StlFormula f) {
  check_interval(t1, t2);
  Node n;
  n.kind = Kind::Always;
  n.t1 = t1;
  n.t2 = t2;
  n.left = f.node_;
  return StlFormula(make_node(std::move(n)));
}

StlFormula StlFormula::eventually(int t1, int t2, StlFormula f) {
  check_interval(t1, t2);
  Node n;
  n.kind = Kind::Eventually;
  n.t1 = t1;
  n.t2 = t2;
  n.left = f.node_;
  return StlFormula(make_node(std::move(n)));
}

StlFormula StlFormula::until(int t1, int t2, StlFormula l, StlFormula r) {
  check_interval(t1, t2);
  Node n;
  n.kind = Kind::Until;
  n.t1 = t1;
  n.t2 = t2;
  n.left = l.node_;
  n.right = r.node_;
  return StlFormula(make_node(std::move(n)));
}

int StlFormula::state_dim() const { return node_state_dim(*node_); }

bool StlFormula::operator==(const StlFormula& o) const { return node_equal(*node_, *o.node_); }

int horizon(const StlFormula& f) { return node_horizon(f.root()); }

double robustness_from_values(const StlFormula& f,
                              const std::function<double(int pred, int t)>& value, int t) {
  auto preds = collect_predicates(f);
  Evaluator ev(f.root(), value, preds, t + node_horizon(f.root()));
  return ev.eval(0, t);
}

double robustness(const StlFormula& f, const StackedSignal& signal, int t) {
  if (t < 0) throw ConfigError("evaluation time must be nonnegative");
  int h = horizon(f);
  if (signal.steps < t + h)
    throw ConfigError("signal has " + std::to_string(signal.steps) + " steps but " +
                      std::to_string(t + h) + " are needed for evaluation at t=" +
                      std::to_string(t));
  auto preds = collect_predicates(f);
  auto value = [&](int pred, int tau) { return preds[pred].evaluate(signal.state(tau)); };
  Evaluator ev(f.root(), value, preds, t + h);
  return ev.eval(0, t);
}

std::vector<LinearPredicate> collect_predicates(const StlFormula& f) {
  std::vector<LinearPredicate> out;
  collect(f.root(), out);
  return out;
}

bool in_level_set(const StlFormula& f, const StackedSignal& signal, double level) {
  return robustness(f, signal, 0) >= level;
}

}  // namespace probstl
