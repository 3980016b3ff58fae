#pragma once

// Shared oracles for the test suite.  Everything here is deliberately
// independent of the library internals: brute-force recursions, closed-form
// tail probabilities, dense sweeps.  Expected values in the tests are either
// produced by these oracles or derived by hand in the accompanying comment.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "probstl/stl.hpp"

namespace testsupport {

// P(Z >= z) for standard normal Z.
inline double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Mean of a standard normal truncated to [a, inf).
inline double truncated_normal_mean(double a) {
  double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
  return phi / normal_tail(a);
}

// Variance of a standard normal truncated to [a, inf).
inline double truncated_normal_var(double a) {
  double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
  double r = phi / normal_tail(a);
  return 1.0 + a * r - r * r;
}

// Boolean satisfaction by direct recursion, no scores.  Ties (h = 0) count
// as satisfied, matching the library's non-strict convention.
inline bool sat_bool(const probstl::StlFormula::Node& n, const probstl::StackedSignal& s, int t) {
  using Kind = probstl::StlFormula::Kind;
  switch (n.kind) {
    case Kind::Predicate:
      return n.pred.evaluate(s.state(t)) >= 0.0;
    case Kind::Not:
      return !sat_bool(*n.left, s, t);
    case Kind::And:
      return sat_bool(*n.left, s, t) && sat_bool(*n.right, s, t);
    case Kind::Or:
      return sat_bool(*n.left, s, t) || sat_bool(*n.right, s, t);
    case Kind::Always: {
      for (int tau = t + n.t1; tau <= t + n.t2; ++tau)
        if (!sat_bool(*n.left, s, tau)) return false;
      return true;
    }
    case Kind::Eventually: {
      for (int tau = t + n.t1; tau <= t + n.t2; ++tau)
        if (sat_bool(*n.left, s, tau)) return true;
      return false;
    }
    case Kind::Until: {
      for (int tau = t + n.t1; tau <= t + n.t2; ++tau) {
        if (!sat_bool(*n.right, s, tau)) continue;
        bool guard = true;
        for (int tp = t; tp <= tau; ++tp)
          if (!sat_bool(*n.left, s, tp)) {
            guard = false;
            break;
          }
        if (guard) return true;
      }
      return false;
    }
  }
  return false;
}

inline bool sat_bool(const probstl::StlFormula& f, const probstl::StackedSignal& s, int t) {
  return sat_bool(f.root(), s, t);
}

// Random formula with bounded depth and small integer intervals.
inline probstl::StlFormula random_formula(std::mt19937_64& rng, int state_dim, int depth) {
  using probstl::StlFormula;
  std::uniform_int_distribution<int> coef(-3, 3);
  std::uniform_int_distribution<int> offs(-5, 5);
  std::uniform_int_distribution<int> lo_d(0, 2);
  std::uniform_int_distribution<int> len_d(0, 2);
  auto leaf = [&] {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(state_dim);
    bool nonzero = false;
    for (int i = 0; i < state_dim; ++i) {
      a[i] = coef(rng);
      nonzero = nonzero || a[i] != 0.0;
    }
    if (!nonzero) a[0] = 1.0;
    return StlFormula::predicate({a, double(offs(rng))});
  };
  if (depth <= 0) return leaf();
  std::uniform_int_distribution<int> pick(0, 6);
  int t1 = lo_d(rng);
  int t2 = t1 + len_d(rng);
  switch (pick(rng)) {
    case 0:
      return leaf();
    case 1:
      return StlFormula::negation(random_formula(rng, state_dim, depth - 1));
    case 2:
      return StlFormula::conjunction(random_formula(rng, state_dim, depth - 1),
                                     random_formula(rng, state_dim, depth - 1));
    case 3:
      return StlFormula::disjunction(random_formula(rng, state_dim, depth - 1),
                                     random_formula(rng, state_dim, depth - 1));
    case 4:
      return StlFormula::always(t1, t2, random_formula(rng, state_dim, depth - 1));
    case 5:
      return StlFormula::eventually(t1, t2, random_formula(rng, state_dim, depth - 1));
    default:
      return StlFormula::until(t1, t2, random_formula(rng, state_dim, depth - 1),
                               random_formula(rng, state_dim, depth - 1));
  }
}

// Random signal long enough for the formula's horizon at time 0; mixes
// integer-valued and continuous coordinates so exact ties do occur.
inline probstl::StackedSignal random_signal(std::mt19937_64& rng, int state_dim, int steps) {
  std::uniform_real_distribution<double> real(-6.0, 6.0);
  std::uniform_int_distribution<int> pick(0, 3);
  Eigen::VectorXd d(state_dim * steps);
  for (int i = 0; i < d.size(); ++i) {
    double v = real(rng);
    d[i] = pick(rng) == 0 ? std::round(v) : v;
  }
  return probstl::StackedSignal(d, state_dim);
}

// The two-conjunct benchmark formula used by several anchors:
//   G[0,9](x1 + x2 - 10 >= 0)  |  F[0,15] G[0,5] (-x1 >= 0)
inline probstl::StlFormula benchmark_formula() {
  using probstl::StlFormula;
  Eigen::VectorXd a1(2), a2(2);
  a1 << 1, 1;
  a2 << -1, 0;
  StlFormula left = StlFormula::always(0, 9, StlFormula::predicate({a1, -10.0}));
  StlFormula right =
      StlFormula::eventually(0, 15, StlFormula::always(0, 5, StlFormula::predicate({a2, 0.0})));
  return StlFormula::disjunction(left, right);
}

// Its benchmark signal s_t = (t - 8, 2).
inline probstl::StackedSignal benchmark_signal(int steps) {
  Eigen::VectorXd d(2 * steps);
  for (int t = 0; t < steps; ++t) {
    d[2 * t] = t - 8.0;
    d[2 * t + 1] = 2.0;
  }
  return probstl::StackedSignal(d, 2);
}

// Planar double integrator (x, y, vx, vy) with acceleration inputs.
inline Eigen::MatrixXd holonomic_A(double dt) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(4, 4);
  A(0, 2) = dt;
  A(1, 3) = dt;
  return A;
}

inline Eigen::MatrixXd holonomic_B(double dt, double mass = 1.0) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(4, 2);
  B(0, 0) = B(1, 1) = 0.5 * dt * dt / mass;
  B(2, 0) = B(3, 1) = dt / mass;
  return B;
}

}  // namespace testsupport
