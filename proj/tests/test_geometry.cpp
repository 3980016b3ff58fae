#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "probstl/errors.hpp"
#include "probstl/geometry.hpp"
#include "probstl/stl.hpp"
#include "support.hpp"

using namespace probstl;

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

Halfspace hs2(double ax, double ay, double b) { return Halfspace{vec2(ax, ay), b}; }

Eigen::VectorXd point_on(const Eigen::VectorXd& mean, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& v, double theta) {
  return mean + u * std::cos(theta) + v * std::sin(theta);
}

// Axis-aligned box [lx,hx] x [ly,hy] as a 4-face polytope.
Polytope box2(double lx, double hx, double ly, double hy) {
  Polytope p;
  p.faces.push_back(hs2(1, 0, -lx));
  p.faces.push_back(hs2(-1, 0, hx));
  p.faces.push_back(hs2(0, 1, -ly));
  p.faces.push_back(hs2(0, -1, hy));
  return p;
}

double normalize_angle(double theta) {
  double t = std::fmod(theta, 2 * kPi);
  if (t < 0) t += 2 * kPi;
  return t;
}

}  // namespace

TEST_CASE("ellipse root examples") {
  Eigen::VectorXd mean = vec2(0, 0), u = vec2(1, 0), v = vec2(0, 1);

  SUBCASE("half-plane through center") {
    EllipseRoots r = ellipse_halfspace_roots(mean, u, v, hs2(1, 0, 0), 0.0);
    REQUIRE(r.count == 2);
    CHECK(!r.degenerate);
    std::vector<double> angles{r.angles[0], r.angles[1]};
    std::sort(angles.begin(), angles.end());
    CHECK(angles[0] == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(angles[1] == doctest::Approx(3 * kPi / 2).epsilon(1e-12));
  }
  SUBCASE("shifted center, no intersection") {
    EllipseRoots r = ellipse_halfspace_roots(vec2(2, 0), u, v, hs2(1, 0, 0), 0.0);
    CHECK(r.count == 0);
    CHECK(!r.degenerate);
  }
  SUBCASE("tangency at theta = 0") {
    EllipseRoots r = ellipse_halfspace_roots(mean, u, v, hs2(1, 0, -1), 0.0);
    REQUIRE(r.count == 1);
    CHECK(normalize_angle(r.angles[0]) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("shift enlarges the domain") {
    // x1 - 2 >= 0 misses the unit circle, but shifting faces out by 1.5 reaches it.
    CHECK(ellipse_halfspace_roots(mean, u, v, hs2(1, 0, -2), 0.0).count == 0);
    CHECK(ellipse_halfspace_roots(mean, u, v, hs2(1, 0, -2), 1.5).count == 2);
  }
  SUBCASE("constraint constant on the ellipse") {
    Eigen::VectorXd m3 = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd u3 = Eigen::VectorXd::Zero(3), v3 = Eigen::VectorXd::Zero(3);
    u3(0) = 1;
    v3(1) = 1;
    Halfspace flat{Eigen::VectorXd::Zero(3), 0.0};
    flat.a(2) = 1;
    EllipseRoots zero = ellipse_halfspace_roots(m3, u3, v3, flat, 0.0);
    CHECK(zero.count == 0);
    CHECK(zero.degenerate);
    flat.b = 1.0;  // constant but nonzero: not degenerate, just rootless
    EllipseRoots off = ellipse_halfspace_roots(m3, u3, v3, flat, 0.0);
    CHECK(off.count == 0);
    CHECK(!off.degenerate);
  }
}

TEST_CASE("ellipse root correctness on random instances") {
  std::mt19937_64 rng(71u);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  int checked_roots = 0;
  for (int it = 0; it < 500; ++it) {
    int n = 2 + static_cast<int>(rng() % 3);
    Eigen::VectorXd mean(n), u(n), v(n), a(n);
    for (int i = 0; i < n; ++i) {
      mean(i) = gauss(rng);
      u(i) = gauss(rng);
      v(i) = gauss(rng);
      a(i) = gauss(rng);
    }
    Halfspace hs{a, unif(rng)};
    double shift = unif(rng);
    EllipseRoots roots = ellipse_halfspace_roots(mean, u, v, hs, shift);
    REQUIRE(!roots.degenerate);

    auto value = [&](double theta) { return hs.evaluate(point_on(mean, u, v, theta)) + shift; };
    double scale = std::abs(value(0)) + std::abs(value(kPi / 2)) + std::abs(value(kPi)) + 1.0;
    for (int k = 0; k < roots.count; ++k) {
      CHECK(std::abs(value(roots.angles[k])) < 1e-8 * scale);
      ++checked_roots;
    }

    // No sign change may occur between sweep angles unless a root lies inside.
    const int sweep = 10000;
    double prev = value(0.0);
    for (int s = 1; s <= sweep; ++s) {
      double lo = 2 * kPi * (s - 1) / sweep, hi = 2 * kPi * s / sweep;
      double cur = value(hi);
      if ((prev > 0) != (cur > 0)) {
        bool bracketed = false;
        for (int k = 0; k < roots.count; ++k) {
          double ang = normalize_angle(roots.angles[k]);
          if (ang >= lo - 1e-9 && ang <= hi + 1e-9) bracketed = true;
        }
        CHECK(bracketed);
      }
      prev = cur;
    }
  }
  CHECK(checked_roots > 100);  // the generator must actually exercise crossings
}

TEST_CASE("active arcs on canonical domains") {
  Eigen::VectorXd mean = vec2(0, 0), u = vec2(1, 0), v = vec2(0, 1);

  SUBCASE("whole space") {
    UnionOfPolytopes dom;
    dom.members.push_back(Polytope{{hs2(1, 0, 10)}});  // satisfied everywhere on the ellipse
    EllipseArcs arcs = active_arcs_union(mean, u, v, dom, 0.0);
    REQUIRE(arcs.intervals.size() == 1);
    CHECK(arcs.measure == doctest::Approx(2 * kPi).epsilon(1e-12));
    CHECK(arcs.contains(0.0));
    CHECK(arcs.contains(3.0));
  }
  SUBCASE("half-plane through center") {
    UnionOfPolytopes dom;
    dom.members.push_back(Polytope{{hs2(1, 0, 0)}});
    EllipseArcs arcs = active_arcs_union(mean, u, v, dom, 0.0);
    REQUIRE(arcs.intervals.size() == 1);
    CHECK(arcs.measure == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(arcs.contains(0.0));
    CHECK(arcs.contains(kPi / 2 - 0.01));
    CHECK(arcs.contains(3 * kPi / 2 + 0.01));
    CHECK(!arcs.contains(kPi));
    CHECK(!arcs.contains(kPi / 2 + 0.01));
  }
  SUBCASE("complementary half-planes merge to the full circle") {
    UnionOfPolytopes dom;
    dom.members.push_back(Polytope{{hs2(1, 0, 0)}});
    dom.members.push_back(Polytope{{hs2(-1, 0, 0)}});
    EllipseArcs arcs = active_arcs_union(mean, u, v, dom, 0.0);
    REQUIRE(arcs.intervals.size() == 1);
    CHECK(arcs.measure == doctest::Approx(2 * kPi).epsilon(1e-12));
  }
  SUBCASE("no active angle violates the precondition") {
    UnionOfPolytopes dom;
    dom.members.push_back(Polytope{{hs2(1, 0, -2)}});
    CHECK_THROWS_AS(active_arcs_union(mean, u, v, dom, 0.0), EstimationError);
  }
  SUBCASE("outward shift turns the empty case active") {
    UnionOfPolytopes dom;
    dom.members.push_back(Polytope{{hs2(1, 0, -2)}});
    EllipseArcs arcs = active_arcs_union(mean, u, v, dom, 1.5);
    CHECK(arcs.measure > 0);
    CHECK(arcs.contains(0.0));
    CHECK(!arcs.contains(kPi));
  }
}

TEST_CASE("arc classification and measure bookkeeping on random unions") {
  std::mt19937_64 rng(72u);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int nonempty = 0;
  for (int it = 0; it < 200; ++it) {
    int n = 2 + static_cast<int>(rng() % 2);
    Eigen::VectorXd mean(n), u(n), v(n);
    for (int i = 0; i < n; ++i) {
      mean(i) = 0.5 * gauss(rng);
      u(i) = gauss(rng);
      v(i) = gauss(rng);
    }
    UnionOfPolytopes dom;
    int members = 1 + static_cast<int>(rng() % 3);
    for (int m = 0; m < members; ++m) {
      Polytope p;
      int faces = 1 + static_cast<int>(rng() % 3);
      for (int f = 0; f < faces; ++f) {
        Eigen::VectorXd a(n);
        for (int i = 0; i < n; ++i) a(i) = gauss(rng);
        p.faces.push_back(Halfspace{a, 0.5 * gauss(rng)});
      }
      dom.members.push_back(p);
    }
    double shift = 0.3 * std::abs(gauss(rng));

    bool any_active = false;
    for (int s = 0; s < 512; ++s) {
      if (dom.contains(point_on(mean, u, v, 2 * kPi * s / 512), shift)) {
        any_active = true;
        break;
      }
    }
    if (!any_active) {
      CHECK_THROWS_AS(active_arcs_union(mean, u, v, dom, shift), EstimationError);
      continue;
    }
    ++nonempty;
    EllipseArcs arcs = active_arcs_union(mean, u, v, dom, shift);

    // Structure: sorted, disjoint, measure consistent with the interval list.
    double total = 0;
    for (size_t k = 0; k < arcs.intervals.size(); ++k) {
      auto [lo, hi] = arcs.intervals[k];
      CHECK(lo >= 0.0);
      CHECK(lo < 2 * kPi + 1e-12);
      CHECK(hi > lo);
      CHECK(hi <= lo + 2 * kPi + 1e-12);
      if (k + 1 < arcs.intervals.size()) CHECK(arcs.intervals[k + 1].first >= hi - 1e-12);
      total += hi - lo;
    }
    CHECK(std::abs(total - arcs.measure) < 1e-9);
    CHECK(arcs.measure <= 2 * kPi + 1e-9);

    // Interior angles of every kept arc are members; 10 probes per arc.
    for (auto [lo, hi] : arcs.intervals) {
      for (int k = 0; k < 10; ++k) {
        double theta = lo + (hi - lo) * (k + 0.5) / 10.0;
        CHECK(dom.contains(point_on(mean, u, v, theta), shift));
      }
    }

    // Dense sweep: classification agrees with direct membership away from
    // arc boundaries (roots are exact up to fp noise).
    int disagreements = 0;
    for (int s = 0; s < 10000; ++s) {
      double theta = 2 * kPi * (s + u01(rng)) / 10000;
      bool direct = dom.contains(point_on(mean, u, v, theta), shift);
      if (direct != arcs.contains(theta)) ++disagreements;
    }
    CHECK(disagreements <= 2);  // only boundary-straddling sweep points may differ

    // Uniform sampling lands inside the arcs and covers them.
    for (int k = 0; k < 200; ++k) {
      double theta = arcs.sample(u01(rng));
      CHECK(arcs.contains(theta));
    }
  }
  CHECK(nonempty >= 50);
}

TEST_CASE("lift and midpoint embeddings") {
  SUBCASE("block placement") {
    LinearPredicate pred{vec2(1, 1), -10.0};
    Halfspace lifted = lift_predicate(pred, 1, 3);
    REQUIRE(lifted.a.size() == 6);
    Eigen::VectorXd expect(6);
    expect << 0, 0, 1, 1, 0, 0;
    CHECK((lifted.a - expect).norm() == 0.0);
    CHECK(lifted.b == -10.0);
    CHECK_THROWS_AS(lift_predicate(pred, 3, 3), ConfigError);
  }
  SUBCASE("midpoint placement") {
    Eigen::VectorXd one(1);
    one << 1;
    Halfspace mid = midpoint_constraint(LinearPredicate{one, 0.0}, 0, 2);
    REQUIRE(mid.a.size() == 2);
    CHECK(mid.a(0) == 0.5);
    CHECK(mid.a(1) == 0.5);
    CHECK(mid.b == 0.0);
    CHECK_THROWS_AS(midpoint_constraint(LinearPredicate{one, 0.0}, 1, 2), ConfigError);
  }
  SUBCASE("lifted evaluation equals the direct predicate") {
    std::mt19937_64 rng(73u);
    std::normal_distribution<double> gauss;
    for (int it = 0; it < 100; ++it) {
      int n = 1 + static_cast<int>(rng() % 3);
      int t_H = 2 + static_cast<int>(rng() % 4);
      int t = static_cast<int>(rng() % t_H);
      Eigen::VectorXd a(n);
      for (int i = 0; i < n; ++i) a(i) = gauss(rng);
      LinearPredicate pred{a, gauss(rng)};
      Eigen::VectorXd traj(n * t_H);
      for (int i = 0; i < traj.size(); ++i) traj(i) = gauss(rng);
      StackedSignal sig{traj, n};
      CHECK(lift_predicate(pred, t, t_H).evaluate(traj) ==
            doctest::Approx(pred.evaluate(sig.state(t))).epsilon(1e-12));
      if (t + 1 < t_H) {
        Eigen::VectorXd mid = 0.5 * (sig.state(t) + sig.state(t + 1));
        CHECK(midpoint_constraint(pred, t, t_H).evaluate(traj) ==
              doctest::Approx(pred.evaluate(mid)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("constant trajectory midpoint equals the state value") {
    Eigen::VectorXd traj(4);
    traj << 2.5, -1.0, 2.5, -1.0;
    LinearPredicate pred{vec2(3, -2), 0.25};
    CHECK(midpoint_constraint(pred, 0, 2).evaluate(traj) ==
          doctest::Approx(pred.evaluate(vec2(2.5, -1.0))).epsilon(1e-12));
  }
  SUBCASE("segment crossing an obstacle between samples") {
    // Endpoints sit just outside the box on opposite sides; the segment
    // midpoint is inside, so every midpoint-lifted obstacle face is
    // satisfied while neither endpoint is inside the obstacle.
    Polytope obstacle = box2(0, 1, 0, 1);
    double eps = 1e-3;
    Eigen::VectorXd traj(4);
    traj << -eps, 0.5, 1 + eps, 0.5;
    StackedSignal sig{traj, 2};
    CHECK(!obstacle.contains(sig.state(0)));
    CHECK(!obstacle.contains(sig.state(1)));
    for (const Halfspace& face : obstacle.faces) {
      CHECK(midpoint_constraint(LinearPredicate{face.a, face.b}, 0, 2).evaluate(traj) > 0.0);
    }
  }
}

TEST_CASE("reach-avoid construction counts") {
  Polytope init = box2(-1, 1, -1, 1);
  Polytope obstacle = box2(2, 3, 0, 1);
  GoalSpec goal{box2(4, 5, 0, 1), 4, 4};

  SUBCASE("one obstacle, one goal, single-step window") {
    ReachAvoidDomains doms = build_reach_avoid_domains(init, {obstacle}, {goal}, 5, false);
    CHECK(doms.type_a.members.size() == 5);  // hit times 0..4, one reach time
    CHECK(doms.type_b.members.size() == 4);  // one violated goal face at step 4
    for (const Polytope& m : doms.type_a.members) {
      CHECK(m.faces.size() == init.faces.size() + obstacle.faces.size() + goal.region.faces.size());
    }
    for (const Polytope& m : doms.type_b.members) {
      CHECK(m.faces.size() == init.faces.size() + 1);
    }
  }
  SUBCASE("midpoints add hit positions between steps") {
    ReachAvoidDomains doms = build_reach_avoid_domains(init, {obstacle}, {goal}, 5, true);
    CHECK(doms.type_a.members.size() == 9);  // 5 step hits + 4 midpoint hits
    CHECK(doms.type_b.members.size() == 4);
  }
  SUBCASE("window width multiplies reach-time and face choices") {
    GoalSpec wide{box2(4, 5, 0, 1), 2, 4};
    ReachAvoidDomains doms = build_reach_avoid_domains(init, {obstacle}, {wide}, 5, false);
    CHECK(doms.type_a.members.size() == 15);  // 5 hit times x 3 reach times
    CHECK(doms.type_b.members.size() == 64);  // one violated face per window step: 4^3
    for (const Polytope& m : doms.type_b.members) {
      CHECK(m.faces.size() == init.faces.size() + 3);
    }
  }
  SUBCASE("zero obstacles leave the hit union empty") {
    ReachAvoidDomains doms = build_reach_avoid_domains(init, {}, {goal}, 5, false);
    CHECK(doms.type_a.members.empty());
    CHECK(doms.type_b.members.size() == 4);
  }
  SUBCASE("enumeration cap rejects the failure unions") {
    CHECK_THROWS_AS(build_reach_avoid_domains(init, {obstacle}, {goal}, 5, false, 3), ConfigError);
  }
  SUBCASE("satisfaction domain delegates when too large") {
    GoalSpec near{box2(4, 5, 0, 1), 1, 1};
    ReachAvoidDomains small = build_reach_avoid_domains(init, {obstacle}, {near}, 2, false);
    REQUIRE(small.satisfaction.has_value());
    // 4 obstacle faces over 2 steps: 16 complement choices x 1 reach time.
    CHECK(small.satisfaction->members.size() == 16);
    for (const Polytope& m : small.satisfaction->members) {
      CHECK(m.faces.size() == init.faces.size() + 2 + near.region.faces.size());
    }
    ReachAvoidDomains big = build_reach_avoid_domains(init, {obstacle}, {goal}, 5, false, 600);
    CHECK(!big.satisfaction.has_value());
    CHECK(big.type_a.members.size() == 5);
  }
  SUBCASE("goal window must fit the horizon") {
    GoalSpec late{box2(4, 5, 0, 1), 5, 5};
    CHECK_THROWS_AS(build_reach_avoid_domains(init, {obstacle}, {late}, 5, false), ConfigError);
  }
}

TEST_CASE("reach-avoid membership matches the formula semantics") {
  Polytope init = box2(-6, 6, -6, 6);
  Polytope obstacle = box2(-1, 1, -1, 1);
  std::vector<GoalSpec> goals{{box2(1.5, 3.5, -2, 2), 2, 4}};
  const int t_H = 5;

  ReachAvoidDomains doms = build_reach_avoid_domains(init, {obstacle}, goals, t_H, false);
  StlFormula task = build_reach_avoid_formula(init, {obstacle}, goals, t_H);
  CHECK(horizon(task) == t_H);
  UnionOfPolytopes failure = failure_union(doms);
  REQUIRE(doms.satisfaction.has_value());

  std::mt19937_64 rng(74u);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  int fail_hits = 0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd traj(2 * t_H);
    for (int i = 0; i < traj.size(); ++i) traj(i) = unif(rng);
    StackedSignal sig{traj, 2};
    bool violated = robustness(task, sig, 0) < 0.0;
    // Failure union semantics: satisfied-init trajectories that either hit
    // the obstacle while reaching the goal on time, or miss the goal.
    bool in_failure = failure.contains(traj) && init.contains(sig.state(0));
    bool in_satisfaction = doms.satisfaction->contains(traj);
    CHECK(in_failure == (violated && init.contains(sig.state(0))));
    CHECK(in_satisfaction == !violated);
    if (in_failure) ++fail_hits;
  }
  CHECK(fail_hits > 100);  // the draw box must exercise both outcomes
}
