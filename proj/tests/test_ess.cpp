#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "probstl/errors.hpp"
#include "probstl/ess.hpp"
#include "support.hpp"

using namespace probstl;
using namespace testsupport;

namespace {

// Counts interface calls so control flow can be pinned down exactly.
struct CountingSource final : RandomSource {
  Mt19937Source inner;
  long uniforms = 0;
  long normals = 0;
  explicit CountingSource(std::uint64_t s) : inner(s) {}
  double uniform01() override {
    ++uniforms;
    return inner.uniform01();
  }
  double normal01() override {
    ++normals;
    return inner.normal01();
  }
};

// Replays queued values; throws when the queue runs dry.
struct RiggedSource final : RandomSource {
  std::vector<double> u01s, norms;
  size_t ui = 0, ni = 0;
  double uniform01() override { return u01s.at(ui++); }
  double normal01() override { return norms.at(ni++); }
};

UnionOfPolytopes whole_space(int dim) {
  // A single vacuous face: 0'x + 1 >= 0 holds everywhere.
  UnionOfPolytopes u;
  u.members.push_back(Polytope{{Halfspace{Eigen::VectorXd::Zero(dim), 1.0}}});
  return u;
}

UnionOfPolytopes half_space_x1() {
  Eigen::VectorXd a(2);
  a << 1.0, 0.0;
  UnionOfPolytopes u;
  u.members.push_back(Polytope{{Halfspace{a, 0.0}}});
  return u;
}

UnionOfPolytopes box2(double x_lo, double x_hi, double y_lo, double y_hi) {
  Eigen::VectorXd ex(2), ey(2);
  ex << 1, 0;
  ey << 0, 1;
  UnionOfPolytopes u;
  u.members.push_back(Polytope{{Halfspace{ex, -x_lo},
                                Halfspace{-ex, x_hi},
                                Halfspace{ey, -y_lo},
                                Halfspace{-ey, y_hi}}});
  return u;
}

TrajectoryGaussian standard_gaussian(int dim, int state_dim) {
  return TrajectoryGaussian(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim),
                            state_dim);
}

// Batch-means standard error of a chain average: honest about correlation.
double batch_se(const std::vector<double>& series, int batches) {
  const int per = static_cast<int>(series.size()) / batches;
  double grand = 0.0;
  std::vector<double> bm(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    for (int i = 0; i < per; ++i) bm[b] += series[b * per + i];
    bm[b] /= per;
    grand += bm[b];
  }
  grand /= batches;
  double var = 0.0;
  for (int b = 0; b < batches; ++b) var += (bm[b] - grand) * (bm[b] - grand);
  var /= (batches - 1);
  return std::sqrt(var / batches);
}

double chain_mean(const std::vector<double>& series) {
  double s = 0.0;
  for (double v : series) s += v;
  return s / series.size();
}

}  // namespace

TEST_CASE("unconstrained chain reproduces the prior") {
  Eigen::VectorXd mu(2);
  mu << 1.0, -2.0;
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.5, 0.5, 1.0;
  TrajectoryGaussian g(mu, cov, 2);
  DomainOracle oracle(PolytopeDomain{whole_space(2), 0.0});
  ChainConfig cfg;
  cfg.n_d = 4;
  cfg.seed = 515151;
  const int count = 100000;
  auto samples = sample_chain(StackedSignal(mu, 2), count, g, oracle, cfg);
  REQUIRE(samples.size() == static_cast<size_t>(count));

  // First and second moments, each against its own batch-means 3 sigma.
  std::vector<double> m0(count), m1(count), s00(count), s01(count), s11(count);
  for (int i = 0; i < count; ++i) {
    double x = samples[i].data(0), y = samples[i].data(1);
    m0[i] = x;
    m1[i] = y;
    s00[i] = x * x;
    s01[i] = x * y;
    s11[i] = y * y;
  }
  const int B = 250;
  CHECK(std::abs(chain_mean(m0) - mu(0)) < 3 * batch_se(m0, B));
  CHECK(std::abs(chain_mean(m1) - mu(1)) < 3 * batch_se(m1, B));
  CHECK(std::abs(chain_mean(s00) - (cov(0, 0) + mu(0) * mu(0))) < 3 * batch_se(s00, B));
  CHECK(std::abs(chain_mean(s01) - (cov(0, 1) + mu(0) * mu(1))) < 3 * batch_se(s01, B));
  CHECK(std::abs(chain_mean(s11) - (cov(1, 1) + mu(1) * mu(1))) < 3 * batch_se(s11, B));
  for (int i = 0; i < count; i += 997) CHECK(oracle.membership(samples[i]));
}

TEST_CASE("half-space chain matches the half-normal mean") {
  TrajectoryGaussian g = standard_gaussian(2, 2);
  DomainOracle oracle(PolytopeDomain{half_space_x1(), 0.0});
  Eigen::VectorXd start(2);
  start << 0.5, 0.0;
  ChainConfig cfg;
  cfg.n_d = 4;
  cfg.seed = 626262;
  const int count = 100000;
  auto samples = sample_chain(StackedSignal(start, 2), count, g, oracle, cfg);

  std::vector<double> x1(count);
  for (int i = 0; i < count; ++i) {
    x1[i] = samples[i].data(0);
    if (i % 23 == 0) CHECK(oracle.membership(samples[i]));
  }
  const double want = std::sqrt(2.0 / M_PI);
  CHECK(std::abs(chain_mean(x1) - want) < 3 * batch_se(x1, 250));

  // Thinned lag 1 equals chain lag n_d = 4.
  double m = chain_mean(x1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i + 1 < count; ++i) num += (x1[i] - m) * (x1[i + 1] - m);
  for (int i = 0; i < count; ++i) den += (x1[i] - m) * (x1[i] - m);
  CHECK(num / den < 0.2);
}

TEST_CASE("theta zero maps back to the slice point") {
  TrajectoryGaussian g = standard_gaussian(2, 2);
  DomainOracle oracle(PolytopeDomain{half_space_x1(), 0.0});
  Eigen::VectorXd cur(2);
  cur << 0.0, 1.0;  // exactly on the boundary, still a member

  RiggedSource rig;
  rig.norms = {1.0, 0.0};  // auxiliary point on the positive x1 axis
  rig.u01s = {0.0};        // theta* lands on the active arc endpoint at 0
  StackedSignal out = ess_step(StackedSignal(cur, 2), g, oracle, rig);
  CHECK(out.data(0) == 0.0);
  CHECK(out.data(1) == 1.0);
  CHECK(oracle.membership(out));
}

TEST_CASE("single-predicate level set equals the polytope arcs") {
  Eigen::VectorXd a(2);
  a << 0.7, -0.3;
  LinearPredicate pred{a, 0.4};
  StlFormula formula = StlFormula::predicate(pred);
  UnionOfPolytopes hs;
  hs.members.push_back(Polytope{{Halfspace{a, 0.4}}});

  Eigen::VectorXd mu(2);
  mu << 1.0, 0.5;
  Eigen::MatrixXd cov(2, 2);
  cov << 1.2, -0.3, -0.3, 0.8;
  TrajectoryGaussian g(mu, cov, 2);
  Mt19937Source rng(888);
  int done = 0;
  while (done < 20) {
    StackedSignal cur = g.sample(rng);
    if (robustness(formula, cur, 0) < 0.0) continue;
    StackedSignal free = g.sample(rng);
    EllipseArcs from_stl = stl_active_arcs(cur, free, g, formula, 0.0);
    EllipseArcs from_poly =
        active_arcs_union(g.mean(), cur.data - g.mean(), free.data - g.mean(), hs, 0.0);
    REQUIRE(from_stl.intervals.size() == from_poly.intervals.size());
    for (size_t i = 0; i < from_stl.intervals.size(); ++i) {
      CHECK(std::abs(from_stl.intervals[i].first - from_poly.intervals[i].first) <= 1e-9);
      CHECK(std::abs(from_stl.intervals[i].second - from_poly.intervals[i].second) <= 1e-9);
    }
    CHECK(std::abs(from_stl.measure - from_poly.measure) <= 1e-9);
    ++done;
  }
}

TEST_CASE("slice point's arc stays active for the two-clause benchmark") {
  StlFormula f = benchmark_formula();
  REQUIRE(horizon(f) == 21);
  StackedSignal cur = benchmark_signal(21);
  CHECK(robustness(f, cur, 0) == doctest::Approx(3.0));
  TrajectoryGaussian g = standard_gaussian(42, 2);
  Mt19937Source rng(999);
  for (int trial = 0; trial < 5; ++trial) {
    StackedSignal free = g.sample(rng);
    EllipseArcs arcs = stl_active_arcs(cur, free, g, f, 0.0);
    CHECK(arcs.contains(0.0));
  }
}

TEST_CASE("dense sweep agrees with the arc classification") {
  std::mt19937_64 formula_rng(24680);
  Mt19937Source rng(13579);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int trials = 0;
  while (trials < 30) {
    StlFormula f = random_formula(formula_rng, 2, 2);
    if (horizon(f) > 4 || collect_predicates(f).size() > 3) continue;
    const int steps = horizon(f);
    const int dim = 2 * steps;
    Eigen::MatrixXd M(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) M(i, j) = gauss(formula_rng);
    Eigen::MatrixXd cov = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd mu(dim);
    for (int i = 0; i < dim; ++i) mu(i) = gauss(formula_rng);
    TrajectoryGaussian g(mu, cov, 2);

    StackedSignal cur = g.sample(rng);
    StackedSignal free = g.sample(rng);
    double level = robustness(f, cur, 0) - 0.4;
    EllipseArcs arcs = stl_active_arcs(cur, free, g, f, level);

    Eigen::VectorXd u = cur.data - g.mean();
    Eigen::VectorXd v = free.data - g.mean();
    int mismatches = 0;
    const int sweep = 10000;
    for (int k = 0; k < sweep; ++k) {
      double theta = 2.0 * M_PI * k / sweep;
      Eigen::VectorXd x = g.mean() + std::cos(theta) * u + std::sin(theta) * v;
      bool direct = robustness(f, StackedSignal(x, 2), 0) >= level;
      if (direct != arcs.contains(theta)) ++mismatches;
    }
    CHECK(mismatches == 0);
    ++trials;
  }
}

TEST_CASE("chain bookkeeping") {
  TrajectoryGaussian g = standard_gaussian(2, 2);
  DomainOracle oracle(PolytopeDomain{half_space_x1(), 0.0});
  Eigen::VectorXd start(2);
  start << 0.5, 0.0;
  StackedSignal s0(start, 2);

  SUBCASE("count zero gives an empty list") {
    ChainConfig cfg;
    cfg.seed = 4321;
    CHECK(sample_chain(s0, 0, g, oracle, cfg).empty());
  }
  SUBCASE("no thinning returns every step") {
    ChainConfig cfg;
    cfg.n_d = 1;
    cfg.seed = 4321;
    auto chain = sample_chain(s0, 6, g, oracle, cfg);
    REQUIRE(chain.size() == 6);
    Mt19937Source rng(4321);
    StackedSignal manual = s0;
    for (int i = 0; i < 6; ++i) {
      manual = ess_step(manual, g, oracle, rng);
      CHECK((chain[i].data.array() == manual.data.array()).all());
    }
  }
  SUBCASE("invalid config is rejected") {
    ChainConfig cfg;
    cfg.n_d = 0;
    CHECK_THROWS_AS(sample_chain(s0, 3, g, oracle, cfg), ConfigError);
    cfg.n_d = 4;
    CHECK_THROWS_AS(sample_chain(s0, -1, g, oracle, cfg), ConfigError);
  }
  SUBCASE("a start outside the domain is a hard error") {
    Eigen::VectorXd bad(2);
    bad << -0.5, 0.0;
    ChainConfig cfg;
    CHECK_THROWS_AS(sample_chain(StackedSignal(bad, 2), 1, g, oracle, cfg), EstimationError);
  }
}

TEST_CASE("closure over mixed domains") {
  Mt19937Source rng(31313);

  SUBCASE("shifted half-space") {
    TrajectoryGaussian g = standard_gaussian(2, 2);
    DomainOracle oracle(PolytopeDomain{half_space_x1(), 0.25});
    StackedSignal s(Eigen::VectorXd::Zero(2), 2);
    for (int i = 0; i < 60000; ++i) {
      s = ess_step(s, g, oracle, rng);
      if (!oracle.membership(s)) {
        FAIL_CHECK("left the domain at step " << i);
        break;
      }
    }
    CHECK(oracle.membership(s));
  }
  SUBCASE("union of two boxes") {
    UnionOfPolytopes u = box2(-3.0, -1.0, -1.0, 1.0);
    UnionOfPolytopes right = box2(1.0, 3.0, -1.0, 1.0);
    u.members.push_back(right.members.front());
    TrajectoryGaussian g = standard_gaussian(2, 2);
    DomainOracle oracle(PolytopeDomain{u, 0.0});
    Eigen::VectorXd start(2);
    start << -2.0, 0.0;
    StackedSignal s(start, 2);
    int right_visits = 0;
    for (int i = 0; i < 30000; ++i) {
      s = ess_step(s, g, oracle, rng);
      if (!oracle.membership(s)) {
        FAIL_CHECK("left the union at step " << i);
        break;
      }
      if (s.data(0) > 0.0) ++right_visits;
    }
    CHECK(right_visits > 0);  // the sampler hops between modes
  }
  SUBCASE("benchmark level set") {
    StlFormula f = benchmark_formula();
    TrajectoryGaussian g = standard_gaussian(42, 2);
    DomainOracle oracle(StlDomain{f, 0.0});
    StackedSignal s = benchmark_signal(21);
    for (int i = 0; i < 10000; ++i) {
      s = ess_step(s, g, oracle, rng);
      if (!oracle.membership(s)) {
        FAIL_CHECK("left the level set at step " << i);
        break;
      }
    }
    CHECK(robustness(f, s, 0) >= 0.0);
  }
}

TEST_CASE("each step draws exactly one angle and one auxiliary point") {
  SUBCASE("polytope oracle") {
    TrajectoryGaussian g = standard_gaussian(2, 2);
    DomainOracle oracle(PolytopeDomain{half_space_x1(), 0.0});
    Eigen::VectorXd start(2);
    start << 0.5, 0.0;
    StackedSignal s(start, 2);
    CountingSource src(717);
    const int steps = 1000;
    for (int i = 0; i < steps; ++i) s = ess_step(s, g, oracle, src);
    CHECK(src.uniforms == steps);
    CHECK(src.normals == 2 * steps);
  }
  SUBCASE("score-guided oracle") {
    Eigen::VectorXd a(2);
    a << 1.0, 1.0;
    StlFormula f = StlFormula::predicate({a, 0.5});
    TrajectoryGaussian g = standard_gaussian(2, 2);
    DomainOracle oracle(StlDomain{f, 0.0});
    Eigen::VectorXd start(2);
    start << 1.0, 1.0;
    StackedSignal s(start, 2);
    CountingSource src(727);
    const int steps = 200;
    for (int i = 0; i < steps; ++i) s = ess_step(s, g, oracle, src);
    CHECK(src.uniforms == steps);
    CHECK(src.normals == 2 * steps);
  }
}

TEST_CASE("score-guided and polytope paths produce identical chains") {
  // Conjunction-only formula pinned to a single step; its level set at 0 is
  // exactly the lifted polytope.
  std::mt19937_64 mk(222);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector2d anchor(0.3, -0.2);
  std::vector<LinearPredicate> preds;
  Polytope member;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd a(2);
    a << gauss(mk), gauss(mk);
    double b = 0.5 - a.dot(anchor);
    preds.push_back({a, b});
    member.faces.push_back(lift_predicate(preds.back(), 1, 2));
  }
  StlFormula conj = StlFormula::conjunction(
      StlFormula::predicate(preds[0]),
      StlFormula::conjunction(StlFormula::predicate(preds[1]), StlFormula::predicate(preds[2])));
  StlFormula f = StlFormula::always(1, 1, conj);
  REQUIRE(horizon(f) == 2);

  Eigen::MatrixXd M(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) M(i, j) = gauss(mk);
  Eigen::MatrixXd cov = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd mu(4);
  for (int i = 0; i < 4; ++i) mu(i) = gauss(mk);
  TrajectoryGaussian g(mu, cov, 2);

  Eigen::VectorXd start(4);
  start << 0.1, 0.2, anchor(0), anchor(1);
  StackedSignal s0(start, 2);
  UnionOfPolytopes u;
  u.members.push_back(member);
  DomainOracle poly(PolytopeDomain{u, 0.0});
  DomainOracle stl(StlDomain{f, 0.0});
  REQUIRE(poly.membership(s0));
  REQUIRE(stl.membership(s0));

  ChainConfig cfg;
  cfg.n_d = 4;
  cfg.seed = 987654;
  auto from_poly = sample_chain(s0, 40, g, poly, cfg);
  auto from_stl = sample_chain(s0, 40, g, stl, cfg);
  REQUIRE(from_poly.size() == from_stl.size());
  for (size_t i = 0; i < from_poly.size(); ++i) {
    CHECK((from_poly[i].data.array() == from_stl[i].data.array()).all());
  }
}

TEST_CASE("oracle cutoffs move with the score") {
  SUBCASE("polytope margin") {
    DomainOracle oracle(PolytopeDomain{half_space_x1(), 0.0});
    Eigen::VectorXd x(2);
    x << -0.5, 0.0;
    StackedSignal s(x, 2);
    CHECK(oracle.score(s) == -0.5);
    CHECK(oracle.cutoff() == 0.0);
    CHECK_FALSE(oracle.membership(s));
    DomainOracle wide = oracle.with_cutoff(-0.7);
    CHECK(wide.cutoff() == -0.7);
    CHECK(wide.membership(s));
  }
  SUBCASE("robustness level") {
    StlFormula f = benchmark_formula();
    StackedSignal s = benchmark_signal(21);
    DomainOracle oracle(StlDomain{f, 0.0});
    CHECK(oracle.score(s) == doctest::Approx(3.0));
    CHECK(oracle.with_cutoff(3.0).membership(s));       // ties satisfy
    CHECK_FALSE(oracle.with_cutoff(3.0001).membership(s));
  }
}
