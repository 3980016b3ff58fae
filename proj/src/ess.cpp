#include "probstl/ess.hpp"

#include <cmath>
#include <utility>

#include "probstl/errors.hpp"

namespace probstl {

namespace {

// Theorem-1 candidate construction: each predicate lifted at each step,
// intersected with the ellipse at +level and -level, then one robustness
// probe per elementary arc.  Probe values reuse the per-(predicate, step)
// trig coefficients, so a probe costs one formula evaluation.
EllipseArcs stl_arcs(const StlFormula& formula, double level, const Eigen::VectorXd& mean,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const int sd = formula.state_dim();
  if (sd <= 0) throw ConfigError("formula has no state variables");
  if (mean.size() == 0 || mean.size() % sd != 0) {
    throw ConfigError("trajectory dimension is not a multiple of the state dimension");
  }
  if (u.size() != mean.size() || v.size() != mean.size()) {
    throw ConfigError("ellipse axes must match the trajectory dimension");
  }
  const int steps = static_cast<int>(mean.size()) / sd;
  const int H = horizon(formula);
  if (steps < H) throw ConfigError("trajectory shorter than the formula horizon");

  const std::vector<LinearPredicate> preds = collect_predicates(formula);
  const int N = static_cast<int>(preds.size());
  Eigen::MatrixXd ca(N, H), cb(N, H), cc(N, H);
  std::vector<double> candidates;
  candidates.reserve(static_cast<size_t>(4) * N * H);
  for (int i = 0; i < N; ++i) {
    if (preds[i].a.size() != sd) throw ConfigError("predicate dimension mismatch");
    for (int t = 0; t < H; ++t) {
      Halfspace face = lift_predicate(preds[i], t, steps);
      ca(i, t) = face.a.dot(u);
      cb(i, t) = face.a.dot(v);
      cc(i, t) = face.a.dot(mean) + face.b;
      for (double s : {-level, level}) {
        EllipseRoots roots = ellipse_halfspace_roots(mean, u, v, face, s);
        for (int j = 0; j < roots.count; ++j) candidates.push_back(roots.angles[j]);
      }
    }
  }

  auto active_at = [&](double theta) {
    const double ct = std::cos(theta), st = std::sin(theta);
    double rho = robustness_from_values(
        formula, [&](int p, int t) { return cc(p, t) + ca(p, t) * ct + cb(p, t) * st; }, 0);
    return rho >= level;
  };
  return arcs_from_candidates(std::move(candidates), active_at);
}

}  // namespace

DomainOracle::DomainOracle(PolytopeDomain d) : domain_(std::move(d)) {}
DomainOracle::DomainOracle(StlDomain d) : domain_(std::move(d)) {}

bool DomainOracle::membership(const StackedSignal& x) const { return score(x) >= cutoff(); }

double DomainOracle::score(const StackedSignal& x) const {
  if (const auto* p = std::get_if<PolytopeDomain>(&domain_)) return p->region.margin(x.data);
  const auto& s = std::get<StlDomain>(domain_);
  return robustness(s.formula, x, 0);
}

double DomainOracle::cutoff() const {
  if (const auto* p = std::get_if<PolytopeDomain>(&domain_)) return -p->shift;
  return std::get<StlDomain>(domain_).level;
}

DomainOracle DomainOracle::with_cutoff(double rho) const {
  DomainOracle out = *this;
  if (auto* p = std::get_if<PolytopeDomain>(&out.domain_)) {
    p->shift = -rho;
  } else {
    std::get<StlDomain>(out.domain_).level = rho;
  }
  return out;
}

EllipseArcs DomainOracle::active_arcs(const Eigen::VectorXd& mean, const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& v) const {
  if (const auto* p = std::get_if<PolytopeDomain>(&domain_)) {
    return active_arcs_union(mean, u, v, p->region, p->shift);
  }
  const auto& s = std::get<StlDomain>(domain_);
  return stl_arcs(s.formula, s.level, mean, u, v);
}

StackedSignal ess_step(const StackedSignal& current, const TrajectoryGaussian& gaussian,
                       const DomainOracle& oracle, RandomSource& rng) {
  if (current.data.size() != gaussian.dim() || current.state_dim != gaussian.state_dim()) {
    throw ConfigError("slice point does not match the Gaussian's shape");
  }
  if (!oracle.membership(current)) throw EstimationError("slice point is outside the domain");

  Eigen::VectorXd nu = gaussian.sample_vector(rng);
  if ((nu.array() == current.data.array()).all()) {
    nu = gaussian.sample_vector(rng);  // degenerate ellipse; retried once
  }
  const Eigen::VectorXd& mean = gaussian.mean();
  Eigen::VectorXd u = current.data - mean;
  Eigen::VectorXd v = nu - mean;
  EllipseArcs arcs = oracle.active_arcs(mean, u, v);
  double theta = arcs.sample(rng.uniform01());
  return StackedSignal(mean + std::cos(theta) * u + std::sin(theta) * v, current.state_dim);
}

EllipseArcs stl_active_arcs(const StackedSignal& current, const StackedSignal& free,
                            const TrajectoryGaussian& gaussian, const StlFormula& formula,
                            double level) {
  if (current.data.size() != gaussian.dim() || free.data.size() != gaussian.dim()) {
    throw ConfigError("slice point does not match the Gaussian's shape");
  }
  if (robustness(formula, current, 0) < level) {
    throw EstimationError("slice point is outside the level set");
  }
  return stl_arcs(formula, level, gaussian.mean(), current.data - gaussian.mean(),
                  free.data - gaussian.mean());
}

std::vector<StackedSignal> sample_chain(const StackedSignal& start, int count,
                                        const TrajectoryGaussian& gaussian,
                                        const DomainOracle& oracle, const ChainConfig& config) {
  if (config.n_d < 1) throw ConfigError("thinning factor must be at least 1");
  if (count < 0) throw ConfigError("sample count must be nonnegative");
  Mt19937Source rng(config.seed);
  std::vector<StackedSignal> out;
  out.reserve(count);
  StackedSignal state = start;
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < config.n_d; ++j) state = ess_step(state, gaussian, oracle, rng);
    out.push_back(state);
  }
  return out;
}

}  // namespace probstl
