#include "probstl/mixture_model.hpp"

#include <cmath>

#include "probstl/errors.hpp"

namespace probstl {

namespace {

int categorical(const Eigen::VectorXd& weights, double u01) {
  double cum = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    cum += weights(i);
    if (u01 < cum) return i;
  }
  return static_cast<int>(weights.size()) - 1;  // u01 at the top of the range
}

void check_distribution(const Eigen::VectorXd& pi, int M, double tol, const char* what) {
  if (pi.size() != M) throw ConfigError(std::string(what) + ": wrong number of weights");
  for (int i = 0; i < pi.size(); ++i) {
    if (pi(i) < -1e-12) throw ConfigError(std::string(what) + ": negative weight");
  }
  if (std::abs(pi.sum() - 1.0) > tol) {
    throw ConfigError(std::string(what) + ": weights do not sum to 1");
  }
}

}  // namespace

int MixtureNoiseModel::dim() const {
  return components.empty() ? 0 : static_cast<int>(components.front().mu.size());
}

void MixtureNoiseModel::validate() const {
  if (components.empty()) throw ConfigError("mixture model needs at least one component");
  const int d = dim();
  for (const MixtureComponent& c : components) {
    if (c.mu.size() != d || c.sigma.rows() != d || c.sigma.cols() != d) {
      throw ConfigError("mixture component dimensions disagree");
    }
    double scale = c.sigma.lpNorm<Eigen::Infinity>() + 1.0;
    if ((c.sigma - c.sigma.transpose()).lpNorm<Eigen::Infinity>() > 1e-9 * scale) {
      throw ConfigError("mixture component covariance not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.sigma);
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
      throw ConfigError("mixture component covariance not positive semidefinite");
    }
  }
  const int M = mode_count();
  if (const auto* s = std::get_if<StaticWeights>(&weights)) {
    check_distribution(s->pi, M, 1e-12, "static weights");
  } else if (const auto* m = std::get_if<MarkovWeights>(&weights)) {
    if (m->transition.rows() != M || m->transition.cols() != M) {
      throw ConfigError("markov transition matrix has the wrong shape");
    }
    for (int i = 0; i < M; ++i) {
      check_distribution(m->transition.row(i).transpose(), M, 1e-12, "markov transition row");
    }
    check_distribution(m->init, M, 1e-12, "markov initial distribution");
  } else if (!std::get<BlackBoxWeights>(weights)) {
    throw ConfigError("black-box weight callback is empty");
  }
}

ModeSequence sample_mode_sequence(const MixtureNoiseModel& model, int t_H, RandomSource& rng) {
  model.validate();
  if (t_H < 0) throw ConfigError("negative horizon");
  ModeSequence seq;
  seq.reserve(t_H);
  if (const auto* s = std::get_if<StaticWeights>(&model.weights)) {
    for (int t = 0; t < t_H; ++t) seq.push_back(categorical(s->pi, rng.uniform01()));
  } else if (const auto* m = std::get_if<MarkovWeights>(&model.weights)) {
    int state = 0;
    for (int t = 0; t < t_H; ++t) {
      const Eigen::VectorXd dist =
          t == 0 ? m->init : Eigen::VectorXd(m->transition.row(state).transpose());
      state = categorical(dist, rng.uniform01());
      seq.push_back(state);
    }
  } else {
    const auto& cb = std::get<BlackBoxWeights>(model.weights);
    for (int t = 0; t < t_H; ++t) {
      Eigen::VectorXd dist = cb(seq);
      check_distribution(dist, model.mode_count(), 1e-9, "black-box weights");
      seq.push_back(categorical(dist, rng.uniform01()));
    }
  }
  return seq;
}

}  // namespace probstl
