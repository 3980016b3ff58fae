#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "probstl/mixture_model.hpp"
#include "probstl/rng.hpp"
#include "probstl/stl.hpp"

namespace probstl {

struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // zero matrix = deterministic
};

// Additive noise on one channel.  Sequences of size 1 are constant over
// time; otherwise one entry per step.  When `mixture` is set it overrides
// the plain Gaussian description.
struct NoiseSpec {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  std::shared_ptr<const MixtureNoiseModel> mixture;

  static NoiseSpec zero(int dim);
  static NoiseSpec constant(Eigen::VectorXd mu, Eigen::MatrixXd sigma);
  static NoiseSpec from_mixture(std::shared_ptr<const MixtureNoiseModel> model);

  bool is_mixture() const { return mixture != nullptr; }
  const Eigen::VectorXd& mean_at(int t) const;  // throws for mixture specs
  const Eigen::MatrixXd& cov_at(int t) const;
  int dim() const;
};

// u_t = r_t - K_t y_t with y_t = C_t x_t + v_t.
struct DirectFeedback {
  std::vector<Eigen::MatrixXd> K;  // m x q
};

// u_t = r_t - K_t xhat_t; observer xhat_{t+1} = A xhat + B u + L (y - C xhat).
struct ObserverFeedback {
  std::vector<Eigen::MatrixXd> K;  // m x n
  std::vector<Eigen::MatrixXd> L;  // n x q
  Eigen::VectorXd xhat0;
};

// Closed-loop linear time-varying system.  All matrix sequences broadcast
// from size 1; otherwise they must cover every step used.
struct LtvSystem {
  int n = 0, m = 0, q = 0;
  std::vector<Eigen::MatrixXd> A, B, C;
  std::variant<DirectFeedback, ObserverFeedback> feedback;
  std::vector<Eigen::VectorXd> r;
  double dt = 1.0;
  GaussianSpec x0;
  NoiseSpec v, w;

  const Eigen::MatrixXd& A_at(int t) const;
  const Eigen::MatrixXd& B_at(int t) const;
  const Eigen::MatrixXd& C_at(int t) const;
  const Eigen::VectorXd& r_at(int t) const;
  void validate(int t_H) const;
};

// Exact Gaussian over the stacked state trajectory.  `cov` is the pure
// pushforward (symmetrized, no ridge); the stored factor is computed from
// the ridged copy so sampling always works.
class TrajectoryGaussian {
 public:
  TrajectoryGaussian() = default;
  TrajectoryGaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov, int state_dim);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  int state_dim() const { return state_dim_; }
  int steps() const { return steps_; }
  int dim() const { return static_cast<int>(mean_.size()); }

  Eigen::VectorXd sample_vector(RandomSource& rng) const;
  StackedSignal sample(RandomSource& rng) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd factor_;  // lower-triangular-like, factor * factor' = cov + ridge
  int state_dim_ = 0;
  int steps_ = 0;
};

TrajectoryGaussian build_trajectory_gaussian(const LtvSystem& sys, int t_H);

struct NoiseDraws {
  Eigen::VectorXd x0;
  std::vector<Eigen::VectorXd> v, w;
};

// Measurement map replacing C_t x (noise still added on top).
using MeasurementFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

StackedSignal simulate_closed_loop(const LtvSystem& sys, int t_H, const NoiseDraws& draws,
                                   const MeasurementFn& measure = nullptr);

// Precomputed sampling factors for x0 and both noise channels; build once,
// draw many.  Draw order: x0 normals, then the v channel (mode sequence
// first when it is a mixture), then the w channel.
class NoisePlan {
 public:
  NoisePlan(const LtvSystem& sys, int t_H);
  NoiseDraws draw(RandomSource& rng) const;
  int steps() const { return t_H_; }

 private:
  struct Channel {
    std::vector<Eigen::VectorXd> means;    // per component when mixture, else per step
    std::vector<Eigen::MatrixXd> factors;
    std::shared_ptr<const MixtureNoiseModel> mixture;
  };
  Channel plan_channel(const NoiseSpec& spec) const;

  int t_H_ = 0;
  Eigen::VectorXd x0_mean_;
  Eigen::MatrixXd x0_factor_;
  Channel v_, w_;
};

Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R_cost);

// q x n measurement Jacobian evaluated at an expected state.
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LinearizationResult {
  std::vector<Eigen::MatrixXd> C;
  std::vector<Eigen::VectorXd> expected_state;
};

// Alternates Jacobian evaluation with the expected-state recursion
// E[x_{t+1}] = (A - B K C_t) E[x_t] + B r + E[w] - B K E[v].
LinearizationResult propagate_expected_state(const LtvSystem& sys, const JacobianFn& jacobian,
                                             int t_H);

// Range measurement to the origin in the first two state coordinates.
Eigen::VectorXd distance_xy_measurement(const Eigen::VectorXd& x);
Eigen::MatrixXd distance_xy_jacobian(const Eigen::VectorXd& x);

TrajectoryGaussian fit_gaussian(const std::vector<StackedSignal>& trajectories, double ridge);

}  // namespace probstl
