#include "probstl/system.hpp"

#include <cmath>
#include <string>

#include "probstl/errors.hpp"

namespace probstl {

namespace {

// Broadcast accessor: size-1 sequences are constant in time.
template <typename T>
const T& pick(const std::vector<T>& seq, int t, const char* what) {
  if (seq.empty()) throw ConfigError(std::string(what) + ": empty sequence");
  if (seq.size() == 1) return seq.front();
  if (t < 0 || t >= static_cast<int>(seq.size())) {
    throw ConfigError(std::string(what) + ": step out of range");
  }
  return seq[static_cast<size_t>(t)];
}

void check_seq_length(size_t size, int t_H, const char* what) {
  if (size != 1 && size < static_cast<size_t>(t_H)) {
    throw ConfigError(std::string(what) + ": sequence shorter than the horizon");
  }
}

// L with L L' ~= S for symmetric PSD S; eigenvalues clamped at zero.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& S, const char* what) {
  if (S.rows() != S.cols()) throw ConfigError(std::string(what) + ": covariance not square");
  if (S.isZero(0.0)) return Eigen::MatrixXd::Zero(S.rows(), S.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw ConfigError(std::string(what) + ": eigendecomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  double lam_max = std::max(lam.maxCoeff(), 0.0);
  if (lam.minCoeff() < -1e-9 * std::max(lam_max, 1.0)) {
    throw ConfigError(std::string(what) + ": covariance not positive semidefinite");
  }
  return es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct LoopMatrices {
  Eigen::MatrixXd F, W, V;
  Eigen::VectorXd g;
};

// One-step affine map of the augmented state: z_{t+1} = F z + g + W w + V v.
// Direct feedback augments nothing; observer feedback stacks [x; xhat].
LoopMatrices loop_matrices(const LtvSystem& sys, int t) {
  const Eigen::MatrixXd& A = sys.A_at(t);
  const Eigen::MatrixXd& B = sys.B_at(t);
  const Eigen::MatrixXd& C = sys.C_at(t);
  const Eigen::VectorXd& r = sys.r_at(t);
  const int n = sys.n;
  LoopMatrices out;
  if (const auto* direct = std::get_if<DirectFeedback>(&sys.feedback)) {
    const Eigen::MatrixXd& K = pick(direct->K, t, "feedback gain");
    out.F = A - B * K * C;
    out.g = B * r;
    out.W = Eigen::MatrixXd::Identity(n, n);
    out.V = -B * K;
  } else {
    const auto& ob = std::get<ObserverFeedback>(sys.feedback);
    const Eigen::MatrixXd& K = pick(ob.K, t, "feedback gain");
    const Eigen::MatrixXd& L = pick(ob.L, t, "observer gain");
    out.F.setZero(2 * n, 2 * n);
    out.F.topLeftCorner(n, n) = A;
    out.F.topRightCorner(n, n) = -B * K;
    out.F.bottomLeftCorner(n, n) = L * C;
    out.F.bottomRightCorner(n, n) = A - B * K - L * C;
    out.g.resize(2 * n);
    out.g.head(n) = B * r;
    out.g.tail(n) = B * r;
    out.W.setZero(2 * n, n);
    out.W.topLeftCorner(n, n).setIdentity();
    out.V.setZero(2 * n, sys.q);
    out.V.bottomRows(n) = L;
  }
  return out;
}

}  // namespace

NoiseSpec NoiseSpec::zero(int dim) {
  return constant(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim));
}

NoiseSpec NoiseSpec::constant(Eigen::VectorXd mu, Eigen::MatrixXd sigma) {
  NoiseSpec spec;
  spec.means.push_back(std::move(mu));
  spec.covs.push_back(std::move(sigma));
  return spec;
}

NoiseSpec NoiseSpec::from_mixture(std::shared_ptr<const MixtureNoiseModel> model) {
  NoiseSpec spec;
  spec.mixture = std::move(model);
  return spec;
}

const Eigen::VectorXd& NoiseSpec::mean_at(int t) const {
  if (is_mixture()) throw ConfigError("mixture noise has no single per-step mean");
  return pick(means, t, "noise mean");
}

const Eigen::MatrixXd& NoiseSpec::cov_at(int t) const {
  if (is_mixture()) throw ConfigError("mixture noise has no single per-step covariance");
  return pick(covs, t, "noise covariance");
}

int NoiseSpec::dim() const {
  if (is_mixture()) return mixture->dim();
  if (means.empty()) return 0;
  return static_cast<int>(means.front().size());
}

const Eigen::MatrixXd& LtvSystem::A_at(int t) const { return pick(A, t, "A"); }
const Eigen::MatrixXd& LtvSystem::B_at(int t) const { return pick(B, t, "B"); }
const Eigen::MatrixXd& LtvSystem::C_at(int t) const { return pick(C, t, "C"); }
const Eigen::VectorXd& LtvSystem::r_at(int t) const { return pick(r, t, "r"); }

void LtvSystem::validate(int t_H) const {
  if (n <= 0 || m <= 0 || q <= 0) throw ConfigError("system dimensions must be positive");
  if (t_H <= 0) throw ConfigError("horizon must be positive");
  if (!(dt > 0.0)) throw ConfigError("step size must be positive");

  check_seq_length(A.size(), t_H, "A");
  check_seq_length(B.size(), t_H, "B");
  check_seq_length(C.size(), t_H, "C");
  check_seq_length(r.size(), t_H, "r");
  for (const auto& M : A)
    if (M.rows() != n || M.cols() != n) throw ConfigError("A must be n x n");
  for (const auto& M : B)
    if (M.rows() != n || M.cols() != m) throw ConfigError("B must be n x m");
  for (const auto& M : C)
    if (M.rows() != q || M.cols() != n) throw ConfigError("C must be q x n");
  for (const auto& vec : r)
    if (vec.size() != m) throw ConfigError("r must have m entries");

  if (const auto* direct = std::get_if<DirectFeedback>(&feedback)) {
    check_seq_length(direct->K.size(), t_H, "feedback gain");
    for (const auto& M : direct->K)
      if (M.rows() != m || M.cols() != q) throw ConfigError("direct gain must be m x q");
  } else {
    const auto& ob = std::get<ObserverFeedback>(feedback);
    check_seq_length(ob.K.size(), t_H, "feedback gain");
    check_seq_length(ob.L.size(), t_H, "observer gain");
    for (const auto& M : ob.K)
      if (M.rows() != m || M.cols() != n) throw ConfigError("observer-state gain must be m x n");
    for (const auto& M : ob.L)
      if (M.rows() != n || M.cols() != q) throw ConfigError("observer gain must be n x q");
    if (ob.xhat0.size() != n) throw ConfigError("observer initial estimate must have n entries");
  }

  if (x0.mean.size() != n || x0.cov.rows() != n || x0.cov.cols() != n) {
    throw ConfigError("initial-state spec must be n-dimensional");
  }

  auto check_noise = [&](const NoiseSpec& spec, int want_dim, const char* what) {
    if (spec.is_mixture()) {
      spec.mixture->validate();
      if (spec.mixture->dim() != want_dim) {
        throw ConfigError(std::string(what) + ": mixture dimension mismatch");
      }
      return;
    }
    if (spec.means.size() != spec.covs.size()) {
      throw ConfigError(std::string(what) + ": mean and covariance counts differ");
    }
    check_seq_length(spec.means.size(), t_H, what);
    for (const auto& mu : spec.means)
      if (mu.size() != want_dim) throw ConfigError(std::string(what) + ": mean dimension mismatch");
    for (const auto& S : spec.covs)
      if (S.rows() != want_dim || S.cols() != want_dim)
        throw ConfigError(std::string(what) + ": covariance dimension mismatch");
  };
  check_noise(v, q, "measurement noise");
  check_noise(w, n, "process noise");
}

TrajectoryGaussian::TrajectoryGaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov, int state_dim) {
  if (state_dim <= 0) throw ConfigError("state dimension must be positive");
  if (mean.size() == 0 || mean.size() % state_dim != 0) {
    throw ConfigError("trajectory length must be a multiple of the state dimension");
  }
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ConfigError("trajectory covariance shape mismatch");
  }
  mean_ = std::move(mean);
  cov_ = 0.5 * (cov + cov.transpose());
  state_dim_ = state_dim;
  steps_ = static_cast<int>(mean_.size()) / state_dim;

  const int d = static_cast<int>(mean_.size());
  double ridge = 1e-12 * std::max(cov_.trace(), 0.0) / d;
  Eigen::MatrixXd ridged = cov_;
  ridged.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(ridged);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
  } else {
    factor_ = psd_factor(ridged, "trajectory covariance");
  }
}

Eigen::VectorXd TrajectoryGaussian::sample_vector(RandomSource& rng) const {
  return mean_ + factor_ * rng.normal_vector(dim());
}

StackedSignal TrajectoryGaussian::sample(RandomSource& rng) const {
  return StackedSignal(sample_vector(rng), state_dim_);
}

TrajectoryGaussian build_trajectory_gaussian(const LtvSystem& sys, int t_H) {
  sys.validate(t_H);
  if (sys.v.is_mixture() || sys.w.is_mixture()) {
    throw ConfigError("mixture noise: condition on a mode sequence first");
  }
  const int n = sys.n;
  const bool observer = std::holds_alternative<ObserverFeedback>(sys.feedback);
  const int p = observer ? 2 * n : n;

  std::vector<Eigen::VectorXd> mu(t_H);
  // cross[t][s] = Cov(z_s, z_t) for s <= t.
  std::vector<std::vector<Eigen::MatrixXd>> cross(t_H);
  mu[0].setZero(p);
  mu[0].head(n) = sys.x0.mean;
  if (observer) mu[0].tail(n) = std::get<ObserverFeedback>(sys.feedback).xhat0;
  cross[0].assign(1, Eigen::MatrixXd::Zero(p, p));
  cross[0][0].topLeftCorner(n, n) = sys.x0.cov;

  for (int t = 0; t + 1 < t_H; ++t) {
    LoopMatrices lm = loop_matrices(sys, t);
    mu[t + 1] = lm.F * mu[t] + lm.g + lm.W * sys.w.mean_at(t) + lm.V * sys.v.mean_at(t);
    cross[t + 1].resize(t + 2);
    for (int s = 0; s <= t; ++s) cross[t + 1][s] = cross[t][s] * lm.F.transpose();
    cross[t + 1][t + 1] = lm.F * cross[t][t] * lm.F.transpose() +
                          lm.W * sys.w.cov_at(t) * lm.W.transpose() +
                          lm.V * sys.v.cov_at(t) * lm.V.transpose();
  }

  Eigen::VectorXd mean(n * t_H);
  Eigen::MatrixXd cov(n * t_H, n * t_H);
  for (int t = 0; t < t_H; ++t) mean.segment(t * n, n) = mu[t].head(n);
  for (int t = 0; t < t_H; ++t) {
    for (int s = 0; s <= t; ++s) {
      Eigen::MatrixXd blk = cross[t][s].topLeftCorner(n, n);  // Cov(x_s, x_t)
      cov.block(s * n, t * n, n, n) = blk;
      cov.block(t * n, s * n, n, n) = blk.transpose();
    }
  }
  return TrajectoryGaussian(std::move(mean), std::move(cov), n);
}

StackedSignal simulate_closed_loop(const LtvSystem& sys, int t_H, const NoiseDraws& draws,
                                   const MeasurementFn& measure) {
  sys.validate(t_H);
  if (draws.x0.size() != sys.n) throw ConfigError("initial-state draw has the wrong dimension");
  if (draws.v.size() < static_cast<size_t>(t_H) || draws.w.size() < static_cast<size_t>(t_H)) {
    throw ConfigError("noise draws shorter than the horizon");
  }
  const int n = sys.n;
  Eigen::VectorXd data(n * t_H);
  Eigen::VectorXd x = draws.x0;

  if (const auto* direct = std::get_if<DirectFeedback>(&sys.feedback)) {
    for (int t = 0; t < t_H; ++t) {
      data.segment(t * n, n) = x;
      if (t + 1 == t_H) break;
      Eigen::VectorXd y = measure ? measure(x) : Eigen::VectorXd(sys.C_at(t) * x);
      y += draws.v[t];
      const Eigen::MatrixXd& K = pick(direct->K, t, "feedback gain");
      Eigen::VectorXd u = sys.r_at(t) - K * y;
      x = sys.A_at(t) * x + sys.B_at(t) * u + draws.w[t];
    }
  } else {
    const auto& ob = std::get<ObserverFeedback>(sys.feedback);
    Eigen::VectorXd xhat = ob.xhat0;
    for (int t = 0; t < t_H; ++t) {
      data.segment(t * n, n) = x;
      if (t + 1 == t_H) break;
      Eigen::VectorXd y = measure ? measure(x) : Eigen::VectorXd(sys.C_at(t) * x);
      y += draws.v[t];
      const Eigen::MatrixXd& K = pick(ob.K, t, "feedback gain");
      const Eigen::MatrixXd& L = pick(ob.L, t, "observer gain");
      Eigen::VectorXd u = sys.r_at(t) - K * xhat;
      Eigen::VectorXd x_next = sys.A_at(t) * x + sys.B_at(t) * u + draws.w[t];
      xhat = sys.A_at(t) * xhat + sys.B_at(t) * u + L * (y - sys.C_at(t) * xhat);
      x = x_next;
    }
  }
  return StackedSignal(std::move(data), n);
}

NoisePlan::NoisePlan(const LtvSystem& sys, int t_H) : t_H_(t_H) {
  sys.validate(t_H);
  x0_mean_ = sys.x0.mean;
  x0_factor_ = psd_factor(sys.x0.cov, "initial-state covariance");
  v_ = plan_channel(sys.v);
  w_ = plan_channel(sys.w);
}

NoisePlan::Channel NoisePlan::plan_channel(const NoiseSpec& spec) const {
  Channel ch;
  if (spec.is_mixture()) {
    ch.mixture = spec.mixture;
    for (const MixtureComponent& comp : spec.mixture->components) {
      ch.means.push_back(comp.mu);
      ch.factors.push_back(psd_factor(comp.sigma, "mixture component covariance"));
    }
    return ch;
  }
  const int count = spec.means.size() == 1 ? 1 : t_H_;
  for (int t = 0; t < count; ++t) {
    ch.means.push_back(spec.mean_at(t));
    ch.factors.push_back(psd_factor(spec.cov_at(t), "noise covariance"));
  }
  return ch;
}

NoiseDraws NoisePlan::draw(RandomSource& rng) const {
  NoiseDraws out;
  out.x0 = x0_mean_ + x0_factor_ * rng.normal_vector(static_cast<int>(x0_mean_.size()));

  auto draw_channel = [&](const Channel& ch, std::vector<Eigen::VectorXd>& dest) {
    dest.reserve(t_H_);
    ModeSequence modes;
    if (ch.mixture) modes = sample_mode_sequence(*ch.mixture, t_H_, rng);
    for (int t = 0; t < t_H_; ++t) {
      int idx = ch.mixture ? modes[t] : (ch.means.size() == 1 ? 0 : t);
      const int d = static_cast<int>(ch.means[idx].size());
      dest.push_back(ch.means[idx] + ch.factors[idx] * rng.normal_vector(d));
    }
  };
  draw_channel(v_, out.v);
  draw_channel(w_, out.w);
  return out;
}

Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R_cost) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n) throw ConfigError("A and B shapes disagree");
  if (Q.rows() != n || Q.cols() != n) throw ConfigError("Q must be n x n");
  if (R_cost.rows() != m || R_cost.cols() != m) throw ConfigError("R must be m x m");

  Eigen::MatrixXd P = Q;
  bool converged = false;
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::MatrixXd BtP = B.transpose() * P;
    Eigen::MatrixXd gain = (R_cost + BtP * B).ldlt().solve(BtP * A);
    Eigen::MatrixXd P_next = Q + A.transpose() * P * A - A.transpose() * P * B * gain;
    P_next = 0.5 * (P_next + P_next.transpose());
    double rel = (P_next - P).norm() / std::max(1.0, P.norm());
    P = P_next;
    if (rel < 1e-10) {
      converged = true;
      break;
    }
  }
  if (!converged) throw EstimationError("Riccati iteration did not converge");

  Eigen::MatrixXd BtP = B.transpose() * P;
  Eigen::MatrixXd K = (R_cost + BtP * B).ldlt().solve(BtP * A);
  Eigen::EigenSolver<Eigen::MatrixXd> es(A - B * K);
  if (es.eigenvalues().cwiseAbs().maxCoeff() >= 1.0) {
    throw EstimationError("closed loop is not stable under the computed gain");
  }
  return K;
}

LinearizationResult propagate_expected_state(const LtvSystem& sys, const JacobianFn& jacobian,
                                             int t_H) {
  sys.validate(t_H);
  const auto* direct = std::get_if<DirectFeedback>(&sys.feedback);
  if (direct == nullptr) {
    throw ConfigError("expected-state linearization supports direct feedback only");
  }
  if (sys.v.is_mixture() || sys.w.is_mixture()) {
    throw ConfigError("mixture noise: condition on a mode sequence first");
  }
  if (!jacobian) throw ConfigError("empty Jacobian callback");

  LinearizationResult out;
  out.C.reserve(t_H);
  out.expected_state.reserve(t_H);
  Eigen::VectorXd ez = sys.x0.mean;
  for (int t = 0; t < t_H; ++t) {
    Eigen::MatrixXd Ct = jacobian(ez);
    if (Ct.rows() != sys.q || Ct.cols() != sys.n) {
      throw ConfigError("measurement Jacobian must be q x n");
    }
    out.C.push_back(Ct);
    out.expected_state.push_back(ez);
    if (t + 1 == t_H) break;
    const Eigen::MatrixXd& K = pick(direct->K, t, "feedback gain");
    Eigen::VectorXd u_mean = sys.r_at(t) - K * (Ct * ez + sys.v.mean_at(t));
    ez = sys.A_at(t) * ez + sys.B_at(t) * u_mean + sys.w.mean_at(t);
  }
  return out;
}

Eigen::VectorXd distance_xy_measurement(const Eigen::VectorXd& x) {
  if (x.size() < 2) throw ConfigError("range measurement needs at least two state coordinates");
  Eigen::VectorXd y(1);
  y(0) = std::hypot(x(0), x(1));
  return y;
}

Eigen::MatrixXd distance_xy_jacobian(const Eigen::VectorXd& x) {
  if (x.size() < 2) throw ConfigError("range measurement needs at least two state coordinates");
  double d = std::hypot(x(0), x(1));
  if (d < 1e-9) throw EstimationError("range measurement is singular at the origin");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(1, x.size());
  J(0, 0) = x(0) / d;
  J(0, 1) = x(1) / d;
  return J;
}

TrajectoryGaussian fit_gaussian(const std::vector<StackedSignal>& trajectories, double ridge) {
  if (trajectories.empty()) throw ConfigError("no trajectories to fit");
  const int dim = static_cast<int>(trajectories.front().data.size());
  const int state_dim = trajectories.front().state_dim;
  const int N = static_cast<int>(trajectories.size());
  if (N < 2 * dim) throw ConfigError("need at least twice as many trajectories as variables");
  for (const StackedSignal& s : trajectories) {
    if (s.data.size() != dim || s.state_dim != state_dim) {
      throw ConfigError("trajectories have inconsistent shapes");
    }
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const StackedSignal& s : trajectories) mean += s.data;
  mean /= N;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim, dim);
  for (const StackedSignal& s : trajectories) {
    Eigen::VectorXd d = s.data - mean;
    S.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
  }
  S = Eigen::MatrixXd(S.selfadjointView<Eigen::Lower>());
  S /= (N - 1);
  S.diagonal().array() += ridge;
  return TrajectoryGaussian(std::move(mean), std::move(S), state_dim);
}

}  // namespace probstl
