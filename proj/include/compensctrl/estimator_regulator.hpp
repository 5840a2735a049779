// Copyright 2026 The compensctrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Output-feedback regulation of the error system: a Kalman-Bucy observer
// reconstructs the unmeasured reaching error from the measured compensation
// error, and an LQR gain drives the robot inputs. Both gains are recomputed
// at every step on the current linearization.

#pragma once

#include <optional>

#include "compensctrl/error_dynamics.hpp"
#include "compensctrl/riccati.hpp"

namespace compensctrl {

struct ObserverState {
  Vector12d e_hat = Vector12d::Zero();
  Matrix12d P = Matrix12d::Zero();
};

struct RegulatorConfig {
  Matrix12d Q_cov = Matrix12d::Identity();
  Matrix6d R_cov = 0.01 * Matrix6d::Identity();
  Matrix12d Q = Matrix12d::Zero();
  MatrixXd R;  // n_u x n_u
  MatrixXd S;  // 12 x n_u; empty means zero
  /// Per-input absolute rate limit; empty means unlimited.
  VectorXd rate_limit;

  MatrixXd mixed_cost(int n_u) const {
    return S.size() ? S : MatrixXd::Zero(12, n_u);
  }

  void validate(int n_u) const {
    if (R.rows() != n_u || R.cols() != n_u)
      throw DimensionError("R must be " + std::to_string(n_u) + "x" + std::to_string(n_u));
    if (S.size() && (S.rows() != 12 || S.cols() != n_u))
      throw DimensionError("S must be 12x" + std::to_string(n_u));
    if (rate_limit.size() && rate_limit.size() != n_u)
      throw DimensionError("rate_limit must have " + std::to_string(n_u) + " entries");
    if (Eigen::LLT<MatrixXd>(R).info() != Eigen::Success)
      throw ConfigError("R must be positive definite");
    if (Eigen::LLT<Matrix6d>(R_cov).info() != Eigen::Success)
      throw ConfigError("R_cov must be positive definite");
    auto psd = [](const Matrix12d& M, const char* name) {
      if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError(std::string(name) + " must be symmetric");
      Eigen::SelfAdjointEigenSolver<Matrix12d> es(M, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-12)
        throw ConfigError(std::string(name) + " must be positive semidefinite");
    };
    psd(Q_cov, "Q_cov");
    psd(Q, "Q");
  }
};

/// Default initial covariance: 10 on the reaching block, 0.05 on the
/// compensation block.
inline Matrix12d default_initial_covariance() {
  Vector12d d;
  d << Vector6d::Constant(10.0), Vector6d::Constant(0.05);
  return d.asDiagonal();
}

/// L = P C^T R_cov^-1.
inline Eigen::Matrix<double, 12, 6> observer_gain(const Matrix12d& P,
                                                  const Eigen::Matrix<double, 6, 12>& C,
                                                  const Matrix6d& R_cov) {
  Eigen::LLT<Matrix6d> llt(R_cov);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("R_cov must be positive definite");
  // R_cov symmetric: L^T = R_cov^-1 C P.
  return llt.solve(C * P).transpose();
}

/// Symmetrize and clamp negative eigenvalues to zero.
inline Matrix12d project_psd(const Matrix12d& P) {
  Matrix12d S = 0.5 * (P + P.transpose());
  if (Eigen::LLT<Matrix12d>(S).info() == Eigen::Success) return S;
  Eigen::SelfAdjointEigenSolver<Matrix12d> es(S);
  if (es.eigenvalues().minCoeff() >= 0.0) return S;
  const Vector12d clamped = es.eigenvalues().cwiseMax(0.0);
  S = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (S + S.transpose());
}

/// Euler step of P_dot = A P + P A^T - L C P + Q_cov.
inline Matrix12d covariance_step(const Matrix12d& P, const Matrix12d& A,
                                 const Eigen::Matrix<double, 6, 12>& C,
                                 const Eigen::Matrix<double, 12, 6>& L, const Matrix12d& Q_cov,
                                 double dt) {
  const Matrix12d P_next = P + dt * (A * P + P * A.transpose() - L * C * P + Q_cov);
  return project_psd(P_next);
}

/// One Euler step of
///   e_hat_dot = A e_hat + B u + L (y - C e_hat).
/// The innovation is taken as measurement minus prediction so that the
/// Kalman gain stabilizes the estimation error: eps_dot = (A - L C) eps.
inline Vector12d estimate_step(const Vector12d& e_hat, const LinearizedSystem& sys,
                               const VectorXd& u, const Vector6d& y_measured,
                               const Eigen::Matrix<double, 12, 6>& L, double dt) {
  const Vector6d innovation = y_measured - sys.C * e_hat;
  return e_hat + dt * (sys.A * e_hat + sys.B * u + L * innovation);
}

inline ObserverState observer_step(const ObserverState& obs, const LinearizedSystem& sys,
                                   const VectorXd& u, const Vector6d& y_measured,
                                   const RegulatorConfig& cfg, double dt) {
  const Eigen::Matrix<double, 12, 6> L = observer_gain(obs.P, sys.C, cfg.R_cov);
  ObserverState next;
  next.e_hat = estimate_step(obs.e_hat, sys, u, y_measured, L, dt);
  next.P = covariance_step(obs.P, sys.A, sys.C, L, cfg.Q_cov, dt);
  return next;
}

inline ObserverState observer_step(const ObserverState& obs, const LinearizedSystem& sys,
                                   const VectorXd& u, const ErrorVec6& y_measured,
                                   const RegulatorConfig& cfg, double dt) {
  return observer_step(obs, sys, u, y_measured.stacked(), cfg, dt);
}

/// Zero-order Euler discretization used by the regulator.
inline std::pair<Matrix12d, MatrixXd> discretize(const LinearizedSystem& sys, double dt) {
  return {Matrix12d::Identity() + dt * sys.A, dt * sys.B};
}

/// LQR on the Euler-discretized system. The continuous cost integral is
/// sampled with weight dt, i.e. stage cost dt*(x'Qx + u'Ru + 2x'Su).
inline DareSolution lqr_solve(const LinearizedSystem& sys, const RegulatorConfig& cfg, double dt,
                              bool validated = false) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const int n_u = sys.input_dim();
  if (!validated) cfg.validate(n_u);
  const auto [Ad, Bd] = discretize(sys, dt);
  return solve_dare(Ad, Bd, dt * MatrixXd(cfg.Q), dt * cfg.R, dt * cfg.mixed_cost(n_u));
}

inline MatrixXd lqr_gain(const LinearizedSystem& sys, const RegulatorConfig& cfg, double dt) {
  return lqr_solve(sys, cfg, dt).K;
}

/// u = -K e_hat, clipped componentwise when a rate limit is given.
inline VectorXd control_input(const MatrixXd& K, const Vector12d& e_hat,
                              const VectorXd& rate_limit = {}) {
  if (K.cols() != 12) throw DimensionError("controller gain must have 12 columns");
  VectorXd u = -K * e_hat;
  if (rate_limit.size()) {
    if (rate_limit.size() != u.size()) throw DimensionError("rate_limit size mismatch");
    u = u.cwiseMax(-rate_limit).cwiseMin(rate_limit);
  }
  return u;
}

/// Stationary observer covariance: the stabilizing solution of
///   A P + P A^T - P C^T R_cov^-1 C P + Q_cov = 0.
inline Matrix12d steady_state_covariance(const Matrix12d& A, const Eigen::Matrix<double, 6, 12>& C,
                                         const Matrix6d& R_cov, const Matrix12d& Q_cov) {
  const MatrixXd G = C.transpose() * R_cov.llt().solve(MatrixXd(C));
  return solve_filter_care(A, G, Q_cov);
}

/// Discrete one-step map of [xi; e_hat] with frozen gains, the plant
/// evolving with `plant` and the observer/controller built on `model`.
inline MatrixXd closed_loop_matrix(const LinearizedSystem& plant, const LinearizedSystem& model,
                                   const MatrixXd& K, const Eigen::Matrix<double, 12, 6>& L,
                                   double dt) {
  MatrixXd M(24, 24);
  const Matrix12d I = Matrix12d::Identity();
  M.topLeftCorner<12, 12>() = I + dt * plant.A;
  M.topRightCorner<12, 12>() = -dt * plant.B * K;
  M.bottomLeftCorner<12, 12>() = dt * L * plant.C;
  M.bottomRightCorner<12, 12>() = I + dt * (model.A - model.B * K - L * model.C);
  return M;
}

inline double spectral_radius(const MatrixXd& M) {
  Eigen::EigenSolver<MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace compensctrl
