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

// Fast invariant suite behind `compensctrl check`.

#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "compensctrl/chain_io.hpp"
#include "compensctrl/estimator_regulator.hpp"

namespace compensctrl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Solver under test for the human least-squares law: q_h_dot for the
/// internal-model Jacobian Jh (12 x n) and stacked error xi.
using HumanLawSolver =
    std::function<VectorXd(const HumanModel&, const MatrixXd& Jh, const Vector12d& xi)>;

inline VectorXd default_human_law(const HumanModel& m, const MatrixXd& Jh, const Vector12d& xi) {
  return human_velocity_operator(m, Jh) * xi;
}

namespace checks {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline VectorXd random_configuration(const KinematicChain& chain, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-M_PI, M_PI), shift(-0.5, 0.5);
  VectorXd q(chain.joint_count());
  for (int i = 0; i < q.size(); ++i)
    q[i] = is_rotational(chain.joint(i).kind) ? angle(rng) : shift(rng);
  return q;
}

/// Central-difference Jacobian of a frame pose over all joints.
inline MatrixXd finite_difference_jacobian(const KinematicChain& chain, const VectorXd& q,
                                           const FrameAttachment& frame, double h = 1e-6) {
  MatrixXd J(6, chain.joint_count());
  for (int i = 0; i < chain.joint_count(); ++i) {
    VectorXd qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Pose xp = forward_kinematics(chain, qp, frame);
    const Pose xm = forward_kinematics(chain, qm, frame);
    J.block<3, 1>(0, i) = (xp.position - xm.position) / (2 * h);
    J.block<3, 1>(3, i) = rotation_log(xp.orientation * xm.orientation.transpose()) / (2 * h);
  }
  return J;
}

/// Largest |geometric - finite difference| over `samples` random
/// configurations and every frame of the chain.
inline double jacobian_fd_error(const KinematicChain& chain, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const VectorXd q = random_configuration(chain, rng);
    for (const auto& [name, frame] : chain.frames()) {
      const MatrixXd Jg = geometric_jacobian(chain, q, frame, OwnerFilter::all);
      worst = std::max(worst, (Jg - finite_difference_jacobian(chain, q, frame)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

/// Weighted least squares through a QR factorization of sqrt(W) Jh.
inline VectorXd least_squares_oracle(const HumanModel& m, const MatrixXd& Jh, const Vector12d& xi) {
  const Vector12d sw = m.weight().diagonal().cwiseSqrt();
  const MatrixXd A = sw.asDiagonal() * Jh;
  const Vector12d b = sw.asDiagonal() * (m.stacked_gain() * xi);
  return A.householderQr().solve(b);
}

/// Largest relative deviation of `solver` from the QR oracle over random
/// full-rank 12 x 7 instances.
inline double least_squares_error(const HumanLawSolver& solver, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), weight(0.05, 0.95), gain(0.1, 2.0);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    HumanModel m;
    m.w = weight(rng);
    Vector6d ge, gc;
    for (int i = 0; i < 6; ++i) {
      ge[i] = gain(rng);
      gc[i] = gain(rng);
    }
    m.lambda_e = ge.asDiagonal();
    m.lambda_c = gc.asDiagonal();
    MatrixXd Jh(12, 7);
    for (int i = 0; i < Jh.size(); ++i) Jh.data()[i] = unit(rng);
    Vector12d xi;
    for (int i = 0; i < 12; ++i) xi[i] = unit(rng);
    const VectorXd ref = least_squares_oracle(m, Jh, xi);
    worst = std::max(worst, (solver(m, Jh, xi) - ref).norm() / std::max(ref.norm(), 1e-300));
  }
  return worst;
}

inline Vector12d compensation_weights() {
  Vector12d d;
  d << Vector6d::Zero(), 10.0, 10.0, 10.0, 0.1, 0.1, 0.1;
  return d;
}

/// Configuration with every robot joint at 0.3 rad and human joints at 0.1.
inline VectorXd nominal_configuration(const KinematicChain& chain) {
  VectorXd q = VectorXd::Constant(chain.joint_count(), 0.1);
  for (int i : chain.robot_indices()) q[i] = 0.3;
  q.head(chain.base_mode() == BaseMode::unicycle ? 3 : 0).setZero();
  return q;
}

/// Largest DARE residual over linearizations of `chain` at random
/// configurations plus random stabilizable systems.
inline double riccati_residual(const std::vector<KinematicChain>& chains, int samples,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double dt = 1e-3;
  double worst = 0.0;
  for (const KinematicChain& chain : chains) {
    HumanModel h;
    h.lambda_c = 0.1 * Matrix6d::Identity();
    InternalModel mode = chain.has_frame(kHeadFrame) && chain.has_frame(kArmMountFrame)
                             ? InternalModel::disconnected_avatar
                             : InternalModel::connected;
    h.internal_model = mode;
    RegulatorConfig cfg;
    cfg.Q = compensation_weights().asDiagonal();
    cfg.R = MatrixXd::Identity(chain.input_dim(), chain.input_dim());
    for (int s = 0; s < samples; ++s) {
      VectorXd q = nominal_configuration(chain);
      for (int i = 0; i < q.size(); ++i) q[i] += 0.2 * unit(rng);
      const LinearizedSystem sys = assemble_system(h, make_bundle(chain, q, mode));
      worst = std::max(worst, lqr_solve(sys, cfg, dt).residual);
    }
  }
  for (int s = 0; s < samples; ++s) {
    MatrixXd A(6, 6), B(6, 3);
    for (int i = 0; i < A.size(); ++i) A.data()[i] = 0.3 * unit(rng);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = unit(rng);
    const DareSolution sol = solve_dare(MatrixXd::Identity(6, 6) + dt * A, dt * B,
                                        dt * MatrixXd::Identity(6, 6), dt * MatrixXd::Identity(3, 3));
    worst = std::max(worst, sol.residual);
  }
  return worst;
}

/// Largest Re(eig(A)) over random connected configurations.
inline double connected_max_real_eigenvalue(const KinematicChain& chain, int samples,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gain(0.1, 2.0), weight(0.05, 0.95);
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    HumanModel h;
    h.w = weight(rng);
    Vector6d ge, gc;
    for (int i = 0; i < 6; ++i) {
      ge[i] = gain(rng);
      gc[i] = gain(rng);
    }
    h.lambda_e = ge.asDiagonal();
    h.lambda_c = gc.asDiagonal();
    const VectorXd q = random_configuration(chain, rng);
    const LinearizedSystem sys = assemble_system(h, make_bundle(chain, q, InternalModel::connected));
    Eigen::EigenSolver<Matrix12d> es(sys.A, false);
    worst = std::max(worst, es.eigenvalues().real().maxCoeff());
  }
  return worst;
}

/// Closed-form stationary variance of x_dot = a x + w, y = c x + v with
/// intensities q and r.
inline double scalar_filter_variance(double a, double c, double q, double r) {
  return r * (a + std::sqrt(a * a + c * c * q / r)) / (c * c);
}

/// Integrates the covariance equation on a decoupled diagonal system until
/// stationary and returns the largest deviation from the scalar closed forms
/// (unmeasured states: -q / (2a)).
inline double scalar_covariance_error() {
  Vector12d a;
  a << -0.5, -0.8, -1.0, -1.2, -0.6, -0.9, 0.3, -0.2, 0.0, 0.5, -1.0, 0.1;
  const Matrix12d A = a.asDiagonal();
  const Eigen::Matrix<double, 6, 12> C = LinearizedSystem::output_matrix();
  const Matrix6d R_cov = 0.01 * Matrix6d::Identity();
  const Matrix12d Q_cov = Matrix12d::Identity();
  Matrix12d P = default_initial_covariance();
  const double dt = 1e-3;
  for (int k = 0; k < 40000; ++k) P = covariance_step(P, A, C, observer_gain(P, C, R_cov), Q_cov, dt);
  double worst = 0.0;
  for (int i = 0; i < 12; ++i) {
    const double expected = i < 6 ? -1.0 / (2.0 * a[i]) : scalar_filter_variance(a[i], 1.0, 1.0, 0.01);
    worst = std::max(worst, std::abs(P(i, i) - expected));
  }
  const double off = (P - Matrix12d(P.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
  return std::max(worst, off);
}

}  // namespace checks

struct CheckOptions {
  /// Chain files to validate and exercise.
  std::vector<std::string> chain_files;
  int samples = 100;
  std::uint64_t seed = 1;
  HumanLawSolver human_law = default_human_law;
};

inline std::vector<CheckResult> run_checks(const CheckOptions& opt) {
  std::vector<CheckResult> out;
  auto record = [&](std::string name, bool ok, std::string detail) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };

  std::vector<KinematicChain> chains;
  std::vector<std::string> stems;
  for (const std::string& path : opt.chain_files) {
    try {
      chains.push_back(load_chain(path));
      stems.push_back(std::filesystem::path(path).stem().string());
      record("chain_valid " + path, true, "");
    } catch (const Error& e) {
      record("chain_valid " + path, false, e.what());
    }
  }

  for (std::size_t i = 0; i < chains.size(); ++i) {
    const double err = checks::jacobian_fd_error(chains[i], opt.samples, opt.seed + i);
    record("jacobian_fd " + stems[i], err < 1e-6, "max |J - J_fd| = " + checks::fmt(err));
  }

  const double ls = checks::least_squares_error(opt.human_law, opt.samples, opt.seed);
  record("least_squares_oracle", ls < 1e-9, "max relative error = " + checks::fmt(ls));

  try {
    const double res = checks::riccati_residual(chains, 5, opt.seed);
    record("riccati_residual", res < 1e-8, "max residual = " + checks::fmt(res));
  } catch (const Error& e) {
    record("riccati_residual", false, e.what());
  }

  for (std::size_t i = 0; i < chains.size(); ++i) {
    const double eig = checks::connected_max_real_eigenvalue(chains[i], opt.samples, opt.seed + i);
    record("marginal_stability " + stems[i], eig <= 1e-8,
           "max Re(eig A) = " + checks::fmt(eig));
  }

  bool structure_ok = true;
  std::string structure_detail;
  for (const KinematicChain& chain : chains) {
    const VectorXd q = checks::nominal_configuration(chain);
    HumanModel h;
    for (InternalModel mode : {InternalModel::connected, InternalModel::disconnected_avatar}) {
      if (mode == InternalModel::disconnected_avatar &&
          !(chain.has_frame(kHeadFrame) && chain.has_frame(kArmMountFrame)))
        continue;
      h.internal_model = mode;
      const LinearizedSystem sys = assemble_system(h, make_bundle(chain, q, mode));
      const bool c_ok = sys.C == LinearizedSystem::output_matrix();
      const bool d_ok = sys.D.rows() == 6 && sys.D.cols() == chain.input_dim() && sys.D.isZero(0.0);
      const bool top_ok =
          mode == InternalModel::connected || sys.A.topRows<6>().isZero(0.0);
      if (!(c_ok && d_ok && top_ok)) {
        structure_ok = false;
        structure_detail = !c_ok ? "C != [0 I]" : !d_ok ? "D != 0" : "disconnected A top block != 0";
      }
    }
  }
  record("output_structure", structure_ok, structure_detail);

  const double cov = checks::scalar_covariance_error();
  record("scalar_covariance", cov < 1e-6, "max deviation = " + checks::fmt(cov));
  return out;
}

}  // namespace compensctrl
