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

// Compensatory human control law.
//
// The simulated human moves its joints so as to reduce the reaching error
// e_e and the compensation error e_c at rates Lambda_e and Lambda_c, and
// resolves the conflict between the two goals with the weighted
// least-squares velocity
//
//   q_h_dot = (Jh^T W Jh)^-1 Jh^T W Lambda xi,   W = diag(w I6, (1-w) I6),
//
// where Jh = [Jhe; Jhc] is the human's internal model of its own
// differential kinematics with every robot joint held still.

#pragma once

#include <algorithm>
#include <string>

#include "compensctrl/errors.hpp"
#include "compensctrl/se3.hpp"

namespace compensctrl {

enum class InternalModel { connected, disconnected_avatar };

enum class SingularPolicy {
  /// Fall back to the pseudo-inverse of J_w.
  pseudo_inverse,
  /// Throw SingularJacobianError.
  error,
};

/// J_w is treated as singular when sigma_min < kSingularRatio * sigma_max.
inline constexpr double kSingularRatio = 1e-10;

inline constexpr double kDefaultHumanWeight = 0.5;

struct HumanModel {
  Matrix6d lambda_e = Matrix6d::Identity();
  Matrix6d lambda_c = Matrix6d::Identity();
  double w = kDefaultHumanWeight;
  InternalModel internal_model = InternalModel::connected;
  SingularPolicy on_singular = SingularPolicy::pseudo_inverse;

  /// Throws ConfigError unless both gains are symmetric positive definite
  /// and w lies in [0, 1].
  void validate() const {
    auto spd = [](const Matrix6d& M, const char* name) {
      if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError(std::string(name) + " must be symmetric");
      Eigen::LLT<Matrix6d> llt(M);
      if (llt.info() != Eigen::Success) throw ConfigError(std::string(name) + " must be positive definite");
    };
    spd(lambda_e, "lambda_e");
    spd(lambda_c, "lambda_c");
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("w must lie in [0, 1]");
  }

  Matrix12d stacked_gain() const {
    Matrix12d L = Matrix12d::Zero();
    L.topLeftCorner<6, 6>() = lambda_e;
    L.bottomRightCorner<6, 6>() = lambda_c;
    return L;
  }

  Matrix12d weight() const {
    Vector12d d;
    d << Vector6d::Constant(w), Vector6d::Constant(1.0 - w);
    return d.asDiagonal();
  }
};

/// True and internal-model Jacobians at one configuration. Human blocks are
/// 6 x n_h; robot blocks are 6 x n_u (robot input coordinates).
struct JacobianBundle {
  MatrixXd J_he, J_hc;
  MatrixXd J_he_hat, J_hc_hat;
  MatrixXd J_re, J_rc;

  int human_dim() const { return static_cast<int>(J_he.cols()); }
  int input_dim() const { return static_cast<int>(J_re.cols()); }
};

/// [top; bottom] for two 6-row blocks.
inline MatrixXd stack_jacobians(const MatrixXd& top, const MatrixXd& bottom) {
  if (top.rows() != 6 || bottom.rows() != 6 || top.cols() != bottom.cols()) {
    throw DimensionError("stacked Jacobian blocks must both be 6 x n (got " +
                         std::to_string(top.rows()) + "x" + std::to_string(top.cols()) + " and " +
                         std::to_string(bottom.rows()) + "x" + std::to_string(bottom.cols()) + ")");
  }
  MatrixXd out(12, top.cols());
  out << top, bottom;
  return out;
}

/// Internal-model stack [J_he_hat; J_hc_hat].
inline MatrixXd stack_human_jacobian(const JacobianBundle& b) {
  return stack_jacobians(b.J_he_hat, b.J_hc_hat);
}

/// True human stack [J_he; J_hc].
inline MatrixXd stack_true_human_jacobian(const JacobianBundle& b) {
  return stack_jacobians(b.J_he, b.J_hc);
}

/// [J_re; J_rc].
inline MatrixXd stack_robot_jacobian(const JacobianBundle& b) {
  return stack_jacobians(b.J_re, b.J_rc);
}

inline Vector12d stack_errors(const ErrorVec6& e_e, const ErrorVec6& e_c) {
  Vector12d xi;
  xi << e_e.stacked(), e_c.stacked();
  return xi;
}

/// Linear map G with q_h_dot = G * xi, i.e. G = J_w^-1 Jh^T W Lambda.
/// `pseudo_inverse_used` reports whether the singular fallback was taken.
inline MatrixXd human_velocity_operator(const HumanModel& model, const MatrixXd& Jh_hat,
                                        bool* pseudo_inverse_used = nullptr) {
  if (Jh_hat.rows() != 12) throw DimensionError("internal-model Jacobian must have 12 rows");
  const Matrix12d W = model.weight();
  const MatrixXd JtW = Jh_hat.transpose() * W;
  const MatrixXd Jw = JtW * Jh_hat;
  const MatrixXd rhs = JtW * model.stacked_gain();

  // J_w is symmetric PSD, so its eigenvalues are its singular values.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Jw);
  const VectorXd& s = es.eigenvalues();  // ascending
  const double smax = s.size() ? std::max(s[s.size() - 1], 0.0) : 0.0;
  const double smin = s.size() ? std::max(s[0], 0.0) : 0.0;
  const bool singular = !(smin >= kSingularRatio * smax) || smax == 0.0;
  if (pseudo_inverse_used) *pseudo_inverse_used = singular;
  if (singular && model.on_singular == SingularPolicy::error) {
    throw SingularJacobianError(smin, smax);
  }
  if (!singular) {
    return Jw.llt().solve(rhs);
  }
  // J_w^+ with the same relative cutoff.
  VectorXd inv = VectorXd::Zero(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > kSingularRatio * smax) inv[i] = 1.0 / s[i];
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * rhs;
}

/// Human joint rates that minimize
///   w ||J_he_hat q - Lambda_e e_e||^2 + (1-w) ||J_hc_hat q - Lambda_c e_c||^2.
/// Only the internal-model Jacobians enter; the true ones do not.
inline VectorXd resolve_human_velocity(const HumanModel& model, const JacobianBundle& bundle,
                                       const ErrorVec6& e_e, const ErrorVec6& e_c) {
  return human_velocity_operator(model, stack_human_jacobian(bundle)) * stack_errors(e_e, e_c);
}

/// The human's cost C_w evaluated at a candidate velocity.
inline double human_cost(const HumanModel& model, const MatrixXd& Jh_hat, const Vector12d& xi,
                         const VectorXd& qdot) {
  const Vector12d r = Jh_hat * qdot - model.stacked_gain() * xi;
  return r.dot(model.weight() * r);
}

}  // namespace compensctrl
