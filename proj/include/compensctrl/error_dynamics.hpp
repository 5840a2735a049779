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

// Reaching/compensation error dynamics.
//
// With the human closing its own loop through the weighted least-squares
// law, the stacked error xi = [e_e; e_c] evolves as
//
//   xi_dot = A xi + B u,   y = C xi + D u,
//   A = -Jh G,  G = (Jh_hat^T W Jh_hat)^-1 Jh_hat^T W Lambda,
//   B = -[J_re; J_rc],  C = [0 I6],  D = 0,
//
// where Jh is the true human Jacobian and Jh_hat the human's internal model.
// When the avatar is physically disconnected, the true J_he is zero.

#pragma once

#include <utility>

#include "compensctrl/human_model.hpp"
#include "compensctrl/kinematics.hpp"

namespace compensctrl {

struct LinearizedSystem {
  Matrix12d A = Matrix12d::Zero();
  MatrixXd B;                                           // 12 x n_u
  Eigen::Matrix<double, 6, 12> C = output_matrix();     // [0 I6]
  MatrixXd D;                                           // 6 x n_u, zero

  int input_dim() const { return static_cast<int>(B.cols()); }

  static Eigen::Matrix<double, 6, 12> output_matrix() {
    Eigen::Matrix<double, 6, 12> C = Eigen::Matrix<double, 6, 12>::Zero();
    C.rightCols<6>().setIdentity();
    return C;
  }
};

/// Desired poses: x_e_bar is the reaching target (known only to the human),
/// x_c_bar the relaxed compensation pose.
struct Targets {
  Pose reach;
  Pose compensation;
};

inline LinearizedSystem assemble_system(const HumanModel& model, const JacobianBundle& bundle) {
  const MatrixXd G = human_velocity_operator(model, stack_human_jacobian(bundle));
  LinearizedSystem sys;
  sys.A = -stack_true_human_jacobian(bundle) * G;
  sys.B = -stack_robot_jacobian(bundle);
  sys.D = MatrixXd::Zero(6, sys.B.cols());
  return sys;
}

/// The avatar's frozen arm carried by the pilot's compensation link: the
/// pilot imagines the avatar's arm (mount -> hand) attached to its own
/// shoulder, with its egocentric frame placed at the avatar's head.
inline FrameAttachment imagined_hand_attachment(const KinematicChain& chain,
                                                const std::vector<Pose>& poses) {
  const Pose mount = attachment_pose(poses, chain.frame(kArmMountFrame));
  const Pose hand = attachment_pose(poses, chain.frame(kEndEffectorFrame));
  const FrameAttachment& comp = chain.frame(kCompensationFrame);
  return {comp.joint, comp.offset * (mount.inverse() * hand)};
}

/// Jacobians of the reaching and compensation frames at configuration q.
/// Connected: the internal model equals the true kinematics. Disconnected:
/// J_he = 0 and J_he_hat is the imagined head-to-hand map rotated into the
/// chain reference by the avatar head orientation.
inline JacobianBundle make_bundle(const KinematicChain& chain, const VectorXd& q,
                                  InternalModel mode) {
  const FrameAttachment& ee = chain.frame(kEndEffectorFrame);
  const FrameAttachment& comp = chain.frame(kCompensationFrame);
  JacobianBundle b;
  b.J_hc = geometric_jacobian(chain, q, comp, OwnerFilter::human);
  b.J_hc_hat = b.J_hc;
  const MatrixXd Mr = robot_input_map(chain, q);
  b.J_re = geometric_jacobian(chain, q, ee, OwnerFilter::robot) * Mr;
  b.J_rc = geometric_jacobian(chain, q, comp, OwnerFilter::robot) * Mr;

  if (mode == InternalModel::connected) {
    b.J_he = geometric_jacobian(chain, q, ee, OwnerFilter::human);
    b.J_he_hat = b.J_he;
    return b;
  }

  b.J_he = MatrixXd::Zero(6, chain.human_count());
  const std::vector<Pose> poses = joint_poses(chain, q);
  const Matrix3d R_head = attachment_pose(poses, chain.frame(kHeadFrame)).orientation;
  const MatrixXd J_img =
      geometric_jacobian(chain, q, imagined_hand_attachment(chain, poses), OwnerFilter::human);
  b.J_he_hat.resize(6, J_img.cols());
  b.J_he_hat.topRows<3>() = R_head * J_img.topRows<3>();
  b.J_he_hat.bottomRows<3>() = R_head * J_img.bottomRows<3>();
  return b;
}

/// Checks the frames a disconnected chain needs and that no human joint
/// moves the avatar hand.
inline void validate_avatar_chain(const KinematicChain& chain) {
  for (const char* f : {kHeadFrame, kArmMountFrame}) {
    if (!chain.has_frame(f))
      throw ConfigError(std::string("disconnected mode requires a '") + f + "' frame");
  }
  const int ee = chain.frame(kEndEffectorFrame).joint;
  for (int h : chain.human_indices()) {
    if (ee >= 0 && chain.moves(h, ee))
      throw ConfigError("disconnected mode: human joint " + std::to_string(h) +
                        " moves the end effector");
  }
}

inline Vector12d compute_errors(const KinematicChain& chain, const VectorXd& q,
                                const Targets& targets) {
  const std::vector<Pose> poses = joint_poses(chain, q);
  const Pose xe = attachment_pose(poses, chain.frame(kEndEffectorFrame));
  const Pose xc = attachment_pose(poses, chain.frame(kCompensationFrame));
  return stack_errors(pose_error(targets.reach, xe), pose_error(targets.compensation, xc));
}

struct StepOutcome {
  VectorXd q_next;
  Vector12d xi_next;
  VectorXd qdot_h;
};

/// Euler step with given human joint rates and robot input.
inline StepOutcome advance(const KinematicChain& chain, const VectorXd& q, const Targets& targets,
                           const VectorXd& qdot_h, const VectorXd& u, double dt) {
  StepOutcome out;
  out.qdot_h = qdot_h;
  const VectorXd qdot_r = robot_input_map(chain, q) * u;
  out.q_next = q;
  for (int k = 0; k < chain.human_count(); ++k) out.q_next[chain.human_indices()[k]] += dt * qdot_h[k];
  for (int k = 0; k < chain.robot_count(); ++k) out.q_next[chain.robot_indices()[k]] += dt * qdot_r[k];
  out.xi_next = compute_errors(chain, out.q_next, targets);
  return out;
}

/// One explicit Euler step of the coupled human+robot motion. The errors at
/// the new configuration are recomputed from forward kinematics, not
/// integrated from the linearization.
inline StepOutcome step_errors(const KinematicChain& chain, const HumanModel& model,
                               const VectorXd& q, const Targets& targets, const VectorXd& u,
                               double dt, const JacobianBundle& bundle, const Vector12d& xi) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (u.size() != chain.input_dim()) {
    throw DimensionError("input has " + std::to_string(u.size()) + " entries, expected " +
                         std::to_string(chain.input_dim()));
  }
  return advance(chain, q, targets,
                 human_velocity_operator(model, stack_human_jacobian(bundle)) * xi, u, dt);
}

inline StepOutcome step_errors(const KinematicChain& chain, const HumanModel& model,
                               const VectorXd& q, const Targets& targets, const VectorXd& u,
                               double dt) {
  chain.check_configuration(q);
  return step_errors(chain, model, q, targets, u, dt, make_bundle(chain, q, model.internal_model),
                     compute_errors(chain, q, targets));
}

}  // namespace compensctrl
