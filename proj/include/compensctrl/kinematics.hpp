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

// Kinematic chains shared by a human and a robot: forward kinematics,
// geometric Jacobians and the unicycle input map.
//
// Joints are stored in a flat list. Each joint names its parent (a previous
// joint index, or -1 for the chain base), so a single chain can describe a
// serial human+prosthesis arm or two disconnected branches (pilot body and
// avatar) hanging off the same reference frame.

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "compensctrl/errors.hpp"
#include "compensctrl/se3.hpp"

namespace compensctrl {

enum class JointKind { revolute, prismatic, planar_translation, planar_rotation };
enum class Owner { human, robot };
enum class OwnerFilter { human, robot, all };
enum class BaseMode { fixed, unicycle };

inline constexpr const char* kEndEffectorFrame = "end_effector";
inline constexpr const char* kCompensationFrame = "compensation";
inline constexpr const char* kHeadFrame = "head";
inline constexpr const char* kArmMountFrame = "arm_mount";

inline bool is_rotational(JointKind kind) {
  return kind == JointKind::revolute || kind == JointKind::planar_rotation;
}

struct Joint {
  JointKind kind = JointKind::revolute;
  Vector3d axis = Vector3d::UnitZ();
  /// Fixed transform from the parent frame to this joint's frame at q = 0.
  Pose origin;
  Owner owner = Owner::robot;
  /// Index of the parent joint; -1 is the chain base.
  int parent = -1;
};

/// A frame rigidly attached to the moving frame of `joint` (-1 = base).
struct FrameAttachment {
  int joint = -1;
  Pose offset;
};

class KinematicChain {
 public:
  KinematicChain() = default;

  /// Validates every structural invariant; throws ConfigError naming the
  /// violated one.
  KinematicChain(std::vector<Joint> joints, std::map<std::string, FrameAttachment> frames,
                 BaseMode base_mode = BaseMode::fixed)
      : joints_(std::move(joints)), frames_(std::move(frames)), base_mode_(base_mode) {
    for (std::size_t i = 0; i < joints_.size(); ++i) {
      const Joint& j = joints_[i];
      if (std::abs(j.axis.norm() - 1.0) > 1e-12) {
        throw ConfigError("invariant 'joint axis unit norm' violated at joint " +
                          std::to_string(i) + " (|axis| = " + std::to_string(j.axis.norm()) + ")");
      }
      if (j.parent < -1 || j.parent >= static_cast<int>(i)) {
        throw ConfigError("invariant 'parent precedes child' violated at joint " +
                          std::to_string(i));
      }
      if (j.origin.orthogonality_defect() > 1e-9) {
        throw ConfigError("joint " + std::to_string(i) + " origin rotation is not orthogonal");
      }
      (j.owner == Owner::human ? human_indices_ : robot_indices_).push_back(static_cast<int>(i));
    }
    for (const char* required : {kEndEffectorFrame, kCompensationFrame}) {
      if (!frames_.count(required)) {
        throw ConfigError(std::string("invariant 'required frames' violated: missing frame '") +
                          required + "'");
      }
    }
    for (const auto& [name, f] : frames_) {
      if (f.joint < -1 || f.joint >= static_cast<int>(joints_.size())) {
        throw ConfigError("frame '" + name + "' attaches to nonexistent joint " +
                          std::to_string(f.joint));
      }
    }
    if (base_mode_ == BaseMode::unicycle) {
      const bool ok = joints_.size() >= 3 &&
                      joints_[0].kind == JointKind::planar_translation &&
                      joints_[1].kind == JointKind::planar_translation &&
                      joints_[2].kind == JointKind::planar_rotation &&
                      joints_[0].axis.isApprox(Vector3d::UnitX()) &&
                      joints_[1].axis.isApprox(Vector3d::UnitY()) &&
                      joints_[2].axis.isApprox(Vector3d::UnitZ()) && joints_[0].parent == -1 &&
                      joints_[1].parent == 0 && joints_[2].parent == 1 &&
                      joints_[0].owner == Owner::robot && joints_[1].owner == Owner::robot &&
                      joints_[2].owner == Owner::robot;
      if (!ok) {
        throw ConfigError(
            "invariant 'unicycle base' violated: the first three joints must be robot "
            "planar translations along x and y followed by a planar rotation about z");
      }
    }
  }

  int joint_count() const { return static_cast<int>(joints_.size()); }
  const std::vector<Joint>& joints() const { return joints_; }
  const Joint& joint(int i) const { return joints_.at(i); }
  BaseMode base_mode() const { return base_mode_; }
  const std::map<std::string, FrameAttachment>& frames() const { return frames_; }

  bool has_frame(const std::string& name) const { return frames_.count(name) > 0; }
  const FrameAttachment& frame(const std::string& name) const {
    auto it = frames_.find(name);
    if (it == frames_.end()) throw UnknownFrameError(name);
    return it->second;
  }

  const std::vector<int>& human_indices() const { return human_indices_; }
  const std::vector<int>& robot_indices() const { return robot_indices_; }
  int human_count() const { return static_cast<int>(human_indices_.size()); }
  int robot_count() const { return static_cast<int>(robot_indices_.size()); }

  /// Robot input dimension: robot joint rates, with the three unicycle
  /// coordinates replaced by (v, omega).
  int input_dim() const {
    return base_mode_ == BaseMode::unicycle ? robot_count() - 1 : robot_count();
  }

  /// True if joint `ancestor` is `joint` or lies on its path to the base.
  bool moves(int ancestor, int joint) const {
    for (int j = joint; j >= 0; j = joints_[j].parent) {
      if (j == ancestor) return true;
    }
    return false;
  }

  VectorXd gather(const VectorXd& q, Owner owner) const {
    const auto& idx = owner == Owner::human ? human_indices_ : robot_indices_;
    VectorXd out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = q[idx[k]];
    return out;
  }

  void scatter(VectorXd& q, Owner owner, const VectorXd& values) const {
    const auto& idx = owner == Owner::human ? human_indices_ : robot_indices_;
    for (std::size_t k = 0; k < idx.size(); ++k) q[idx[k]] = values[k];
  }

  void check_configuration(const VectorXd& q) const {
    if (q.size() != joint_count()) {
      throw DimensionError("joint vector has " + std::to_string(q.size()) +
                           " entries, chain has " + std::to_string(joint_count()) + " joints");
    }
  }

 private:
  std::vector<Joint> joints_;
  std::map<std::string, FrameAttachment> frames_;
  BaseMode base_mode_ = BaseMode::fixed;
  std::vector<int> human_indices_;
  std::vector<int> robot_indices_;
};

/// Pose of every joint's moving frame in the chain base frame.
inline std::vector<Pose> joint_poses(const KinematicChain& chain, const VectorXd& q) {
  chain.check_configuration(q);
  std::vector<Pose> poses(chain.joint_count());
  for (int i = 0; i < chain.joint_count(); ++i) {
    const Joint& j = chain.joint(i);
    const Pose parent = j.parent < 0 ? Pose::identity() : poses[j.parent];
    Pose motion;
    if (is_rotational(j.kind)) {
      motion.orientation = Eigen::AngleAxisd(q[i], j.axis).toRotationMatrix();
    } else {
      motion.position = j.axis * q[i];
    }
    poses[i] = parent * j.origin * motion;
  }
  return poses;
}

inline Pose attachment_pose(const std::vector<Pose>& poses, const FrameAttachment& f) {
  return f.joint < 0 ? f.offset : poses[f.joint] * f.offset;
}

inline Pose forward_kinematics(const KinematicChain& chain, const VectorXd& q,
                               const FrameAttachment& frame) {
  return attachment_pose(joint_poses(chain, q), frame);
}

inline Pose forward_kinematics(const KinematicChain& chain, const VectorXd& q,
                               const std::string& frame) {
  const FrameAttachment& f = chain.frame(frame);
  return forward_kinematics(chain, q, f);
}

inline bool owner_matches(Owner owner, OwnerFilter filter) {
  return filter == OwnerFilter::all || (filter == OwnerFilter::human && owner == Owner::human) ||
         (filter == OwnerFilter::robot && owner == Owner::robot);
}

/// 6 x k geometric Jacobian of an attached frame: rows 0-2 linear velocity,
/// rows 3-5 angular velocity, both in the chain base frame. Columns follow
/// joint index order among the joints selected by `filter`; joints that do
/// not move the frame give exactly zero columns.
inline MatrixXd geometric_jacobian(const KinematicChain& chain, const VectorXd& q,
                                   const FrameAttachment& frame, OwnerFilter filter) {
  const std::vector<Pose> poses = joint_poses(chain, q);
  const Vector3d p = attachment_pose(poses, frame).position;

  int cols = 0;
  for (const Joint& j : chain.joints()) cols += owner_matches(j.owner, filter) ? 1 : 0;
  MatrixXd J = MatrixXd::Zero(6, cols);

  int c = 0;
  for (int i = 0; i < chain.joint_count(); ++i) {
    const Joint& j = chain.joint(i);
    if (!owner_matches(j.owner, filter)) continue;
    if (frame.joint >= 0 && chain.moves(i, frame.joint)) {
      // The axis is invariant under the joint's own motion.
      const Vector3d z = poses[i].orientation * j.axis;
      if (is_rotational(j.kind)) {
        J.block<3, 1>(0, c) = z.cross(p - poses[i].position);
        J.block<3, 1>(3, c) = z;
      } else {
        J.block<3, 1>(0, c) = z;
      }
    }
    ++c;
  }
  return J;
}

inline MatrixXd geometric_jacobian(const KinematicChain& chain, const VectorXd& q,
                                   const std::string& frame, OwnerFilter filter) {
  return geometric_jacobian(chain, q, chain.frame(frame), filter);
}

/// (v, omega) -> (x_dot, y_dot, theta_dot) for a unicycle heading theta.
inline Eigen::Matrix<double, 3, 2> unicycle_velocity_map(double theta) {
  Eigen::Matrix<double, 3, 2> M;
  M << std::cos(theta), 0.0, std::sin(theta), 0.0, 0.0, 1.0;
  return M;
}

/// Map from the robot input vector u to robot joint rates q_r_dot. Identity
/// for a fixed base; for a unicycle base the first two inputs are (v, omega).
inline MatrixXd robot_input_map(const KinematicChain& chain, const VectorXd& q) {
  const int nr = chain.robot_count();
  if (chain.base_mode() == BaseMode::fixed) return MatrixXd::Identity(nr, nr);
  MatrixXd M = MatrixXd::Zero(nr, nr - 1);
  M.topLeftCorner<3, 2>() = unicycle_velocity_map(q[2]);
  M.bottomRightCorner(nr - 3, nr - 3).setIdentity();
  return M;
}

/// 6 x n_u Jacobian of a frame with respect to the robot inputs.
inline MatrixXd input_jacobian(const KinematicChain& chain, const VectorXd& q,
                               const FrameAttachment& frame) {
  return geometric_jacobian(chain, q, frame, OwnerFilter::robot) * robot_input_map(chain, q);
}

}  // namespace compensctrl
