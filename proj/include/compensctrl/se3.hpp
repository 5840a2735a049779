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

// Rigid-body frames and 6-component pose errors.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace compensctrl {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector12d = Eigen::Matrix<double, 12, 1>;
using Matrix12d = Eigen::Matrix<double, 12, 12>;

/// Rotation matrix from a rotation vector (axis * angle).
inline Matrix3d rotation_exp(const Vector3d& rotvec) {
  const double angle = rotvec.norm();
  if (angle == 0.0) return Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, rotvec / angle).toRotationMatrix();
}

/// Rotation vector of R, with angle in [0, pi].
inline Vector3d rotation_log(const Matrix3d& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

/// URDF convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Matrix3d rpy_to_rotation(const Vector3d& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vector3d::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vector3d::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vector3d::UnitX()))
      .toRotationMatrix();
}

struct Pose {
  Vector3d position = Vector3d::Zero();
  Matrix3d orientation = Matrix3d::Identity();

  Pose() = default;
  Pose(const Vector3d& p, const Matrix3d& R) : position(p), orientation(R) {}

  static Pose identity() { return {}; }
  static Pose translation(const Vector3d& p) { return {p, Matrix3d::Identity()}; }
  static Pose from_xyz_rpy(const Vector3d& xyz, const Vector3d& rpy) {
    return {xyz, rpy_to_rotation(rpy)};
  }

  Pose operator*(const Pose& rhs) const {
    return {position + orientation * rhs.position, orientation * rhs.orientation};
  }

  Pose inverse() const {
    const Matrix3d Rt = orientation.transpose();
    return {-Rt * position, Rt};
  }

  /// ||R^T R - I||_inf.
  double orthogonality_defect() const {
    return (orientation.transpose() * orientation - Matrix3d::Identity()).cwiseAbs().maxCoeff();
  }
};

/// Pose error with translation in meters and rotation as a rotation vector
/// of the relative rotation (radians, norm <= pi).
struct ErrorVec6 {
  Vector3d translation = Vector3d::Zero();
  Vector3d rotation = Vector3d::Zero();

  ErrorVec6() = default;
  ErrorVec6(const Vector3d& t, const Vector3d& r) : translation(t), rotation(r) {}
  explicit ErrorVec6(const Vector6d& v) : translation(v.head<3>()), rotation(v.tail<3>()) {}

  Vector6d stacked() const {
    Vector6d v;
    v << translation, rotation;
    return v;
  }
};

/// desired - actual: translation difference and log(R_desired * R_actual^T),
/// both expressed in the common reference frame.
inline ErrorVec6 pose_error(const Pose& desired, const Pose& actual) {
  return {desired.position - actual.position,
          rotation_log(desired.orientation * actual.orientation.transpose())};
}

}  // namespace compensctrl
