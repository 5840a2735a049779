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

#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "test_support.hpp"

namespace compensctrl {
namespace {

using testing::avatar_chain;
using testing::planar_chain;
using testing::prosthesis_chain;

Matrix3d Rz(double a) { return Eigen::AngleAxisd(a, Vector3d::UnitZ()).toRotationMatrix(); }

VectorXd random_q(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  VectorXd q(n);
  for (int i = 0; i < n; ++i) q[i] = d(rng);
  return q;
}

// Central differences over all joints; rotation rows from the relative
// rotation across the step.
MatrixXd numeric_jacobian(const KinematicChain& chain, const VectorXd& q, const std::string& frame) {
  const double h = 1e-6;
  MatrixXd J(6, chain.joint_count());
  for (int i = 0; i < chain.joint_count(); ++i) {
    VectorXd qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Pose a = forward_kinematics(chain, qp, frame);
    const Pose b = forward_kinematics(chain, qm, frame);
    J.col(i).head<3>() = (a.position - b.position) / (2 * h);
    const Eigen::AngleAxisd rel(a.orientation * b.orientation.transpose());
    J.col(i).tail<3>() = rel.angle() * rel.axis() / (2 * h);
  }
  return J;
}

TEST(Rotation, ExpLogRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    Vector3d v(d(rng), d(rng), d(rng));
    v *= 2.5 / std::max(1.0, v.norm());
    EXPECT_LT((rotation_log(rotation_exp(v)) - v).norm(), 1e-12);
  }
  EXPECT_TRUE(rotation_exp(Vector3d::Zero()).isIdentity(0.0));
}

TEST(Rotation, RpyIsYawPitchRoll) {
  const Vector3d rpy(0.1, -0.4, 0.7);
  const Matrix3d expected = Rz(0.7) * Eigen::AngleAxisd(-0.4, Vector3d::UnitY()).toRotationMatrix() *
                            Eigen::AngleAxisd(0.1, Vector3d::UnitX()).toRotationMatrix();
  EXPECT_TRUE(rpy_to_rotation(rpy).isApprox(expected, 1e-14));
}

TEST(PoseTest, InverseComposesToIdentity) {
  const Pose p = Pose::from_xyz_rpy({0.3, -1.2, 0.5}, {0.2, 0.9, -2.1});
  const Pose e = p * p.inverse();
  EXPECT_LT(e.position.norm(), 1e-15);
  EXPECT_TRUE(e.orientation.isIdentity(1e-15));
}

TEST(PoseError, IdentityIsZero) {
  const Pose p = Pose::from_xyz_rpy({1, 2, 3}, {0.3, 0.2, 0.1});
  EXPECT_LT(pose_error(p, p).stacked().norm(), 1e-15);
}

TEST(PoseError, TranslationOffset) {
  const ErrorVec6 e = pose_error(Pose::translation({0.15, 0.2, -0.1}), Pose::identity());
  EXPECT_EQ(e.translation, Vector3d(0.15, 0.2, -0.1));
  EXPECT_EQ(e.rotation, Vector3d::Zero());
}

TEST(PoseError, SingleAxisRotation) {
  const ErrorVec6 e = pose_error(Pose({0, 0, 0}, Rz(0.5)), Pose::identity());
  EXPECT_LT((e.rotation - Vector3d(0, 0, 0.5)).norm(), 1e-15);
}

TEST(PoseError, RotationNormBoundedByPi) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-4.0, 4.0);
  for (int k = 0; k < 100; ++k) {
    const Pose a = Pose::from_xyz_rpy({0, 0, 0}, {d(rng), d(rng), d(rng)});
    const Pose b = Pose::from_xyz_rpy({0, 0, 0}, {d(rng), d(rng), d(rng)});
    EXPECT_LE(pose_error(a, b).rotation.norm(), M_PI + 1e-12);
  }
}

TEST(ForwardKinematics, SingleRevoluteJoint) {
  const KinematicChain chain = planar_chain({Owner::robot});
  VectorXd q(1);
  q << 0.0;
  Pose x = forward_kinematics(chain, q, kEndEffectorFrame);
  EXPECT_LT((x.position - Vector3d(1, 0, 0)).norm(), 1e-15);
  EXPECT_TRUE(x.orientation.isIdentity(0.0));

  q << M_PI / 2;
  x = forward_kinematics(chain, q, kEndEffectorFrame);
  EXPECT_LT((x.position - Vector3d(0, 1, 0)).norm(), 1e-15);
  EXPECT_TRUE(x.orientation.isApprox(Rz(M_PI / 2), 1e-15));
}

TEST(ForwardKinematics, ProsthesisHomePose) {
  // Shoulder at (0, -0.25, 0.47); upper arm 0.32 pitched by 0.2 rad, forearm
  // plus hand 0.38 pitched by 1.8 rad.
  VectorXd q = VectorXd::Zero(13);
  q[6] = -0.2;
  q[9] = -1.6;
  const Pose x = forward_kinematics(prosthesis_chain(), q, kEndEffectorFrame);
  EXPECT_NEAR(x.position.x(), 0.4336362855881338, 1e-12);
  EXPECT_NEAR(x.position.y(), -0.25, 1e-12);
  EXPECT_NEAR(x.position.z(), 0.24271549107417575, 1e-12);
}

TEST(ForwardKinematics, ProsthesisMatchesTransformProduct) {
  // Joint table written out independently of the chain file.
  struct Row {
    bool revolute;
    Vector3d axis, offset;
  };
  const Row table[] = {
      {true, Vector3d::UnitZ(), {0, 0, 0}},     {true, Vector3d::UnitY(), {0, 0, 0}},
      {true, Vector3d::UnitX(), {0, 0, 0}},     {false, Vector3d::UnitX(), {0, -0.05, 0.45}},
      {false, Vector3d::UnitZ(), {0, -0.10, 0.02}}, {true, Vector3d::UnitX(), {0, -0.05, 0}},
      {true, Vector3d::UnitY(), {0, -0.05, 0}}, {true, Vector3d::UnitX(), {0, 0, 0}},
      {true, Vector3d::UnitZ(), {0, 0, 0}},     {true, Vector3d::UnitY(), {0, 0, -0.32}},
      {true, Vector3d::UnitZ(), {0, 0, -0.28}}, {true, Vector3d::UnitY(), {0, 0, 0}},
      {true, Vector3d::UnitX(), {0, 0, 0}},
  };
  const KinematicChain chain = prosthesis_chain();
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const VectorXd q = random_q(13, rng);
    Eigen::Affine3d T = Eigen::Affine3d::Identity();
    for (int i = 0; i < 13; ++i) {
      T = T * Eigen::Translation3d(table[i].offset);
      if (table[i].revolute) {
        T = T * Eigen::AngleAxisd(q[i], table[i].axis);
      } else {
        T = T * Eigen::Translation3d(q[i] * table[i].axis);
      }
    }
    T = T * Eigen::Translation3d(0, 0, -0.10);
    const Pose x = forward_kinematics(chain, q, kEndEffectorFrame);
    EXPECT_LT((x.position - T.translation()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((x.orientation - T.linear()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(x.orthogonality_defect(), 1e-9);
  }
}

TEST(ForwardKinematics, Errors) {
  const KinematicChain chain = planar_chain({Owner::robot, Owner::robot});
  EXPECT_THROW(forward_kinematics(chain, VectorXd::Zero(3), kEndEffectorFrame), DimensionError);
  EXPECT_THROW(forward_kinematics(chain, VectorXd::Zero(2), "elbow"), UnknownFrameError);
}

TEST(GeometricJacobian, PlanarLever) {
  const KinematicChain chain = planar_chain({Owner::robot});
  const MatrixXd J = geometric_jacobian(chain, VectorXd::Zero(1), kEndEffectorFrame, OwnerFilter::all);
  Vector6d expected;
  expected << 0, 1, 0, 0, 0, 1;
  EXPECT_LT((J.col(0) - expected).norm(), 1e-15);
}

TEST(GeometricJacobian, PlanarTwoLinkMatchesFiniteDifferences) {
  const KinematicChain chain = planar_chain({Owner::human, Owner::robot});
  VectorXd q(2);
  q << 0.3, 0.7;
  const MatrixXd J = geometric_jacobian(chain, q, kEndEffectorFrame, OwnerFilter::all);
  EXPECT_LT((J - numeric_jacobian(chain, q, kEndEffectorFrame)).cwiseAbs().maxCoeff(), 1e-6);
  // Closed form for the tip: x = cos a + cos(a+b), y = sin a + sin(a+b).
  EXPECT_NEAR(J(0, 0), -std::sin(0.3) - std::sin(1.0), 1e-14);
  EXPECT_NEAR(J(1, 0), std::cos(0.3) + std::cos(1.0), 1e-14);
  EXPECT_NEAR(J(0, 1), -std::sin(1.0), 1e-14);
  EXPECT_NEAR(J(1, 1), std::cos(1.0), 1e-14);
}

TEST(GeometricJacobian, OwnerFilterSelectsColumns) {
  const KinematicChain chain = planar_chain({Owner::human, Owner::robot, Owner::human});
  VectorXd q(3);
  q << 0.2, -0.4, 0.9;
  const MatrixXd all = geometric_jacobian(chain, q, kEndEffectorFrame, OwnerFilter::all);
  const MatrixXd h = geometric_jacobian(chain, q, kEndEffectorFrame, OwnerFilter::human);
  const MatrixXd r = geometric_jacobian(chain, q, kEndEffectorFrame, OwnerFilter::robot);
  ASSERT_EQ(h.cols(), 2);
  ASSERT_EQ(r.cols(), 1);
  EXPECT_EQ(h.col(0), all.col(0));
  EXPECT_EQ(h.col(1), all.col(2));
  EXPECT_EQ(r.col(0), all.col(1));
}

TEST(GeometricJacobian, CompensationFrameUnaffectedByRobot) {
  std::mt19937_64 rng(7);
  for (const KinematicChain& chain : {prosthesis_chain(), avatar_chain()}) {
    for (int k = 0; k < 10; ++k) {
      const VectorXd q = random_q(chain.joint_count(), rng);
      const MatrixXd J = geometric_jacobian(chain, q, kCompensationFrame, OwnerFilter::robot);
      EXPECT_TRUE(J.isZero(0.0));
    }
  }
}

TEST(GeometricJacobian, DistalColumnsExactlyZero) {
  const KinematicChain chain = prosthesis_chain();
  std::mt19937_64 rng(9);
  const VectorXd q = random_q(13, rng);
  // The compensation frame hangs off joint 5; joints 6..12 are distal.
  const MatrixXd J = geometric_jacobian(chain, q, kCompensationFrame, OwnerFilter::all);
  EXPECT_TRUE(J.rightCols(7).isZero(0.0));
  EXPECT_FALSE(J.leftCols(6).isZero(0.0));
}

TEST(GeometricJacobian, MatchesFiniteDifferencesOnShippedChains) {
  std::mt19937_64 rng(13);
  for (const KinematicChain& chain : {prosthesis_chain(), avatar_chain()}) {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const VectorXd q = random_q(chain.joint_count(), rng);
      for (const char* f : {kEndEffectorFrame, kCompensationFrame}) {
        const MatrixXd J = geometric_jacobian(chain, q, f, OwnerFilter::all);
        worst = std::max(worst, (J - numeric_jacobian(chain, q, f)).cwiseAbs().maxCoeff());
      }
    }
    EXPECT_LT(worst, 1e-6);
  }
}

TEST(Unicycle, AlignedAndQuarterTurn) {
  Eigen::Matrix<double, 3, 2> expected;
  expected << 1, 0, 0, 0, 0, 1;
  EXPECT_TRUE(unicycle_velocity_map(0.0).isApprox(expected, 0.0));
  expected << 0, 0, 1, 0, 0, 1;
  EXPECT_LT((unicycle_velocity_map(M_PI / 2) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Unicycle, MatchesOdeStep) {
  // Integrate x' = v cos th, y' = v sin th, th' = w with tiny steps, v = 1,
  // w = 0, starting at th = 0.3; the average velocity is column 0.
  const double theta = 0.3, h = 1e-4;
  Vector3d s(0, 0, theta);
  for (int k = 0; k < 100; ++k) s += h * Vector3d(std::cos(s.z()), std::sin(s.z()), 0.0);
  const Vector3d rate = (s - Vector3d(0, 0, theta)) / (100 * h);
  EXPECT_LT((unicycle_velocity_map(theta).col(0) - rate).norm(), 1e-12);
}

TEST(Unicycle, RankTwoForAllHeadings) {
  for (double th = -M_PI; th <= M_PI; th += 0.1) {
    Eigen::FullPivLU<Eigen::Matrix<double, 3, 2>> lu(unicycle_velocity_map(th));
    EXPECT_EQ(lu.rank(), 2);
    // Lateral velocity (-sin, cos, 0) is never reachable.
    const Vector3d lateral(-std::sin(th), std::cos(th), 0.0);
    EXPECT_LT((lateral.transpose() * unicycle_velocity_map(th)).norm(), 1e-15);
  }
}

TEST(Unicycle, InputJacobianComposesVelocityMap) {
  const KinematicChain chain = avatar_chain();
  std::mt19937_64 rng(17);
  const VectorXd q = random_q(chain.joint_count(), rng);
  const FrameAttachment& ee = chain.frame(kEndEffectorFrame);
  const MatrixXd Jr = geometric_jacobian(chain, q, ee, OwnerFilter::robot);
  const MatrixXd Ju = input_jacobian(chain, q, ee);
  ASSERT_EQ(Ju.cols(), chain.input_dim());
  EXPECT_TRUE(Ju.leftCols(2).isApprox(Jr.leftCols(3) * unicycle_velocity_map(q[2]), 1e-14));
  EXPECT_EQ(Ju.rightCols(5), Jr.rightCols(5));
}

TEST(ChainInvariants, NonUnitAxisNamed) {
  std::vector<Joint> joints(1);
  joints[0].axis = Vector3d(0, 0, 1.01);
  std::map<std::string, FrameAttachment> frames{{kEndEffectorFrame, {0, {}}},
                                                {kCompensationFrame, {-1, {}}}};
  try {
    KinematicChain chain(joints, frames);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("joint axis unit norm"), std::string::npos);
  }
}

TEST(ChainInvariants, RequiredFramesNamed) {
  std::vector<Joint> joints(1);
  std::map<std::string, FrameAttachment> frames{{kEndEffectorFrame, {0, {}}}};
  try {
    KinematicChain chain(joints, frames);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("required frames"), std::string::npos);
  }
}

TEST(ChainInvariants, UnicycleBaseShapeChecked) {
  std::vector<Joint> joints(3);
  for (Joint& j : joints) j.kind = JointKind::planar_translation;
  joints[1].axis = Vector3d::UnitY();
  joints[1].parent = 0;
  joints[2].parent = 1;
  std::map<std::string, FrameAttachment> frames{{kEndEffectorFrame, {2, {}}},
                                                {kCompensationFrame, {-1, {}}}};
  try {
    KinematicChain chain(joints, frames, BaseMode::unicycle);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unicycle base"), std::string::npos);
  }
}

TEST(ChainInvariants, OwnerPartition) {
  const KinematicChain chain = avatar_chain();
  EXPECT_EQ(chain.human_count() + chain.robot_count(), chain.joint_count());
  EXPECT_EQ(chain.human_count(), 6);
  EXPECT_EQ(chain.input_dim(), 7);
  VectorXd q = VectorXd::LinSpaced(chain.joint_count(), 0, 13);
  VectorXd back = VectorXd::Zero(chain.joint_count());
  chain.scatter(back, Owner::human, chain.gather(q, Owner::human));
  chain.scatter(back, Owner::robot, chain.gather(q, Owner::robot));
  EXPECT_EQ(back, q);
}

TEST(ChainIo, MalformedChainIsConfigError) {
  EXPECT_THROW(chain_from_json(nlohmann::json::parse(R"({"joints": []})")), ConfigError);
  EXPECT_THROW(chain_from_json(nlohmann::json::parse(
                   R"({"joints": [{"kind": "screw", "axis": [0,0,1], "owner": "robot"}],
                       "frames": {}})")),
               ConfigError);
}

TEST(ForwardKinematics, OrientationStaysOrthogonal) {
  const KinematicChain chain = avatar_chain();
  std::mt19937_64 rng(19);
  VectorXd q = VectorXd::Zero(chain.joint_count());
  const VectorXd rate = random_q(chain.joint_count(), rng);
  for (int k = 0; k < 2000; ++k) {
    q += 1e-2 * rate;
    for (const char* f : {kEndEffectorFrame, kCompensationFrame}) {
      EXPECT_LT(forward_kinematics(chain, q, f).orthogonality_defect(), 1e-9);
    }
  }
}

}  // namespace
}  // namespace compensctrl
