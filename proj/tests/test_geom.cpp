// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

#include "figs/geom.hpp"

#include <gtest/gtest.h>

#include <random>

namespace figs {
namespace {

// Rotation matrix built from axis-angle via Rodrigues, independent of the
// quaternion code under test.
Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  Mat3 k;
  k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
}

Quat random_unit(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quat{n(gen), n(gen), n(gen), n(gen)}.normalized();
}

TEST(QuatMultiply, IdentityIsNeutral) {
  const Quat q = Quat{0.1, -0.4, 0.3, 0.8}.normalized();
  const Quat r = Quat::identity() * q;
  EXPECT_DOUBLE_EQ(r.x, q.x);
  EXPECT_DOUBLE_EQ(r.y, q.y);
  EXPECT_DOUBLE_EQ(r.z, q.z);
  EXPECT_DOUBLE_EQ(r.w, q.w);
}

TEST(QuatMultiply, ConjugateGivesIdentity) {
  const Quat q = Quat{0.1, -0.4, 0.3, 0.8}.normalized();
  const Quat r = q * q.conjugate();
  EXPECT_NEAR(r.x, 0.0, 1e-15);
  EXPECT_NEAR(r.y, 0.0, 1e-15);
  EXPECT_NEAR(r.z, 0.0, 1e-15);
  EXPECT_NEAR(r.w, 1.0, 1e-15);
}

TEST(QuatMultiply, TwoQuarterTurnsAboutZ) {
  const Quat q = Quat::from_axis_angle(Vec3::UnitZ(), kPi / 2);
  const Quat r = q * q;
  const Mat3 oracle = rodrigues(Vec3::UnitZ(), kPi / 2) * rodrigues(Vec3::UnitZ(), kPi / 2);
  EXPECT_LT((r.to_matrix() - oracle).norm(), 1e-12);
  const Vec3 v = rotate_vector(r, Vec3::UnitX());
  EXPECT_NEAR(v.x(), -1.0, 1e-12);
  EXPECT_NEAR(v.y(), 0.0, 1e-12);
  EXPECT_NEAR(v.z(), 0.0, 1e-12);
}

TEST(QuatMultiply, MatchesMatrixProductAndNormIsMultiplicative) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Quat a{n(gen), n(gen), n(gen), n(gen)};
    const Quat b{n(gen), n(gen), n(gen), n(gen)};
    EXPECT_NEAR((a * b).norm(), a.norm() * b.norm(), 1e-12 * a.norm() * b.norm());
    const Quat ua = a.normalized(), ub = b.normalized();
    EXPECT_LT(((ua * ub).to_matrix() - ua.to_matrix() * ub.to_matrix()).norm(), 1e-12);
  }
}

TEST(QuatMultiply, Associative) {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 500; ++i) {
    const Quat a = random_unit(gen), b = random_unit(gen), c = random_unit(gen);
    const Vec4 lhs = ((a * b) * c).coeffs();
    const Vec4 rhs = (a * (b * c)).coeffs();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RotateVector, Identity) {
  const Vec3 v = rotate_vector(Quat::identity(), Vec3(1, 2, 3));
  EXPECT_EQ(v, Vec3(1, 2, 3));
}

TEST(RotateVector, QuarterTurnAboutZ) {
  const Vec3 v = rotate_vector(Quat::from_axis_angle(Vec3::UnitZ(), kPi / 2), Vec3::UnitX());
  EXPECT_NEAR(v.x(), 0.0, 1e-15);
  EXPECT_NEAR(v.y(), 1.0, 1e-15);
  EXPECT_NEAR(v.z(), 0.0, 1e-15);
}

TEST(RotateVector, MatchesRodriguesAndPreservesGeometry) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 500; ++i) {
    const Vec3 axis(n(gen), n(gen), n(gen));
    const double angle = ang(gen);
    const Quat q = Quat::from_axis_angle(axis, angle);
    const Vec3 v(n(gen), n(gen), n(gen));
    const Vec3 w(n(gen), n(gen), n(gen));
    const Vec3 rv = rotate_vector(q, v);
    EXPECT_LT((rv - rodrigues(axis, angle) * v).norm(), 1e-12);
    EXPECT_NEAR(rv.norm(), v.norm(), 1e-9);
    EXPECT_NEAR(rv.dot(rotate_vector(q, w)), v.dot(w), 1e-9);
  }
}

TEST(Quat, MatrixRoundTripAndCanonical) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 200; ++i) {
    const Quat q = random_unit(gen);
    const Quat r = Quat::from_matrix(q.to_matrix());
    EXPECT_GE(r.w, 0.0);
    EXPECT_LT((r.coeffs() - q.canonical().coeffs()).norm(), 1e-9);
    EXPECT_NEAR(r.norm(), 1.0, 1e-9);
  }
}

TEST(RigidTransform, InverseAndAssociativity) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform a{random_unit(gen), {n(gen), n(gen), n(gen)}};
    const RigidTransform b{random_unit(gen), {n(gen), n(gen), n(gen)}};
    const RigidTransform c{random_unit(gen), {n(gen), n(gen), n(gen)}};
    const RigidTransform id = compose(a, a.inverse());
    EXPECT_LT(id.translation.norm(), 1e-9);
    EXPECT_LT(angle_between(id.rotation, Quat::identity()), 1e-7);
    const Mat4 lhs = compose(compose(a, b), c).matrix();
    const Mat4 rhs = compose(a, compose(b, c)).matrix();
    EXPECT_LT((lhs - rhs).norm(), 1e-9);
  }
}

TEST(BodyCameraPose, IdentityMount) {
  const Pose body{{1, 2, 3}, Quat::from_axis_angle(Vec3(1, 1, 0), 0.3)};
  const Pose cam = body_camera_pose(body, RigidTransform::identity());
  EXPECT_LT((cam.position - body.position).norm(), 1e-15);
  EXPECT_LT(angle_between(cam.orientation, body.orientation), 1e-7);
}

// Homogeneous-matrix oracle: T_WC = T_WB * T_BC.
Mat4 homogeneous(const Mat3& r, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

TEST(BodyCameraPose, PureTranslationMount) {
  const Vec3 axis(0.2, -0.5, 1.0);
  const double angle = 0.7;
  const Pose body{{1, -2, 0.5}, Quat::from_axis_angle(axis, angle)};
  const RigidTransform mount{Quat::identity(), {0, 0, -0.05}};
  const Mat4 oracle = homogeneous(rodrigues(axis, angle), body.position) *
                      homogeneous(Mat3::Identity(), mount.translation);
  const Pose cam = body_camera_pose(body, mount);
  EXPECT_LT((cam.position - oracle.topRightCorner<3, 1>()).norm(), 1e-12);
  EXPECT_LT((cam.orientation.to_matrix() - oracle.topLeftCorner<3, 3>()).norm(), 1e-12);
}

TEST(BodyCameraPose, HalfTurnYawMount) {
  const Pose body{{3, 4, -1}, Quat::from_axis_angle(Vec3::UnitZ(), kPi)};
  const RigidTransform mount{Quat::identity(), {0.1, 0, 0}};
  const Mat4 oracle = homogeneous(rodrigues(Vec3::UnitZ(), kPi), body.position) *
                      homogeneous(Mat3::Identity(), mount.translation);
  const Pose cam = body_camera_pose(body, mount);
  EXPECT_LT((cam.position - oracle.topRightCorner<3, 1>()).norm(), 1e-12);
  EXPECT_LT((cam.position - Vec3(2.9, 4, -1)).norm(), 1e-12);
}

TEST(BodyCameraPose, CompositionConsistency) {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Pose body{{n(gen), n(gen), n(gen)}, random_unit(gen)};
    const RigidTransform t1{random_unit(gen), {n(gen), n(gen), n(gen)}};
    const RigidTransform t2{random_unit(gen), {n(gen), n(gen), n(gen)}};
    const Pose direct = body_camera_pose(body, compose(t1, t2));
    const Pose chained = body_camera_pose(body_camera_pose(body, t1), t2);
    EXPECT_LT((direct.position - chained.position).norm(), 1e-9);
    EXPECT_LT((direct.orientation.to_matrix() - chained.orientation.to_matrix()).norm(), 1e-9);
  }
}

TEST(ProjectPoint, OpticalAxis) {
  const CameraIntrinsics k{100, 100, 160, 120, 320, 240};
  const auto p = project_point({0, 0, 1}, k);
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->pixel.x(), 160.0);
  EXPECT_DOUBLE_EQ(p->pixel.y(), 120.0);
  EXPECT_DOUBLE_EQ(p->depth, 1.0);
}

TEST(ProjectPoint, LinearOffset) {
  const CameraIntrinsics k{100, 100, 160, 120, 320, 240};
  EXPECT_DOUBLE_EQ(project_point({0.5, 0, 1}, k)->pixel.x(), 210.0);
}

TEST(ProjectPoint, BehindCameraIsNotVisible) {
  const CameraIntrinsics k{100, 100, 160, 120, 320, 240};
  EXPECT_FALSE(project_point({0, 0, -1}, k));
  EXPECT_FALSE(project_point({0, 0, 0}, k));
}

TEST(ProjectPoint, MatchesProjectionMatrix) {
  const CameraIntrinsics k{412.5, 398.0, 321.0, 177.0, 640, 360};
  Eigen::Matrix<double, 3, 4> p = Eigen::Matrix<double, 3, 4>::Zero();
  p(0, 0) = k.fx;
  p(0, 2) = k.cx;
  p(1, 1) = k.fy;
  p(1, 2) = k.cy;
  p(2, 2) = 1.0;
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-3, 3), d(0.1, 20);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x(u(gen), u(gen), d(gen));
    const Eigen::Vector3d h = p * x.homogeneous();
    const auto proj = project_point(x, k);
    ASSERT_TRUE(proj);
    EXPECT_NEAR(proj->pixel.x(), h.x() / h.z(), 1e-9);
    EXPECT_NEAR(proj->pixel.y(), h.y() / h.z(), 1e-9);
  }
}

TEST(ForwardCameraMount, OpticalAxisIsBodyForward) {
  const RigidTransform m = forward_camera_mount(0.05);
  EXPECT_LT((rotate_vector(m.rotation, Vec3::UnitZ()) - Vec3::UnitX()).norm(), 1e-12);
  EXPECT_LT((rotate_vector(m.rotation, Vec3::UnitX()) - Vec3::UnitY()).norm(), 1e-12);
  EXPECT_LT((rotate_vector(m.rotation, Vec3::UnitY()) - Vec3::UnitZ()).norm(), 1e-12);
}

}  // namespace
}  // namespace figs
