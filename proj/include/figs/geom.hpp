// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Quaternions, rigid transforms and the pinhole camera.
//
// Conventions used everywhere in figs:
//  * Hamilton quaternions stored as (x, y, z, w).
//  * A quaternion q_AB rotates vectors from frame A coordinates into frame B
//    coordinates, R(q_AB) v_A = v_B. The drone attitude q_BW therefore maps
//    body-frame vectors into the world frame and z_B = R(q_BW) e_z.
//  * World frame: gravity acts along +z (z down).
//  * Camera frame: +z is the optical axis, x right, y down.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>

namespace figs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = 3.14159265358979323846;

struct Quat {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;

  static constexpr Quat identity() { return {0.0, 0.0, 0.0, 1.0}; }

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n == 0.0) return identity();
    const Vec3 a = axis / n;
    const double s = std::sin(0.5 * angle);
    return {a.x() * s, a.y() * s, a.z() * s, std::cos(0.5 * angle)};
  }

  /// Rotation vector (axis * angle) to quaternion.
  static Quat exp(const Vec3& rotvec) {
    const double angle = rotvec.norm();
    if (angle < 1e-12) {
      Quat q{0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z(), 1.0};
      return q.normalized();
    }
    return from_axis_angle(rotvec, angle);
  }

  static Quat from_coeffs(const Vec4& c) { return {c[0], c[1], c[2], c[3]}; }
  Vec4 coeffs() const { return {x, y, z, w}; }
  Vec3 vec() const { return {x, y, z}; }

  double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }
  Quat normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n, w / n};
  }
  Quat conjugate() const { return {-x, -y, -z, w}; }
  /// Representative with w >= 0.
  Quat canonical() const { return w < 0.0 ? Quat{-x, -y, -z, -w} : *this; }
  double dot(const Quat& o) const { return x * o.x + y * o.y + z * o.z + w * o.w; }

  Mat3 to_matrix() const {
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
        2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
        2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
    return r;
  }

  static Quat from_matrix(const Mat3& m) {
    // Shepperd's method, picking the largest diagonal term for stability.
    const double tr = m.trace();
    Quat q;
    if (tr > m(0, 0) && tr > m(1, 1) && tr > m(2, 2)) {
      const double s = 2.0 * std::sqrt(1.0 + tr);
      q = {(m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s, 0.25 * s};
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
      const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
      q = {0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s, (m(2, 1) - m(1, 2)) / s};
    } else if (m(1, 1) > m(2, 2)) {
      const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
      q = {(m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s, (m(0, 2) - m(2, 0)) / s};
    } else {
      const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
      q = {(m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s, (m(1, 0) - m(0, 1)) / s};
    }
    return q.normalized().canonical();
  }

  bool is_finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(w);
  }
};

/// Hamilton product a ⊗ b.
inline Quat quat_multiply(const Quat& a, const Quat& b) {
  return {a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
          a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z};
}

inline Quat operator*(const Quat& a, const Quat& b) { return quat_multiply(a, b); }

/// R(q) v for unit q, evaluated as v + 2w(u×v) + 2u×(u×v).
inline Vec3 rotate_vector(const Quat& q, const Vec3& v) {
  const Vec3 u = q.vec();
  const Vec3 t = 2.0 * u.cross(v);
  return v + q.w * t + u.cross(t);
}

/// Angle of the rotation taking a to b, in [0, pi].
inline double angle_between(const Quat& a, const Quat& b) {
  const double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

/// Maps child-frame points into the parent frame: p_parent = R p_child + t.
struct RigidTransform {
  Quat rotation = Quat::identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotate_vector(rotation, p) + translation; }

  RigidTransform inverse() const {
    const Quat inv = rotation.conjugate();
    return {inv, -rotate_vector(inv, translation)};
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation.to_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

/// (a ∘ b)(p) = a(b(p)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {(a.rotation * b.rotation).normalized(), a.apply(b.translation)};
}

/// Position and attitude of a frame expressed in the world frame.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::identity();

  RigidTransform as_transform() const { return {orientation, position}; }
  static Pose from_transform(const RigidTransform& t) { return {t.translation, t.rotation}; }
};

/// Camera pose in the world given the body pose and T_C^B, the camera pose
/// expressed in the body frame.
inline Pose body_camera_pose(const Pose& body, const RigidTransform& camera_in_body) {
  return Pose::from_transform(compose(body.as_transform(), camera_in_body));
}

struct CameraIntrinsics {
  double fx = 320.0;
  double fy = 320.0;
  double cx = 320.0;
  double cy = 180.0;
  int width = 640;
  int height = 360;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx > 0.0 && cx < width &&
           cy > 0.0 && cy < height;
  }
};

struct PixelProjection {
  Vec2 pixel;
  double depth = 0.0;
};

/// Pinhole projection of a camera-frame point; empty when the point is not in
/// front of the camera.
inline std::optional<PixelProjection> project_point(const Vec3& p_cam, const CameraIntrinsics& k) {
  if (!(p_cam.z() > 0.0)) return std::nullopt;
  const double inv_z = 1.0 / p_cam.z();
  return PixelProjection{{k.fx * p_cam.x() * inv_z + k.cx, k.fy * p_cam.y() * inv_z + k.cy},
                         p_cam.z()};
}

/// Forward-looking camera mount for a forward-right-down body frame: optical
/// axis along body +x, image right along body +y, image down along body +z.
inline RigidTransform forward_camera_mount(double forward_offset) {
  Mat3 r;
  r.col(0) = Vec3::UnitY();
  r.col(1) = Vec3::UnitZ();
  r.col(2) = Vec3::UnitX();
  return {Quat::from_matrix(r), Vec3(forward_offset, 0.0, 0.0)};
}

}  // namespace figs
