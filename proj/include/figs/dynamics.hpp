// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// 10-D semi-kinematic quadrotor model driven by collective thrust and body
// rates:
//
//   p' = v
//   v' = g z_W - (k_th f_th / m_dr) z_B
//   q' = 1/2 W(w_B) q_BW
//
// Rotational dynamics are not modelled; the body-rate inner loop is assumed
// ideal.
#pragma once

#include "figs/geom.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace figs {

inline constexpr double kGravity = 9.81;

inline constexpr int kStateDim = 10;
inline constexpr int kInputDim = 4;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using InputVec = Eigen::Matrix<double, kInputDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMat = Eigen::Matrix<double, kInputDim, kInputDim>;
using StateInputMat = Eigen::Matrix<double, kStateDim, kInputDim>;

struct DroneState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::identity();

  /// Layout (px, py, pz, vx, vy, vz, qx, qy, qz, qw).
  StateVec vector() const {
    StateVec s;
    s << position, velocity, attitude.x, attitude.y, attitude.z, attitude.w;
    return s;
  }
  static DroneState from_vector(const StateVec& s) {
    return {s.segment<3>(0), s.segment<3>(3), {s[6], s[7], s[8], s[9]}};
  }
  Pose pose() const { return {position, attitude}; }
  bool is_finite() const { return vector().allFinite(); }
};

struct ControlInput {
  double thrust = 0.0;
  Vec3 body_rates = Vec3::Zero();

  /// Layout (f_th, wx, wy, wz).
  InputVec vector() const {
    InputVec u;
    u << thrust, body_rates;
    return u;
  }
  static ControlInput from_vector(const InputVec& u) { return {u[0], u.segment<3>(1)}; }
  bool is_finite() const { return std::isfinite(thrust) && body_rates.allFinite(); }
};

struct DroneParams {
  double thrust_coeff = 6.03;  // k_th, force per command unit
  double mass = 1.0;           // m_dr, kg

  /// Lumped acceleration per command unit, c = k_th / m_dr.
  double accel_per_command() const { return thrust_coeff / mass; }
  double hover_thrust() const { return kGravity / accel_per_command(); }
  bool valid() const { return thrust_coeff > 0.0 && mass > 0.0; }
};

inline ControlInput hover_input(const DroneParams& params) {
  return {params.hover_thrust(), Vec3::Zero()};
}

/// Thrust axis z_B = R(q) e_z.
inline Vec3 thrust_axis(const Quat& q) {
  return {2.0 * (q.x * q.z + q.y * q.w), 2.0 * (q.y * q.z - q.x * q.w),
          1.0 - 2.0 * (q.x * q.x + q.y * q.y)};
}

/// W(w) such that q ⊗ (w, 0) = W(w) q, with q as (x, y, z, w).
inline Mat4 rate_matrix(const Vec3& w) {
  Mat4 m;
  m << 0.0, w.z(), -w.y(), w.x(),
      -w.z(), 0.0, w.x(), w.y(),
      w.y(), -w.x(), 0.0, w.z(),
      -w.x(), -w.y(), -w.z(), 0.0;
  return m;
}

namespace detail {

inline StateVec derivative_vec(const StateVec& s, const InputVec& u, double c) {
  const Quat q{s[6], s[7], s[8], s[9]};
  StateVec ds;
  ds.segment<3>(0) = s.segment<3>(3);
  ds.segment<3>(3) = kGravity * Vec3::UnitZ() - c * u[0] * thrust_axis(q);
  ds.segment<4>(6) = 0.5 * rate_matrix(u.segment<3>(1)) * s.segment<4>(6);
  return ds;
}

inline void derivative_jacobians(const StateVec& s, const InputVec& u, double c, StateMat& a,
                                 StateInputMat& b) {
  const double x = s[6], y = s[7], z = s[8], w = s[9];
  a.setZero();
  b.setZero();
  a.block<3, 3>(0, 3).setIdentity();

  Eigen::Matrix<double, 3, 4> dz_dq;
  dz_dq << 2 * z, 2 * w, 2 * x, 2 * y,
      -2 * w, 2 * z, 2 * y, -2 * x,
      -4 * x, -4 * y, 0.0, 0.0;
  a.block<3, 4>(3, 6) = -c * u[0] * dz_dq;
  a.block<4, 4>(6, 6) = 0.5 * rate_matrix(u.segment<3>(1));

  b.block<3, 1>(3, 0) = -c * thrust_axis({x, y, z, w});
  Eigen::Matrix<double, 4, 3> xi;
  xi << w, -z, y,
      z, w, -x,
      -y, x, w,
      -x, -y, -z;
  b.block<4, 3>(6, 1) = 0.5 * xi;
}

inline void check_finite(const StateVec& s, const InputVec& u) {
  if (!s.allFinite()) throw std::invalid_argument("dynamics: non-finite state");
  if (!u.allFinite()) throw std::invalid_argument("dynamics: non-finite input");
}

inline void renormalize(StateVec& s) { s.segment<4>(6).normalize(); }

}  // namespace detail

/// Continuous-time state derivative, in DroneState::vector() layout.
inline StateVec derivative(const DroneState& x, const ControlInput& u, const DroneParams& params) {
  const StateVec s = x.vector();
  const InputVec uv = u.vector();
  detail::check_finite(s, uv);
  return detail::derivative_vec(s, uv, params.accel_per_command());
}

/// One classical RK4 step with zero-order-hold input, then quaternion
/// renormalization.
inline DroneState step(const DroneState& x, const ControlInput& u, const DroneParams& params,
                       double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dynamics: step requires dt > 0");
  const StateVec s = x.vector();
  const InputVec uv = u.vector();
  detail::check_finite(s, uv);
  const double c = params.accel_per_command();
  const StateVec k1 = detail::derivative_vec(s, uv, c);
  const StateVec k2 = detail::derivative_vec(s + 0.5 * dt * k1, uv, c);
  const StateVec k3 = detail::derivative_vec(s + 0.5 * dt * k2, uv, c);
  const StateVec k4 = detail::derivative_vec(s + dt * k3, uv, c);
  StateVec next = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  detail::renormalize(next);
  return DroneState::from_vector(next);
}

/// Exact Jacobians of step() with respect to the state and input vectors.
struct StepLinearization {
  DroneState next;
  StateMat a;
  StateInputMat b;
};

inline StepLinearization linearize_step(const DroneState& x, const ControlInput& u,
                                        const DroneParams& params, double dt) {
  const StateVec s = x.vector();
  const InputVec uv = u.vector();
  const double c = params.accel_per_command();
  const StateMat eye = StateMat::Identity();

  StateMat a1, a2, a3, a4;
  StateInputMat b1, b2, b3, b4;

  const StateVec k1 = detail::derivative_vec(s, uv, c);
  detail::derivative_jacobians(s, uv, c, a1, b1);
  const StateMat dk1_dx = a1;
  const StateInputMat dk1_du = b1;

  const StateVec s2 = s + 0.5 * dt * k1;
  const StateVec k2 = detail::derivative_vec(s2, uv, c);
  detail::derivative_jacobians(s2, uv, c, a2, b2);
  const StateMat dk2_dx = a2 * (eye + 0.5 * dt * dk1_dx);
  const StateInputMat dk2_du = a2 * (0.5 * dt * dk1_du) + b2;

  const StateVec s3 = s + 0.5 * dt * k2;
  const StateVec k3 = detail::derivative_vec(s3, uv, c);
  detail::derivative_jacobians(s3, uv, c, a3, b3);
  const StateMat dk3_dx = a3 * (eye + 0.5 * dt * dk2_dx);
  const StateInputMat dk3_du = a3 * (0.5 * dt * dk2_du) + b3;

  const StateVec s4 = s + dt * k3;
  const StateVec k4 = detail::derivative_vec(s4, uv, c);
  detail::derivative_jacobians(s4, uv, c, a4, b4);
  const StateMat dk4_dx = a4 * (eye + dt * dk3_dx);
  const StateInputMat dk4_du = a4 * (dt * dk3_du) + b4;

  StateVec raw = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  StateMat a = eye + (dt / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
  StateInputMat b = (dt / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);

  // d(q/|q|) = (I - n n^T) / |q|
  const Vec4 q = raw.segment<4>(6);
  const double qn = q.norm();
  const Vec4 n = q / qn;
  const Mat4 dn = (Mat4::Identity() - n * n.transpose()) / qn;
  a.block<4, kStateDim>(6, 0) = dn * a.block<4, kStateDim>(6, 0);
  b.block<4, kInputDim>(6, 0) = dn * b.block<4, kInputDim>(6, 0);
  raw.segment<4>(6) = n;
  return {DroneState::from_vector(raw), a, b};
}

/// X[0] = x0, X[k+1] = step(X[k], U[k]).
inline std::vector<DroneState> rollout(const DroneState& x0, std::span<const ControlInput> inputs,
                                       const DroneParams& params, double dt) {
  std::vector<DroneState> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x0);
  for (const auto& u : inputs) states.push_back(step(states.back(), u, params, dt));
  return states;
}

}  // namespace figs
