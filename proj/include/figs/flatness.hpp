// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Waypoints -> minimum-snap piecewise polynomial -> sampled state/input
// reference via differential flatness of the thrust/body-rate model.
#pragma once

#include "figs/dynamics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace figs {

class TrajectoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Waypoint {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double time = 0.0;
};

inline constexpr int kPolyDegree = 7;
inline constexpr int kPolyCoeffs = kPolyDegree + 1;

/// One polynomial segment in normalized time s = (t - start) / duration.
/// Columns are x, y, z, yaw; row k multiplies s^k.
struct PolySegment {
  double start = 0.0;
  double duration = 1.0;
  Eigen::Matrix<double, kPolyCoeffs, 4> coeffs = Eigen::Matrix<double, kPolyCoeffs, 4>::Zero();

  /// d^order/dt^order of (x, y, z, yaw) at normalized time s.
  Vec4 evaluate_normalized(double s, int order) const {
    Vec4 out = Vec4::Zero();
    for (int k = order; k < kPolyCoeffs; ++k) {
      double f = 1.0;
      for (int r = 0; r < order; ++r) f *= k - r;
      out += f * std::pow(s, k - order) * coeffs.row(k).transpose();
    }
    return out / std::pow(duration, order);
  }
};

struct PiecewisePoly {
  std::vector<PolySegment> segments;

  double start_time() const { return segments.front().start; }
  double end_time() const { return segments.back().start + segments.back().duration; }
  double duration() const { return end_time() - start_time(); }

  /// Derivative `order` of (x, y, z, yaw) at time t, clamped to the domain.
  Vec4 evaluate(double t, int order = 0) const {
    t = std::clamp(t, start_time(), end_time());
    std::size_t i = 0;
    while (i + 1 < segments.size() && t >= segments[i + 1].start) ++i;
    const auto& seg = segments[i];
    return seg.evaluate_normalized((t - seg.start) / seg.duration, order);
  }
};

namespace snap_detail {

/// k!/(k-r)!
inline double falling(int k, int r) {
  double f = 1.0;
  for (int i = 0; i < r; ++i) f *= k - i;
  return f;
}

/// Row of the r-th normalized-time derivative basis at s in {0, 1}.
inline Eigen::Matrix<double, 1, kPolyCoeffs> basis_row(double s, int r) {
  Eigen::Matrix<double, 1, kPolyCoeffs> row = Eigen::Matrix<double, 1, kPolyCoeffs>::Zero();
  for (int k = r; k < kPolyCoeffs; ++k) row[k] = falling(k, r) * std::pow(s, k - r);
  return row;
}

/// Integral over s in [0,1] of (d^4/ds^4 p)^2 as a quadratic form.
inline Eigen::Matrix<double, kPolyCoeffs, kPolyCoeffs> snap_hessian() {
  Eigen::Matrix<double, kPolyCoeffs, kPolyCoeffs> h = Eigen::Matrix<double, kPolyCoeffs, kPolyCoeffs>::Zero();
  for (int i = 4; i < kPolyCoeffs; ++i) {
    for (int j = 4; j < kPolyCoeffs; ++j) {
      h(i, j) = falling(i, 4) * falling(j, 4) / static_cast<double>(i + j - 7);
    }
  }
  return h;
}

struct Constraints {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

/// Interpolation, C^continuity interior knots, and zero derivatives 1..3 at
/// both ends.
inline Constraints build_constraints(const std::vector<double>& durations,
                                     const std::vector<double>& values, int continuity) {
  const int m = static_cast<int>(durations.size());
  const int n = kPolyCoeffs * m;
  const int rows = 2 * m + continuity * (m - 1) + 6;
  Constraints c{Eigen::MatrixXd::Zero(rows, n), Eigen::VectorXd::Zero(rows)};
  int r = 0;
  for (int i = 0; i < m; ++i) {
    c.a.block(r, kPolyCoeffs * i, 1, kPolyCoeffs) = basis_row(0.0, 0);
    c.b[r++] = values[i];
    c.a.block(r, kPolyCoeffs * i, 1, kPolyCoeffs) = basis_row(1.0, 0);
    c.b[r++] = values[i + 1];
  }
  for (int i = 1; i < m; ++i) {
    for (int d = 1; d <= continuity; ++d) {
      c.a.block(r, kPolyCoeffs * (i - 1), 1, kPolyCoeffs) =
          basis_row(1.0, d) / std::pow(durations[i - 1], d);
      c.a.block(r, kPolyCoeffs * i, 1, kPolyCoeffs) = -basis_row(0.0, d) / std::pow(durations[i], d);
      ++r;
    }
  }
  for (int d = 1; d <= 3; ++d) {
    c.a.block(r++, 0, 1, kPolyCoeffs) = basis_row(0.0, d);
    c.a.block(r++, kPolyCoeffs * (m - 1), 1, kPolyCoeffs) = basis_row(1.0, d);
  }
  return c;
}

inline Eigen::MatrixXd cost_matrix(const std::vector<double>& durations) {
  const int m = static_cast<int>(durations.size());
  const auto h = snap_hessian();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(kPolyCoeffs * m, kPolyCoeffs * m);
  for (int i = 0; i < m; ++i) {
    q.block<kPolyCoeffs, kPolyCoeffs>(kPolyCoeffs * i, kPolyCoeffs * i) = h / std::pow(durations[i], 7);
  }
  return q;
}

/// Solves min c'Qc s.t. Ac = b through the KKT system.
inline Eigen::VectorXd solve_axis(const std::vector<double>& durations,
                                  const std::vector<double>& values, int continuity) {
  const auto con = build_constraints(durations, values, continuity);
  const Eigen::MatrixXd q = cost_matrix(durations);
  const auto n = q.rows();
  const auto m = con.a.rows();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = 2.0 * q;
  kkt.topRightCorner(n, m) = con.a.transpose();
  kkt.bottomLeftCorner(m, n) = con.a;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
  rhs.tail(m) = con.b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) throw TrajectoryError("min_snap: singular KKT system");
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw TrajectoryError("min_snap: non-finite solution");
  return sol.head(n);
}

}  // namespace snap_detail

/// Snap cost integral of one coordinate (0..3 for x, y, z, yaw).
inline double snap_cost(const PiecewisePoly& poly, int column) {
  const auto h = snap_detail::snap_hessian();
  double cost = 0.0;
  for (const auto& seg : poly.segments) {
    const Eigen::Matrix<double, kPolyCoeffs, 1> c = seg.coeffs.col(column);
    cost += c.dot(h * c) / std::pow(seg.duration, 7);
  }
  return cost;
}

inline void validate_waypoints(const std::vector<Waypoint>& waypoints) {
  if (waypoints.size() < 2) throw TrajectoryError("min_snap: need at least 2 waypoints");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (!waypoints[i].position.allFinite() || !std::isfinite(waypoints[i].yaw) ||
        !std::isfinite(waypoints[i].time)) {
      throw TrajectoryError("min_snap: non-finite waypoint " + std::to_string(i));
    }
    if (i > 0 && !(waypoints[i].time > waypoints[i - 1].time)) {
      throw TrajectoryError("min_snap: waypoint times must be strictly increasing (index " +
                            std::to_string(i) + ")");
    }
  }
}

/// Degree-7 minimum-snap interpolant: C^4 positions and C^2 yaw at interior
/// knots, rest-to-rest (zero velocity, acceleration, jerk) at both ends.
/// Yaw waypoints are unwrapped to the nearest branch of their predecessor.
inline PiecewisePoly min_snap(const std::vector<Waypoint>& waypoints) {
  validate_waypoints(waypoints);
  const std::size_t m = waypoints.size() - 1;
  std::vector<double> durations(m);
  for (std::size_t i = 0; i < m; ++i) durations[i] = waypoints[i + 1].time - waypoints[i].time;

  std::array<std::vector<double>, 4> values;
  for (auto& v : values) v.resize(waypoints.size());
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    for (int a = 0; a < 3; ++a) values[a][i] = waypoints[i].position[a];
    double yaw = waypoints[i].yaw;
    if (i > 0) yaw = values[3][i - 1] + std::remainder(yaw - values[3][i - 1], 2.0 * kPi);
    values[3][i] = yaw;
  }

  PiecewisePoly poly;
  poly.segments.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    poly.segments[i].start = waypoints[i].time;
    poly.segments[i].duration = durations[i];
  }
  for (int axis = 0; axis < 4; ++axis) {
    const Eigen::VectorXd c = snap_detail::solve_axis(durations, values[axis], axis < 3 ? 4 : 2);
    for (std::size_t i = 0; i < m; ++i) {
      poly.segments[i].coeffs.col(axis) = c.segment<kPolyCoeffs>(static_cast<Eigen::Index>(kPolyCoeffs * i));
    }
  }
  return poly;
}

/// Position, its first three derivatives, yaw and yaw rate.
struct FlatOutput {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

/// Inverts the model: z_B = (g e_z - a)/|g e_z - a|, f_th = |g e_z - a| / c,
/// attitude = tilt(e_z -> z_B) ⊗ yaw(e_z), body rates from q' = 1/2 q ⊗ w.
inline std::pair<DroneState, ControlInput> flat_outputs_to_state(const FlatOutput& f,
                                                                 const DroneParams& params) {
  const Vec3 w = kGravity * Vec3::UnitZ() - f.acceleration;
  const double wn = w.norm();
  if (!(wn > 0.1 * kGravity)) {
    throw TrajectoryError("flatness: near free-fall (|g e_z - a| <= 0.1 g)");
  }
  const Vec3 n = w / wn;
  if (n.z() <= -1.0 + 1e-9) throw TrajectoryError("flatness: inverted thrust direction");
  const Vec3 n_dot = (-f.jerk - n * n.dot(-f.jerk)) / wn;

  // Minimal rotation taking e_z to n, unnormalized (e_z x n, 1 + e_z.n).
  const Vec4 a(-n.y(), n.x(), 0.0, 1.0 + n.z());
  const Vec4 a_dot(-n_dot.y(), n_dot.x(), 0.0, n_dot.z());
  const double an = a.norm();
  const Vec4 tilt = a / an;
  const Vec4 tilt_dot = (a_dot - tilt * tilt.dot(a_dot)) / an;

  const double h = 0.5 * f.yaw;
  const Quat yaw_q{0.0, 0.0, std::sin(h), std::cos(h)};
  const Quat yaw_dot{0.0, 0.0, 0.5 * f.yaw_rate * std::cos(h), -0.5 * f.yaw_rate * std::sin(h)};

  const Quat tq = Quat::from_coeffs(tilt);
  const Quat q = tq * yaw_q;
  const Quat q_dot_a = Quat::from_coeffs(tilt_dot) * yaw_q;
  const Quat q_dot_b = tq * yaw_dot;
  const Quat q_dot{q_dot_a.x + q_dot_b.x, q_dot_a.y + q_dot_b.y, q_dot_a.z + q_dot_b.z,
                   q_dot_a.w + q_dot_b.w};
  const Quat omega = q.conjugate() * q_dot;

  DroneState state{f.position, f.velocity, q.normalized()};
  ControlInput input{wn / params.accel_per_command(), 2.0 * omega.vec()};
  return {state, input};
}

/// Reference states and inputs sampled every dt from a spline.
struct DesiredTrajectory {
  std::vector<DroneState> states;
  std::vector<ControlInput> inputs;
  double dt = 0.05;
  double start_time = 0.0;
  DroneParams params;

  std::size_t steps() const { return inputs.size(); }
  double time(std::size_t k) const { return start_time + static_cast<double>(k) * dt; }
  double duration() const { return static_cast<double>(steps()) * dt; }
};

inline FlatOutput flat_output_at(const PiecewisePoly& spline, double t) {
  const Vec4 p = spline.evaluate(t, 0);
  const Vec4 v = spline.evaluate(t, 1);
  return {p.head<3>(), v.head<3>(), spline.evaluate(t, 2).head<3>(),
          spline.evaluate(t, 3).head<3>(), p[3], v[3]};
}

/// N_d = round(duration * rate) steps; states at k / rate, N_d + 1 of them.
inline DesiredTrajectory sample_trajectory(const PiecewisePoly& spline, double rate_hz,
                                           const DroneParams& params) {
  if (!(rate_hz > 0.0)) throw TrajectoryError("sample_trajectory: rate must be positive");
  DesiredTrajectory traj;
  traj.dt = 1.0 / rate_hz;
  traj.start_time = spline.start_time();
  traj.params = params;
  const auto n = static_cast<std::size_t>(std::llround(spline.duration() * rate_hz));
  traj.states.reserve(n + 1);
  traj.inputs.reserve(n);
  for (std::size_t k = 0; k <= n; ++k) {
    const auto [x, u] = flat_outputs_to_state(flat_output_at(spline, traj.time(k)), params);
    traj.states.push_back(x);
    if (k < n) traj.inputs.push_back(u);
  }
  return traj;
}

/// Parses `[{"p": [x, y, z], "yaw": psi, "t": t}, ...]`.
inline std::vector<Waypoint> waypoints_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw TrajectoryError("waypoints: expected a JSON array");
  std::vector<Waypoint> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& w = doc[i];
    if (!w.contains("p") || !w["p"].is_array() || w["p"].size() != 3 || !w.contains("t")) {
      throw TrajectoryError("waypoints: entry " + std::to_string(i) + " needs p[3] and t");
    }
    out.push_back({{w["p"][0].get<double>(), w["p"][1].get<double>(), w["p"][2].get<double>()},
                   w.value("yaw", 0.0),
                   w["t"].get<double>()});
  }
  return out;
}

inline nlohmann::json waypoints_to_json(const std::vector<Waypoint>& waypoints) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& w : waypoints) {
    doc.push_back({{"p", {w.position.x(), w.position.y(), w.position.z()}}, {"yaw", w.yaw}, {"t", w.time}});
  }
  return doc;
}

/// Gerono lemniscate at constant altitude (z down), traversed once; rest at
/// both ends via the min-snap boundary conditions.
inline std::vector<Waypoint> figure_eight_waypoints(double duration = 15.0, double half_length = 2.0,
                                                    double half_width = 1.0, double altitude = 1.0,
                                                    int segments = 12) {
  std::vector<Waypoint> out;
  for (int i = 0; i <= segments; ++i) {
    const double s = static_cast<double>(i) / segments;
    const double phi = 2.0 * kPi * s;
    out.push_back({{half_length * std::sin(phi), half_width * std::sin(2.0 * phi), -altitude},
                   0.0,
                   duration * s});
  }
  return out;
}

}  // namespace figs
