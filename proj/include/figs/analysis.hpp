// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Flight evaluation metrics (tracking error, proximity percentile, collision
// rate) and the analytic lumped-thrust adaptation estimate.
#pragma once

#include "figs/dynamics.hpp"
#include "figs/flatness.hpp"
#include "figs/splat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace figs {

struct AdaptationEstimate {
  double c_hat = 0.0;
  double residual = 0.0;
};

/// Least-squares c_hat absorbing a world-frame specific force f_add into the
/// thrust term: c_hat = c - z_B' f_add / f_th.
inline AdaptationEstimate c_hat(double c, double thrust, const Quat& attitude, const Vec3& f_add) {
  if (!(thrust > 0.0)) throw std::invalid_argument("c_hat: thrust command must be positive");
  const Vec3 z_b = rotate_vector(attitude, Vec3::UnitZ());
  const double est = c - z_b.dot(f_add) / thrust;
  return {est, ((est - c) * thrust * z_b + f_add).norm()};
}

/// Golden-section minimization of |(c_hat - c) f_th z_B + f_add|^2 over
/// [c - 10g/f_th, c + 10g/f_th].
inline double c_hat_bruteforce(double c, double thrust, const Quat& attitude, const Vec3& f_add) {
  if (!(thrust > 0.0)) throw std::invalid_argument("c_hat: thrust command must be positive");
  const Vec3 z_b = rotate_vector(attitude, Vec3::UnitZ());
  auto f = [&](double ch) { return ((ch - c) * thrust * z_b + f_add).squaredNorm(); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = c - 10.0 * kGravity / thrust;
  double hi = c + 10.0 * kGravity / thrust;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

inline constexpr double kDefaultProximityRadius = 0.30;
inline constexpr double kDefaultDroneRadius = 0.15;

/// Distance from each flown position to the nearest desired sample.
inline std::vector<double> closest_distances(std::span<const DroneState> flown,
                                             std::span<const DroneState> desired) {
  if (flown.empty() || desired.empty()) throw std::invalid_argument("metrics: empty state sequence");
  std::vector<double> out;
  out.reserve(flown.size());
  for (const auto& x : flown) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& d : desired) best = std::min(best, (x.position - d.position).squaredNorm());
    out.push_back(std::sqrt(best));
  }
  return out;
}

/// Mean closest-point position error.
inline double tte(std::span<const DroneState> flown, std::span<const DroneState> desired) {
  const auto d = closest_distances(flown, desired);
  double sum = 0.0;
  for (const double v : d) sum += v;
  return sum / static_cast<double>(d.size());
}

/// Fraction of flown samples within `radius` of the desired path.
inline double pp(std::span<const DroneState> flown, std::span<const DroneState> desired,
                 double radius = kDefaultProximityRadius) {
  const auto d = closest_distances(flown, desired);
  const auto inside = std::count_if(d.begin(), d.end(), [radius](double v) { return v <= radius; });
  return static_cast<double>(inside) / static_cast<double>(d.size());
}

inline double path_length(std::span<const DroneState> states) {
  double len = 0.0;
  for (std::size_t k = 1; k < states.size(); ++k) {
    len += (states[k].position - states[k - 1].position).norm();
  }
  return len;
}

/// Paths shorter than this count as stationary; the collision rate is then
/// undefined.
inline constexpr double kMinPathLength = 1e-6;

struct CollisionEvent {
  std::size_t start_step = 0;
  std::size_t end_step = 0;  // inclusive
};

struct CollisionResult {
  std::vector<CollisionEvent> events;
  std::optional<double> rate;  // events per metre; empty for a stationary path
  double path_length = 0.0;
};

/// Opaque gaussians (opacity >= 0.5) as 3-sigma ellipsoids inflated by the
/// drone radius.
class CollisionChecker {
 public:
  CollisionChecker(const SplatScene& scene, double drone_radius) {
    if (!(drone_radius > 0.0)) throw std::invalid_argument("collisions: drone radius must be positive");
    for (const auto& g : gaussians_in_world(scene)) {
      if (g.opacity < 0.5) continue;
      const Mat3 cov = g.covariance() + drone_radius * drone_radius * Mat3::Identity();
      Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
      ellipsoids_.push_back({g.mean, cov.inverse(), 3.0 * std::sqrt(es.eigenvalues().maxCoeff())});
    }
  }

  bool in_collision(const Vec3& p) const {
    for (const auto& e : ellipsoids_) {
      const Vec3 d = p - e.center;
      if (d.squaredNorm() > e.bound * e.bound) continue;
      if (d.dot(e.inv_cov * d) <= 9.0) return true;
    }
    return false;
  }

  std::size_t size() const { return ellipsoids_.size(); }

 private:
  struct Ellipsoid {
    Vec3 center;
    Mat3 inv_cov;
    double bound;  // 3 * sqrt(max eigenvalue)
  };
  std::vector<Ellipsoid> ellipsoids_;
};

inline CollisionResult collisions(std::span<const DroneState> states, const CollisionChecker& checker) {
  const auto n = static_cast<std::int64_t>(states.size());
  std::vector<char> hit(states.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) hit[k] = checker.in_collision(states[k].position) ? 1 : 0;

  CollisionResult out;
  for (std::size_t k = 0; k < hit.size(); ++k) {
    if (!hit[k]) continue;
    if (k > 0 && hit[k - 1]) {
      out.events.back().end_step = k;
    } else {
      out.events.push_back({k, k});
    }
  }
  out.path_length = path_length(states);
  if (out.path_length > kMinPathLength) out.rate = static_cast<double>(out.events.size()) / out.path_length;
  return out;
}

inline CollisionResult collisions(std::span<const DroneState> states, const SplatScene& scene,
                                  double drone_radius = kDefaultDroneRadius) {
  return collisions(states, CollisionChecker(scene, drone_radius));
}

struct MetricsReport {
  double tte = 0.0;
  double tte_max = 0.0;
  double pp = 0.0;
  double proximity_radius = kDefaultProximityRadius;
  std::optional<double> cr;
  double path_length = 0.0;
  std::vector<CollisionEvent> collision_events;
  bool collisions_checked = false;
};

inline MetricsReport evaluate_flight(std::span<const DroneState> flown,
                                     std::span<const DroneState> desired,
                                     const SplatScene* scene = nullptr,
                                     double proximity_radius = kDefaultProximityRadius,
                                     double drone_radius = kDefaultDroneRadius) {
  MetricsReport r;
  const auto d = closest_distances(flown, desired);
  double sum = 0.0;
  std::size_t inside = 0;
  for (const double v : d) {
    sum += v;
    r.tte_max = std::max(r.tte_max, v);
    if (v <= proximity_radius) ++inside;
  }
  r.tte = sum / static_cast<double>(d.size());
  r.pp = static_cast<double>(inside) / static_cast<double>(d.size());
  r.proximity_radius = proximity_radius;
  r.path_length = path_length(flown);
  if (scene != nullptr) {
    auto c = collisions(flown, *scene, drone_radius);
    r.cr = c.rate;
    r.collision_events = std::move(c.events);
    r.collisions_checked = true;
  }
  return r;
}

}  // namespace figs
