// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Gaussian splat scene representation.
#pragma once

#include "figs/geom.hpp"

#include <vector>

namespace figs {

/// SH degree-0 basis constant, Y_0^0 = 1 / (2 sqrt(pi)).
inline constexpr double kShC0 = 0.28209479177387814;

struct Gaussian3D {
  Vec3 mean = Vec3::Zero();
  Vec3 scale = Vec3::Ones();  // per-axis standard deviation, activated
  Quat rotation = Quat::identity();
  double opacity = 1.0;  // activated, in [0, 1]
  Vec3 color = Vec3::Constant(0.5);

  /// Sigma = R diag(s^2) R^T.
  Mat3 covariance() const {
    const Mat3 r = rotation.to_matrix();
    return r * scale.cwiseAbs2().asDiagonal() * r.transpose();
  }
};

/// x_splat = scale * R x_world + translation.
struct Similarity {
  double scale = 1.0;
  Quat rotation = Quat::identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * rotate_vector(rotation, p) + translation; }
  Vec3 apply_inverse(const Vec3& p) const {
    return rotate_vector(rotation.conjugate(), p - translation) / scale;
  }
};

struct SplatScene {
  std::vector<Gaussian3D> gaussians;
  Similarity alignment;
  Vec3 background = Vec3::Zero();
};

/// The scene's gaussians expressed in the world frame (metres).
inline std::vector<Gaussian3D> gaussians_in_world(const SplatScene& scene) {
  const Similarity& a = scene.alignment;
  const Quat inv = a.rotation.conjugate();
  std::vector<Gaussian3D> out;
  out.reserve(scene.gaussians.size());
  for (const auto& g : scene.gaussians) {
    Gaussian3D w = g;
    w.mean = a.apply_inverse(g.mean);
    w.scale = g.scale / a.scale;
    w.rotation = (inv * g.rotation).normalized();
    out.push_back(w);
  }
  return out;
}

}  // namespace figs
