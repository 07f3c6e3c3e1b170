// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Procedural splat scenes built from boxes, spheres and rectangles.
#pragma once

#include "figs/rng.hpp"
#include "figs/splat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

namespace figs {

struct BoxPrimitive {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
  Vec3 color = Vec3::Constant(0.5);
};

struct SpherePrimitive {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  Vec3 color = Vec3::Constant(0.5);
};

/// Rectangle center ± u ± v; u and v are the half-edge vectors.
struct RectPrimitive {
  Vec3 center = Vec3::Zero();
  Vec3 half_u = Vec3::UnitX();
  Vec3 half_v = Vec3::UnitY();
  Vec3 color = Vec3::Constant(0.5);
};

using Primitive = std::variant<BoxPrimitive, SpherePrimitive, RectPrimitive>;

struct SceneSpec {
  std::vector<Primitive> primitives;
  double density = 400.0;  // gaussians per square metre of surface
  double opacity = 0.95;
  double color_jitter = 0.08;
  Vec3 background = Vec3(0.55, 0.7, 0.9);
};

namespace synth_detail {

inline Quat frame_from_normal(const Vec3& n, const Vec3& tangent) {
  const Vec3 z = n.normalized();
  Vec3 x = (tangent - tangent.dot(z) * z);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return Quat::from_matrix(r);
}

struct Emitter {
  const SceneSpec& spec;
  Rng& rng;
  std::vector<Gaussian3D>& out;

  double spacing() const { return 1.0 / std::sqrt(spec.density); }

  Gaussian3D make(const Vec3& p, const Vec3& normal, const Vec3& tangent, const Vec3& color) {
    Gaussian3D g;
    g.mean = p;
    const double h = spacing();
    g.scale = Vec3(0.6 * h, 0.6 * h, std::max(0.05 * h, 1e-3));
    g.rotation = frame_from_normal(normal, tangent);
    g.opacity = spec.opacity;
    const double j = spec.color_jitter;
    const Vec3 jitter(rng.uniform(-j, j), rng.uniform(-j, j), rng.uniform(-j, j));
    g.color = (color + jitter).cwiseMax(0.0).cwiseMin(1.0);
    return g;
  }

  void rect(const Vec3& center, const Vec3& hu, const Vec3& hv, const Vec3& color) {
    const double area = 4.0 * hu.cross(hv).norm();
    const auto count = static_cast<std::size_t>(std::llround(area * spec.density));
    const Vec3 normal = hu.cross(hv);
    for (std::size_t i = 0; i < count; ++i) {
      const double a = rng.uniform(-1.0, 1.0);
      const double b = rng.uniform(-1.0, 1.0);
      out.push_back(make(center + a * hu + b * hv, normal, hu, color));
    }
  }

  void operator()(const RectPrimitive& r) { rect(r.center, r.half_u, r.half_v, r.color); }

  void operator()(const BoxPrimitive& b) {
    const Vec3 e = b.half_extents;
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3;
      const int v = (axis + 2) % 3;
      for (const double side : {-1.0, 1.0}) {
        Vec3 c = b.center;
        c[axis] += side * e[axis];
        Vec3 hu = Vec3::Zero();
        Vec3 hv = Vec3::Zero();
        hu[u] = e[u];
        hv[v] = side * e[v];
        rect(c, hu, hv, b.color);
      }
    }
  }

  void operator()(const SpherePrimitive& s) {
    const double area = 4.0 * kPi * s.radius * s.radius;
    const auto count = static_cast<std::size_t>(std::llround(area * spec.density));
    for (std::size_t i = 0; i < count; ++i) {
      // Archimedes: z uniform in [-1, 1] gives area-uniform points.
      const double z = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Vec3 n(r * std::cos(phi), r * std::sin(phi), z);
      out.push_back(make(s.center + s.radius * n, n, Vec3::UnitZ().cross(n) + 1e-3 * Vec3::UnitX(),
                         s.color));
    }
  }
};

}  // namespace synth_detail

/// Deterministic for a fixed (spec, seed).
inline SplatScene generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
  SplatScene scene;
  scene.background = spec.background;
  if (!(spec.density > 0.0)) return scene;
  Rng rng(hash_seed({seed, 0x5ce9e}));
  synth_detail::Emitter emit{spec, rng, scene.gaussians};
  for (const auto& p : spec.primitives) std::visit(emit, p);
  return scene;
}

/// Surface area of a primitive in square metres.
inline double surface_area(const Primitive& p) {
  return std::visit(
      [](const auto& prim) -> double {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, BoxPrimitive>) {
          const Vec3 s = 2.0 * prim.half_extents;
          return 2.0 * (s.x() * s.y() + s.y() * s.z() + s.z() * s.x());
        } else if constexpr (std::is_same_v<T, SpherePrimitive>) {
          return 4.0 * kPi * prim.radius * prim.radius;
        } else {
          return 4.0 * prim.half_u.cross(prim.half_v).norm();
        }
      },
      p);
}

/// A walled room (z down, floor at z = 0) with a few obstacles, scaled so
/// the total gaussian count is close to target_count.
inline SceneSpec demo_scene_spec(std::size_t target_count) {
  SceneSpec spec;
  auto& p = spec.primitives;
  const double half = 6.0;
  const double height = 4.0;
  p.push_back(RectPrimitive{{0, 0, 0}, {half, 0, 0}, {0, half, 0}, {0.35, 0.45, 0.3}});
  p.push_back(RectPrimitive{{half, 0, -height / 2}, {0, half, 0}, {0, 0, height / 2}, {0.8, 0.75, 0.65}});
  p.push_back(RectPrimitive{{-half, 0, -height / 2}, {0, half, 0}, {0, 0, height / 2}, {0.6, 0.6, 0.75}});
  p.push_back(RectPrimitive{{0, half, -height / 2}, {half, 0, 0}, {0, 0, height / 2}, {0.75, 0.6, 0.55}});
  p.push_back(RectPrimitive{{0, -half, -height / 2}, {half, 0, 0}, {0, 0, height / 2}, {0.55, 0.7, 0.6}});
  p.push_back(BoxPrimitive{{2.5, 1.5, -0.75}, {0.5, 0.5, 0.75}, {0.85, 0.2, 0.15}});
  p.push_back(BoxPrimitive{{-2.0, -2.5, -1.0}, {0.4, 0.8, 1.0}, {0.15, 0.3, 0.85}});
  p.push_back(BoxPrimitive{{-3.0, 2.5, -0.5}, {0.6, 0.3, 0.5}, {0.9, 0.8, 0.1}});
  p.push_back(SpherePrimitive{{0.5, -3.5, -1.5}, 0.6, {0.2, 0.8, 0.3}});
  p.push_back(SpherePrimitive{{4.0, -2.0, -2.0}, 0.4, {0.8, 0.3, 0.8}});
  double area = 0.0;
  for (const auto& prim : p) area += surface_area(prim);
  spec.density = static_cast<double>(target_count) / area;
  return spec;
}

}  // namespace figs
