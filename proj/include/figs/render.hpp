// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Forward gaussian-splat rasterization: EWA projection, global depth sort,
// 16x16 tile binning and front-to-back alpha compositing.
#pragma once

#include "figs/geom.hpp"
#include "figs/image.hpp"
#include "figs/splat.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

namespace figs {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kCovDilation = 0.3;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinTransmittance = 1.0 / 255.0;
inline constexpr int kTileSize = 16;

struct Splat2D {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
};

/// World-to-camera mapping for a frame whose lengths are `metric_scale`
/// times metres (1 for gaussians already in the world frame).
struct CameraView {
  Mat3 rotation = Mat3::Identity();  // R_CF
  Vec3 position = Vec3::Zero();      // camera centre in frame F
  double metric_scale = 1.0;

  static CameraView from_pose(const Pose& camera) {
    return {camera.orientation.to_matrix().transpose(), camera.position, 1.0};
  }

  /// Camera pose in the world composed with the scene alignment.
  static CameraView in_scene(const Pose& camera_world, const Similarity& alignment) {
    const Quat q = (alignment.rotation * camera_world.orientation).normalized();
    return {q.to_matrix().transpose(), alignment.apply(camera_world.position), alignment.scale};
  }
};

inline std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const CameraView& view,
                                               const CameraIntrinsics& k) {
  const Vec3 t = view.rotation * (g.mean - view.position);
  if (t.z() / view.metric_scale <= kNearPlane) return std::nullopt;
  const double inv_z = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * inv_z, 0.0, -k.fx * t.x() * inv_z * inv_z,
      0.0, k.fy * inv_z, -k.fy * t.y() * inv_z * inv_z;
  const Eigen::Matrix<double, 2, 3> jw = j * view.rotation;
  Splat2D s;
  s.cov2d = jw * g.covariance() * jw.transpose();
  s.cov2d(0, 0) += kCovDilation;
  s.cov2d(1, 1) += kCovDilation;
  s.mean2d = {k.fx * t.x() * inv_z + k.cx, k.fy * t.y() * inv_z + k.cy};
  s.depth = t.z() / view.metric_scale;
  s.opacity = g.opacity;
  s.color = g.color;
  return s;
}

/// EWA projection of one gaussian seen from a camera pose in the same frame.
inline std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const Pose& camera,
                                               const CameraIntrinsics& k) {
  return project_gaussian(g, CameraView::from_pose(camera), k);
}

struct RenderOptions {
  int workers = 0;  // 0: all available threads
};

namespace render_detail {

inline int resolve_workers(int workers) {
  return workers > 0 ? workers : std::max(1, omp_get_max_threads());
}

inline std::uint8_t quantize(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

struct Projected {
  std::vector<Splat2D> splats;
  std::vector<std::uint32_t> order;  // front-to-back, ties by input index
};

inline Projected project_and_sort(const SplatScene& scene, const Pose& body,
                                  const RigidTransform& camera_in_body, const CameraIntrinsics& k,
                                  int workers) {
  const CameraView view = CameraView::in_scene(body_camera_pose(body, camera_in_body), scene.alignment);
  const auto n = static_cast<std::int64_t>(scene.gaussians.size());
  std::vector<std::optional<Splat2D>> all(scene.gaussians.size());
#pragma omp parallel for num_threads(workers) schedule(static) if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) all[i] = project_gaussian(scene.gaussians[i], view, k);

  Projected out;
  out.splats.reserve(all.size());
  for (auto& s : all) {
    if (s) out.splats.push_back(*s);
  }
  out.order.resize(out.splats.size());
  std::iota(out.order.begin(), out.order.end(), 0u);
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return out.splats[a].depth < out.splats[b].depth;
  });
  return out;
}

struct PackedSplat {
  float mx, my;
  float conic_a, conic_b, conic_c;  // inverse covariance (a b; b c)
  float opacity;
  float min_power;  // below this, opacity * exp(power) < 1/255
  float r, g, b;
  int x0, x1, y0, y1;  // inclusive pixel bounds of the support
};

}  // namespace render_detail

/// Tiled renderer. Each splat is binned to every 16x16 tile its support
/// (the region where its alpha reaches 1/255) touches; tiles are shaded in
/// parallel.
inline Image render(const SplatScene& scene, const Pose& body, const RigidTransform& camera_in_body,
                    const CameraIntrinsics& k, const RenderOptions& options = {}) {
  using render_detail::PackedSplat;
  const int workers = render_detail::resolve_workers(options.workers);
  const auto proj = render_detail::project_and_sort(scene, body, camera_in_body, k, workers);

  const int tiles_x = (k.width + kTileSize - 1) / kTileSize;
  const int tiles_y = (k.height + kTileSize - 1) / kTileSize;
  const std::size_t n_tiles = static_cast<std::size_t>(tiles_x) * tiles_y;

  std::vector<PackedSplat> packed;
  packed.reserve(proj.order.size());
  for (const std::uint32_t idx : proj.order) {
    const Splat2D& s = proj.splats[idx];
    if (s.opacity < kMinAlpha) continue;
    const double det = s.cov2d.determinant();
    if (!(det > 0.0)) continue;
    // Mahalanobis radius where opacity * exp(-m^2/2) == 1/255.
    const double m = std::sqrt(2.0 * std::log(s.opacity / kMinAlpha));
    const double ex = m * std::sqrt(s.cov2d(0, 0));
    const double ey = m * std::sqrt(s.cov2d(1, 1));
    // Pixel x covers centre x + 0.5.
    const int x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - ex - 0.5)));
    const int x1 = std::min(k.width - 1, static_cast<int>(std::floor(s.mean2d.x() + ex - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - ey - 0.5)));
    const int y1 = std::min(k.height - 1, static_cast<int>(std::floor(s.mean2d.y() + ey - 0.5)));
    if (x0 > x1 || y0 > y1) continue;
    const double inv_det = 1.0 / det;
    packed.push_back({static_cast<float>(s.mean2d.x()), static_cast<float>(s.mean2d.y()),
                      static_cast<float>(s.cov2d(1, 1) * inv_det),
                      static_cast<float>(-s.cov2d(0, 1) * inv_det),
                      static_cast<float>(s.cov2d(0, 0) * inv_det), static_cast<float>(s.opacity),
                      static_cast<float>(std::log(kMinAlpha / s.opacity)),
                      static_cast<float>(s.color.x()), static_cast<float>(s.color.y()),
                      static_cast<float>(s.color.z()), x0, x1, y0, y1});
  }

  // Two-pass binning; iterating in depth order keeps every tile list sorted.
  std::vector<std::uint32_t> tile_begin(n_tiles + 1, 0);
  for (const auto& p : packed) {
    for (int ty = p.y0 / kTileSize; ty <= p.y1 / kTileSize; ++ty) {
      for (int tx = p.x0 / kTileSize; tx <= p.x1 / kTileSize; ++tx) {
        ++tile_begin[static_cast<std::size_t>(ty) * tiles_x + tx + 1];
      }
    }
  }
  std::partial_sum(tile_begin.begin(), tile_begin.end(), tile_begin.begin());
  std::vector<std::uint32_t> tile_items(tile_begin.back());
  {
    std::vector<std::uint32_t> cursor(tile_begin.begin(), tile_begin.end() - 1);
    for (std::uint32_t i = 0; i < packed.size(); ++i) {
      const auto& p = packed[i];
      for (int ty = p.y0 / kTileSize; ty <= p.y1 / kTileSize; ++ty) {
        for (int tx = p.x0 / kTileSize; tx <= p.x1 / kTileSize; ++tx) {
          tile_items[cursor[static_cast<std::size_t>(ty) * tiles_x + tx]++] = i;
        }
      }
    }
  }

  Image img(k.width, k.height);
  const Vec3 bg = scene.background;
  const auto n_tiles_i = static_cast<std::int64_t>(n_tiles);

#pragma omp parallel for num_threads(workers) schedule(dynamic, 4)
  for (std::int64_t t = 0; t < n_tiles_i; ++t) {
    const int tx0 = static_cast<int>(t % tiles_x) * kTileSize;
    const int ty0 = static_cast<int>(t / tiles_x) * kTileSize;
    const int tw = std::min(kTileSize, k.width - tx0);
    const int th = std::min(kTileSize, k.height - ty0);
    float trans[kTileSize * kTileSize];
    float accum[kTileSize * kTileSize][3];
    std::fill(std::begin(trans), std::end(trans), 1.0f);
    for (auto& a : accum) a[0] = a[1] = a[2] = 0.0f;
    int live = tw * th;

    for (std::uint32_t it = tile_begin[t]; it < tile_begin[t + 1] && live > 0; ++it) {
      const PackedSplat& p = packed[tile_items[it]];
      const int px0 = std::max(p.x0, tx0), px1 = std::min(p.x1, tx0 + tw - 1);
      const int py0 = std::max(p.y0, ty0), py1 = std::min(p.y1, ty0 + th - 1);
      for (int y = py0; y <= py1; ++y) {
        const float dy = static_cast<float>(y) + 0.5f - p.my;
        const int row = (y - ty0) * kTileSize;
        for (int x = px0; x <= px1; ++x) {
          const int pi = row + (x - tx0);
          const float tr = trans[pi];
          if (tr < static_cast<float>(kMinTransmittance)) continue;
          const float dx = static_cast<float>(x) + 0.5f - p.mx;
          const float power = -0.5f * (p.conic_a * dx * dx + p.conic_c * dy * dy) - p.conic_b * dx * dy;
          if (power < p.min_power) continue;
          const float alpha = std::min(static_cast<float>(kMaxAlpha), p.opacity * std::exp(power));
          if (alpha < static_cast<float>(kMinAlpha)) continue;
          const float w = alpha * tr;
          accum[pi][0] += p.r * w;
          accum[pi][1] += p.g * w;
          accum[pi][2] += p.b * w;
          const float next = tr * (1.0f - alpha);
          trans[pi] = next;
          if (next < static_cast<float>(kMinTransmittance)) --live;
        }
      }
    }

    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) {
        const int pi = y * kTileSize + x;
        for (int c = 0; c < 3; ++c) {
          img.at(tx0 + x, ty0 + y, c) = render_detail::quantize(double{accum[pi][c]} + double{trans[pi]} * bg[c]);
        }
      }
    }
  }
  return img;
}

/// Brute-force oracle: every visible splat is blended at every pixel in
/// double precision; no tiling and no support culling.
inline Image render_reference(const SplatScene& scene, const Pose& body,
                              const RigidTransform& camera_in_body, const CameraIntrinsics& k) {
  const auto proj = render_detail::project_and_sort(scene, body, camera_in_body, k, 1);
  struct Conic {
    Vec2 mean;
    Mat2 inv;
    double opacity;
    Vec3 color;
  };
  std::vector<Conic> sorted;
  sorted.reserve(proj.order.size());
  for (const auto idx : proj.order) {
    const Splat2D& s = proj.splats[idx];
    sorted.push_back({s.mean2d, s.cov2d.inverse(), s.opacity, s.color});
  }

  Image img(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Vec2 pix(x + 0.5, y + 0.5);
      Vec3 c = Vec3::Zero();
      double trans = 1.0;
      for (const auto& s : sorted) {
        const Vec2 d = pix - s.mean;
        const double alpha = std::min(kMaxAlpha, s.opacity * std::exp(-0.5 * d.dot(s.inv * d)));
        if (alpha < kMinAlpha) continue;
        c += s.color * alpha * trans;
        trans *= 1.0 - alpha;
        if (trans < kMinTransmittance) break;
      }
      c += trans * scene.background;
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = render_detail::quantize(c[ch]);
    }
  }
  return img;
}

}  // namespace figs
