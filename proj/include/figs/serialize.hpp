// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// JSON conversions for the shared value types.
#pragma once

#include "figs/dynamics.hpp"
#include "figs/expert.hpp"
#include "figs/splat.hpp"
#include "figs/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>

namespace figs {

using nlohmann::json;

namespace json_detail {

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string("config: missing key '") + key + "'");
  }
  return j.at(key);
}

template <int N>
Eigen::Matrix<double, N, 1> fixed_vector(const json& j, const char* what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
    throw ConfigError(std::string("config: '") + what + "' must be an array of " + std::to_string(N) +
                      " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace json_detail

template <typename Derived>
json to_json_array(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vec3 vec3_from_json(const json& j, const char* what = "vector") {
  return json_detail::fixed_vector<3>(j, what);
}

/// Quaternions are written as [x, y, z, w].
inline json to_json(const Quat& q) { return json::array({q.x, q.y, q.z, q.w}); }
inline Quat quat_from_json(const json& j, const char* what = "quaternion") {
  const Vec4 c = json_detail::fixed_vector<4>(j, what);
  const Quat q = Quat::from_coeffs(c);
  if (!(q.norm() > 0.0)) throw ConfigError(std::string("config: '") + what + "' has zero norm");
  return q.normalized();
}

inline json to_json(const DroneParams& p) { return {{"k_th", p.thrust_coeff}, {"m_dr", p.mass}}; }
inline DroneParams params_from_json(const json& j) {
  DroneParams p{json_detail::require(j, "k_th").get<double>(), json_detail::require(j, "m_dr").get<double>()};
  if (!p.valid()) throw ConfigError("config: k_th and m_dr must be positive");
  return p;
}

inline json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}
inline CameraIntrinsics intrinsics_from_json(const json& j, CameraIntrinsics k = {}) {
  k.fx = j.value("fx", k.fx);
  k.fy = j.value("fy", k.fy);
  k.cx = j.value("cx", k.cx);
  k.cy = j.value("cy", k.cy);
  k.width = j.value("width", k.width);
  k.height = j.value("height", k.height);
  if (!k.valid()) throw ConfigError("config: camera intrinsics out of range");
  return k;
}

inline json to_json(const RigidTransform& t) {
  return {{"rotation", to_json(t.rotation)}, {"translation", to_json_array(t.translation)}};
}
inline RigidTransform transform_from_json(const json& j, RigidTransform t = {}) {
  if (j.contains("rotation")) t.rotation = quat_from_json(j["rotation"], "rotation");
  if (j.contains("translation")) t.translation = vec3_from_json(j["translation"], "translation");
  return t;
}

inline json to_json(const Similarity& s) {
  return {{"scale", s.scale}, {"rotation", to_json(s.rotation)}, {"translation", to_json_array(s.translation)}};
}
inline Similarity similarity_from_json(const json& j, Similarity s = {}) {
  s.scale = j.value("scale", s.scale);
  if (!(s.scale > 0.0)) throw ConfigError("config: alignment scale must be positive");
  if (j.contains("rotation")) s.rotation = quat_from_json(j["rotation"], "alignment.rotation");
  if (j.contains("translation")) s.translation = vec3_from_json(j["translation"], "alignment.translation");
  return s;
}

inline json to_json(const DroneState& x) {
  return {{"p", to_json_array(x.position)}, {"v", to_json_array(x.velocity)}, {"q", to_json(x.attitude)}};
}

/// Weight matrices are accepted either as a diagonal (array of n) or as a
/// full row-major matrix (array of n arrays); they are written as diagonals
/// when diagonal.
template <int N>
json weight_to_json(const Eigen::Matrix<double, N, N>& m) {
  const Eigen::Matrix<double, N, N> diag = m.diagonal().asDiagonal();
  if (m == diag) return to_json_array(m.diagonal());
  json rows = json::array();
  for (int r = 0; r < N; ++r) rows.push_back(to_json_array(m.row(r).transpose()));
  return rows;
}

template <int N>
Eigen::Matrix<double, N, N> weight_from_json(const json& j, const char* what) {
  if (j.is_array() && j.size() == static_cast<std::size_t>(N) && j[0].is_array()) {
    Eigen::Matrix<double, N, N> m;
    for (int r = 0; r < N; ++r) m.row(r) = json_detail::fixed_vector<N>(j[static_cast<std::size_t>(r)], what).transpose();
    return m;
  }
  return json_detail::fixed_vector<N>(j, what).asDiagonal();
}

inline json to_json(const MpcConfig& c) {
  return {{"horizon", c.horizon},
          {"Q", weight_to_json<kStateDim>(c.stage_weight)},
          {"R", weight_to_json<kInputDim>(c.input_weight)},
          {"Q_N", weight_to_json<kStateDim>(c.terminal_weight)},
          {"u_min", to_json_array(c.input_min)},
          {"u_max", to_json_array(c.input_max)},
          {"rate_hz", c.rate_hz},
          {"sqp_iters", c.sqp_iters},
          {"tol", c.tol}};
}

inline MpcConfig mpc_config_from_json(const json& j, MpcConfig c = {}) {
  c.horizon = j.value("horizon", c.horizon);
  if (j.contains("Q")) c.stage_weight = weight_from_json<kStateDim>(j["Q"], "mpc.Q");
  if (j.contains("R")) c.input_weight = weight_from_json<kInputDim>(j["R"], "mpc.R");
  if (j.contains("Q_N")) {
    c.terminal_weight = weight_from_json<kStateDim>(j["Q_N"], "mpc.Q_N");
  } else if (j.contains("Q")) {
    c.terminal_weight = 5.0 * c.stage_weight;
  }
  if (j.contains("u_min")) c.input_min = json_detail::fixed_vector<kInputDim>(j["u_min"], "mpc.u_min");
  if (j.contains("u_max")) c.input_max = json_detail::fixed_vector<kInputDim>(j["u_max"], "mpc.u_max");
  c.rate_hz = j.value("rate_hz", c.rate_hz);
  c.sqp_iters = j.value("sqp_iters", c.sqp_iters);
  c.tol = j.value("tol", c.tol);
  c.validate();
  return c;
}

inline Primitive primitive_from_json(const json& j) {
  const std::string type = json_detail::require(j, "type").get<std::string>();
  const Vec3 color = j.contains("color") ? vec3_from_json(j["color"], "color") : Vec3::Constant(0.5);
  if (type == "box") {
    return BoxPrimitive{vec3_from_json(json_detail::require(j, "center"), "center"),
                        vec3_from_json(json_detail::require(j, "half_extents"), "half_extents"), color};
  }
  if (type == "sphere") {
    return SpherePrimitive{vec3_from_json(json_detail::require(j, "center"), "center"),
                           json_detail::require(j, "radius").get<double>(), color};
  }
  if (type == "rect" || type == "plane") {
    return RectPrimitive{vec3_from_json(json_detail::require(j, "center"), "center"),
                         vec3_from_json(json_detail::require(j, "half_u"), "half_u"),
                         vec3_from_json(json_detail::require(j, "half_v"), "half_v"), color};
  }
  throw ConfigError("config: unknown primitive type '" + type + "'");
}

inline json to_json(const Primitive& p) {
  return std::visit(
      [](const auto& prim) -> json {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, BoxPrimitive>) {
          return {{"type", "box"}, {"center", to_json_array(prim.center)},
                  {"half_extents", to_json_array(prim.half_extents)}, {"color", to_json_array(prim.color)}};
        } else if constexpr (std::is_same_v<T, SpherePrimitive>) {
          return {{"type", "sphere"}, {"center", to_json_array(prim.center)}, {"radius", prim.radius},
                  {"color", to_json_array(prim.color)}};
        } else {
          return {{"type", "rect"}, {"center", to_json_array(prim.center)}, {"half_u", to_json_array(prim.half_u)},
                  {"half_v", to_json_array(prim.half_v)}, {"color", to_json_array(prim.color)}};
        }
      },
      p);
}

inline SceneSpec scene_spec_from_json(const json& j) {
  SceneSpec s;
  s.density = j.value("density", s.density);
  if (!(s.density > 0.0)) throw ConfigError("config: scene density must be positive");
  s.opacity = j.value("opacity", s.opacity);
  s.color_jitter = j.value("color_jitter", s.color_jitter);
  if (j.contains("background")) s.background = vec3_from_json(j["background"], "background");
  if (j.contains("primitives")) {
    for (const auto& p : j["primitives"]) s.primitives.push_back(primitive_from_json(p));
  }
  return s;
}

inline json to_json(const SceneSpec& s) {
  json prims = json::array();
  for (const auto& p : s.primitives) prims.push_back(to_json(p));
  return {{"density", s.density}, {"opacity", s.opacity}, {"color_jitter", s.color_jitter},
          {"background", to_json_array(s.background)}, {"primitives", prims}};
}

}  // namespace figs
