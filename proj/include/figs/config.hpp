// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Run configuration shared by the command-line tools.
//
//   {
//     "schema_version": 1,
//     "scene": {"path": "room.ply"}                    or
//              {"synthetic": {<scene spec>}}          or
//              {"demo": 50000},
//     "alignment": {"scale": 1, "rotation": [x, y, z, w], "translation": [..]},
//     "background": [r, g, b],
//     "intrinsics": {"fx": 320, "fy": 320, "cx": 320, "cy": 180, "width": 640, "height": 360},
//     "camera_mount": {"rotation": [..], "translation": [..]},
//     "rate_hz": 20,
//     "theta": {"k_th": 6.03, "m_dr": 1.0},
//     "mpc": {...},
//     "randomization": {...},
//     "waypoints": "path.json" | "figure_eight" | [ {"p": [..], "yaw": 0, "t": 0}, ... ],
//     "output": "out",
//     "workers": 0,
//     "seed": 0
//   }
//
// Relative paths resolve against the directory holding the config file.
#pragma once

#include "figs/datagen.hpp"
#include "figs/flatness.hpp"
#include "figs/io.hpp"
#include "figs/ply.hpp"
#include "figs/serialize.hpp"
#include "figs/synthetic.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace figs {

inline constexpr int kConfigSchemaVersion = 1;

struct SceneSource {
  enum class Kind { kNone, kPly, kSynthetic, kDemo };
  Kind kind = Kind::kNone;
  std::filesystem::path path;
  SceneSpec spec;
  std::size_t demo_count = 0;
};

struct Config {
  SceneSource scene;
  Similarity alignment;
  std::optional<Vec3> background;
  CameraIntrinsics intrinsics;
  RigidTransform camera_mount = forward_camera_mount(0.05);
  DroneParams theta;
  MpcConfig mpc;
  RandomizationSpec randomization;
  json waypoints;  // null, "figure_eight", a path string or an inline array
  std::filesystem::path base_dir = ".";
  std::filesystem::path output = "out";
  int workers = 0;
  std::uint64_t seed = 0;
  json source;  // the document as read, echoed into outputs
};

namespace config_detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

}  // namespace config_detail

/// Parses a config document. Missing sections keep their defaults.
inline Config config_from_json(const json& doc, const std::filesystem::path& base_dir = ".") {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  Config c;
  c.source = doc;
  c.base_dir = base_dir;
  try {
    const int version = doc.value("schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion) {
      throw ConfigError("config: unsupported schema_version " + std::to_string(version));
    }
    if (doc.contains("scene")) {
      const json& s = doc["scene"];
      if (s.contains("path")) {
        c.scene.kind = SceneSource::Kind::kPly;
        c.scene.path = config_detail::resolve(base_dir, s["path"].get<std::string>());
      } else if (s.contains("synthetic")) {
        c.scene.kind = SceneSource::Kind::kSynthetic;
        c.scene.spec = scene_spec_from_json(s["synthetic"]);
      } else if (s.contains("demo")) {
        c.scene.kind = SceneSource::Kind::kDemo;
        const auto n = s["demo"].get<std::int64_t>();
        if (n <= 0) throw ConfigError("config: scene.demo must be a positive gaussian count");
        c.scene.demo_count = static_cast<std::size_t>(n);
      } else {
        throw ConfigError("config: scene needs one of 'path', 'synthetic' or 'demo'");
      }
    }
    if (doc.contains("alignment")) c.alignment = similarity_from_json(doc["alignment"]);
    if (doc.contains("background")) c.background = vec3_from_json(doc["background"], "background");
    if (doc.contains("intrinsics")) c.intrinsics = intrinsics_from_json(doc["intrinsics"]);
    if (doc.contains("camera_mount")) c.camera_mount = transform_from_json(doc["camera_mount"], c.camera_mount);
    if (doc.contains("theta")) c.theta = params_from_json(doc["theta"]);
    json mpc = doc.value("mpc", json::object());
    if (doc.contains("rate_hz")) mpc["rate_hz"] = doc["rate_hz"];
    c.mpc = mpc_config_from_json(mpc);
    c.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("randomization")) {
      c.randomization = randomization_from_json(doc["randomization"]);
      if (!doc["randomization"].contains("seed")) c.randomization.seed = c.seed;
    } else {
      c.randomization.seed = c.seed;
    }
    if (doc.contains("waypoints")) c.waypoints = doc["waypoints"];
    if (doc.contains("output")) c.output = config_detail::resolve(base_dir, doc["output"].get<std::string>());
    c.workers = doc.value("workers", 0);
    if (c.workers < 0) throw ConfigError("config: workers must be >= 0");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

/// Checks that every referenced file exists.
inline void validate_config(const Config& c) {
  namespace fs = std::filesystem;
  if (c.scene.kind == SceneSource::Kind::kPly && !fs::is_regular_file(c.scene.path)) {
    throw ConfigError("config: scene file '" + c.scene.path.string() + "' does not exist");
  }
  if (c.waypoints.is_string() && c.waypoints.get<std::string>() != "figure_eight") {
    const fs::path p = config_detail::resolve(c.base_dir, c.waypoints.get<std::string>());
    if (!fs::is_regular_file(p)) throw ConfigError("config: waypoints file '" + p.string() + "' does not exist");
  }
  c.mpc.validate();
  c.randomization.validate();
  if (!c.intrinsics.valid()) throw ConfigError("config: camera intrinsics out of range");
  if (!c.theta.valid()) throw ConfigError("config: k_th and m_dr must be positive");
}

inline Config load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path.string() + "': " + e.what());
  }
  Config c = config_from_json(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  validate_config(c);
  return c;
}

struct LoadedScene {
  SplatScene scene;
  std::string description;
  std::string hash;
};

/// Builds the configured scene with the config's alignment and background.
/// A config without a scene yields an empty scene.
inline LoadedScene load_scene(const Config& c) {
  LoadedScene out;
  switch (c.scene.kind) {
    case SceneSource::Kind::kNone:
      out.description = "empty";
      out.hash = content_hash("");
      break;
    case SceneSource::Kind::kPly: {
      out.scene = load_ply(c.scene.path);
      out.description = c.scene.path.string();
      out.hash = content_hash(read_text_file(c.scene.path));
      break;
    }
    case SceneSource::Kind::kSynthetic:
      out.scene = generate_synthetic_scene(c.scene.spec, c.seed);
      out.description = "synthetic";
      out.hash = content_hash(to_json(c.scene.spec).dump() + "#" + std::to_string(c.seed));
      break;
    case SceneSource::Kind::kDemo: {
      const SceneSpec spec = demo_scene_spec(c.scene.demo_count);
      out.scene = generate_synthetic_scene(spec, c.seed);
      out.description = "demo:" + std::to_string(c.scene.demo_count);
      out.hash = content_hash(to_json(spec).dump() + "#" + std::to_string(c.seed));
      break;
    }
  }
  out.scene.alignment = c.alignment;
  if (c.background) out.scene.background = *c.background;
  return out;
}

/// Waypoints named by the config (or `override_path` if non-empty); defaults
/// to the figure-eight.
inline std::vector<Waypoint> load_waypoints(const Config& c, const std::string& override_path = {}) {
  json spec = override_path.empty() ? c.waypoints : json(override_path);
  if (spec.is_null() || (spec.is_string() && spec.get<std::string>() == "figure_eight")) {
    return figure_eight_waypoints();
  }
  if (spec.is_string()) {
    const auto path = override_path.empty() ? config_detail::resolve(c.base_dir, spec.get<std::string>())
                                            : std::filesystem::path(override_path);
    if (!std::filesystem::is_regular_file(path)) {
      throw ConfigError("waypoints file '" + path.string() + "' does not exist");
    }
    try {
      return waypoints_from_json(json::parse(read_text_file(path)));
    } catch (const json::exception& e) {
      throw ConfigError("waypoints '" + path.string() + "': " + e.what());
    }
  }
  return waypoints_from_json(spec);
}

}  // namespace figs
