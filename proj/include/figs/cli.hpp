// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Batch front end: render, fly, gen-dataset, metrics, synth-scene.
//
// Exit codes: 0 ok, 2 configuration or input error, 3 runtime failure.
// Data goes to files; progress and throughput go to stderr.
#pragma once

#include "figs/analysis.hpp"
#include "figs/config.hpp"
#include "figs/datagen.hpp"
#include "figs/expert.hpp"
#include "figs/flatness.hpp"
#include "figs/image.hpp"
#include "figs/io.hpp"
#include "figs/ply.hpp"
#include "figs/render.hpp"
#include "figs/serialize.hpp"
#include "figs/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace figs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Options shared by every command. Flags win over the config file.
struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
};

struct RenderOptionsCli {
  std::string scene;
  std::string pose = "0,0,0";
  std::string ppm;
};

struct FlyOptions {
  std::string waypoints;
  bool no_images = false;
};

struct DatasetOptions {
  std::string waypoints;
  bool no_images = false;
};

struct MetricsOptions {
  std::string flown;
  std::string desired;
  std::string scene;
  double radius = kDefaultProximityRadius;
  double drone_radius = kDefaultDroneRadius;
};

struct SynthOptions {
  std::string spec;
  std::size_t demo = 0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline Config resolve_config(const CommonOptions& o) {
  Config c = o.config_path.empty() ? config_from_json(json::object()) : load_config(o.config_path);
  if (o.seed) {
    c.seed = *o.seed;
    c.randomization.seed = *o.seed;
  }
  if (o.workers) {
    if (*o.workers < 0) throw ConfigError("--workers must be >= 0");
    c.workers = *o.workers;
  }
  if (!o.out.empty()) c.output = o.out;
  return c;
}

/// "px,py,pz" or "px,py,pz,qx,qy,qz,qw".
inline Pose parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--pose: bad number '" + item + "'");
    }
  }
  if (v.size() != 3 && v.size() != 7) throw ConfigError("--pose expects 3 or 7 comma-separated numbers");
  Pose p;
  p.position = Vec3(v[0], v[1], v[2]);
  if (v.size() == 7) {
    const Quat q{v[3], v[4], v[5], v[6]};
    if (!(q.norm() > 0.0) || !q.is_finite()) throw ConfigError("--pose: quaternion must be finite and nonzero");
    p.orientation = q.normalized();
  }
  if (!p.position.allFinite()) throw ConfigError("--pose: position must be finite");
  return p;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
}

inline json metrics_to_json(const MetricsReport& m) {
  json events = json::array();
  for (const auto& e : m.collision_events) events.push_back({e.start_step, e.end_step});
  return {{"tte", m.tte},
          {"tte_max", m.tte_max},
          {"pp", m.pp},
          {"proximity_radius", m.proximity_radius},
          {"cr", m.cr ? json(*m.cr) : json(nullptr)},
          {"cr_defined", m.cr.has_value()},
          {"collisions_checked", m.collisions_checked},
          {"collision_events", events},
          {"path_length", m.path_length}};
}

inline StateLog desired_log(const DesiredTrajectory& traj) {
  StateLog log{{}, traj.states, traj.inputs, traj.params};
  for (std::size_t k = 0; k < traj.states.size(); ++k) log.times.push_back(traj.time(k));
  return log;
}

}  // namespace detail

inline int cmd_render(const CommonOptions& common, const RenderOptionsCli& opts) {
  Config c = detail::resolve_config(common);
  if (!opts.scene.empty()) {
    c.scene.kind = SceneSource::Kind::kPly;
    c.scene.path = opts.scene;
    validate_config(c);
  }
  if (common.out.empty()) throw ConfigError("render: --out is required");
  const Pose pose = detail::parse_pose(opts.pose);
  const LoadedScene scene = load_scene(c);
  const auto t0 = detail::Clock::now();
  const Image img = render(scene.scene, pose, c.camera_mount, c.intrinsics, {c.workers});
  const double dt = detail::seconds_since(t0);
  write_png(common.out, img);
  if (!opts.ppm.empty()) write_ppm(opts.ppm, img);
  std::cerr << "render: " << scene.scene.gaussians.size() << " gaussians, " << img.width << "x" << img.height
            << " in " << dt * 1e3 << " ms\n";
  return kExitOk;
}

inline int cmd_fly(const CommonOptions& common, const FlyOptions& opts) {
  namespace fs = std::filesystem;
  const Config c = detail::resolve_config(common);
  const auto waypoints = load_waypoints(c, opts.waypoints);
  const PiecewisePoly spline = min_snap(waypoints);
  const DesiredTrajectory traj = sample_trajectory(spline, c.mpc.rate_hz, c.theta);
  const LoadedScene scene = load_scene(c);
  const fs::path out = c.output;
  detail::ensure_dir(out);

  const double duration = traj.duration();
  ClosedLoopResult run;
  if (duration > 0.0) {
    run = closed_loop_run_partial(traj.states.front(), c.theta, traj, duration, c.mpc, 0);
  } else {
    run.states.push_back(traj.states.front());
  }
  StateLog flown{{}, run.states, run.inputs, c.theta};
  for (std::size_t k = 0; k < run.states.size(); ++k) flown.times.push_back(traj.start_time + k * traj.dt);
  write_states_csv(out / "states.csv", flown);
  write_states_csv(out / "desired.csv", detail::desired_log(traj));

  std::size_t frames = 0;
  double render_seconds = 0.0;
  if (!opts.no_images) {
    detail::ensure_dir(out / "frames");
    const auto t0 = detail::Clock::now();
    for (std::size_t k = 0; k < run.states.size(); ++k) {
      const Image img = render(scene.scene, run.states[k].pose(), c.camera_mount, c.intrinsics, {c.workers});
      write_png(out / "frames" / ("frame_" + std::to_string(k) + ".png"), img);
      ++frames;
    }
    render_seconds = detail::seconds_since(t0);
  }

  const bool has_scene = c.scene.kind != SceneSource::Kind::kNone;
  const MetricsReport m = evaluate_flight(run.states, traj.states, has_scene ? &scene.scene : nullptr);
  json report = {{"seed", c.seed},
                 {"status", run.failure.empty() ? "ok" : "diverged"},
                 {"partial", !run.failure.empty()},
                 {"steps", run.inputs.size()},
                 {"frames", frames},
                 {"duration", duration},
                 {"rate_hz", c.mpc.rate_hz},
                 {"theta", to_json(c.theta)},
                 {"scene", {{"source", scene.description}, {"hash", scene.hash}}},
                 {"metrics", detail::metrics_to_json(m)},
                 {"config", c.source}};
  if (!run.failure.empty()) report["error"] = run.failure;
  write_text_file(out / "report.json", report.dump(2) + "\n");

  std::cerr << "fly: " << run.inputs.size() << " steps, tte " << m.tte << " m, pp " << m.pp;
  if (frames > 0) std::cerr << ", " << frames / std::max(render_seconds, 1e-9) << " frames/s";
  std::cerr << "\n";
  if (!run.failure.empty()) {
    std::cerr << "fly: " << run.failure << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

inline int cmd_gen_dataset(const CommonOptions& common, const DatasetOptions& opts) {
  const Config c = detail::resolve_config(common);
  const auto waypoints = load_waypoints(c, opts.waypoints);
  const DesiredTrajectory traj = sample_trajectory(min_snap(waypoints), c.mpc.rate_hz, c.theta);
  DatasetConfig dc;
  dc.randomization = c.randomization;
  dc.mpc = c.mpc;
  dc.intrinsics = c.intrinsics;
  dc.camera_mount = c.camera_mount;
  dc.render_images = !opts.no_images;
  dc.workers = c.workers;
  std::optional<LoadedScene> scene;
  if (dc.render_images) {
    scene = load_scene(c);
    dc.scene_path = scene->description;
    dc.scene_hash = scene->hash;
  }
  const DatasetResult r = generate_dataset(scene ? &scene->scene : nullptr, traj, dc, c.output);
  const auto& m = r.manifest;
  const double secs = std::max(r.wall_seconds, 1e-9);
  std::cerr << "gen-dataset: " << m.rollouts << " rollouts (" << m.accepted << " accepted, " << m.rejected
            << " rejected), " << m.pairs << " pairs in " << r.wall_seconds << " s; "
            << static_cast<double>(m.rollouts) / secs << " rollouts/s, " << static_cast<double>(m.pairs) / secs
            << " pairs/s\n";
  return kExitOk;
}

inline int cmd_metrics(const CommonOptions& common, const MetricsOptions& opts) {
  Config c = detail::resolve_config(common);
  if (opts.flown.empty() || opts.desired.empty()) throw ConfigError("metrics: --flown and --desired are required");
  if (!(opts.radius > 0.0) || !(opts.drone_radius > 0.0)) throw ConfigError("metrics: radii must be positive");
  const StateLog flown = read_states_csv(opts.flown);
  const StateLog desired = read_states_csv(opts.desired);
  if (!opts.scene.empty()) {
    c.scene.kind = SceneSource::Kind::kPly;
    c.scene.path = opts.scene;
    validate_config(c);
  }
  std::optional<LoadedScene> scene;
  if (c.scene.kind != SceneSource::Kind::kNone) scene = load_scene(c);
  const MetricsReport m = evaluate_flight(flown.states, desired.states, scene ? &scene->scene : nullptr,
                                          opts.radius, opts.drone_radius);
  json doc = {{"seed", c.seed},
              {"flown", opts.flown},
              {"desired", opts.desired},
              {"scene", scene ? json(scene->description) : json(nullptr)},
              {"drone_radius", opts.drone_radius},
              {"metrics", detail::metrics_to_json(m)}};
  if (common.out.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_text_file(common.out, doc.dump(2) + "\n");
  }
  return kExitOk;
}

inline int cmd_synth_scene(const CommonOptions& common, const SynthOptions& opts) {
  const Config c = detail::resolve_config(common);
  if (common.out.empty()) throw ConfigError("synth-scene: --out is required");
  SceneSpec spec;
  if (!opts.spec.empty()) {
    try {
      spec = scene_spec_from_json(json::parse(read_text_file(opts.spec)));
    } catch (const json::exception& e) {
      throw ConfigError("synth-scene: '" + opts.spec + "': " + e.what());
    }
  } else if (opts.demo > 0) {
    spec = demo_scene_spec(opts.demo);
  } else if (c.scene.kind == SceneSource::Kind::kSynthetic) {
    spec = c.scene.spec;
  } else if (c.scene.kind == SceneSource::Kind::kDemo) {
    spec = demo_scene_spec(c.scene.demo_count);
  } else {
    throw ConfigError("synth-scene: give --spec, --demo or a synthetic scene in the config");
  }
  const SplatScene scene = generate_synthetic_scene(spec, c.seed);
  save_ply(common.out, scene.gaussians);
  std::cerr << "synth-scene: " << scene.gaussians.size() << " gaussians (seed " << c.seed << ")\n";
  return kExitOk;
}

/// Runs `action` and maps exceptions to exit codes.
template <typename F>
int guarded(F&& action) {
  try {
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrajectoryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PlyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

inline int run(std::vector<std::string> args) {
  CLI::App app{"gaussian-splat flight simulation and dataset tools", "figs"};
  app.require_subcommand(1);
  CommonOptions common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&common](const std::uint64_t& s) { common.seed = s; },
                                            "random seed (overrides config)");
    sub->add_option_function<int>("--workers", [&common](const int& w) { common.workers = w; },
                                  "worker threads, 0 = all cores (overrides config)");
    sub->add_option("-o,--out", common.out, "output file or directory (overrides config)");
  };

  RenderOptionsCli render_opts;
  auto* render_cmd = app.add_subcommand("render", "render one frame from a body pose");
  add_common(render_cmd);
  render_cmd->add_option("--scene", render_opts.scene, "PLY scene (overrides config)");
  render_cmd->add_option("--pose", render_opts.pose, "body pose px,py,pz[,qx,qy,qz,qw]");
  render_cmd->add_option("--ppm", render_opts.ppm, "also write a PPM copy");

  FlyOptions fly_opts;
  auto* fly_cmd = app.add_subcommand("fly", "track a waypoint trajectory with the expert and record the flight");
  add_common(fly_cmd);
  fly_cmd->add_option("--waypoints", fly_opts.waypoints, "waypoints JSON (overrides config)");
  fly_cmd->add_flag("--no-images", fly_opts.no_images, "skip frame rendering");

  DatasetOptions ds_opts;
  auto* ds_cmd = app.add_subcommand("gen-dataset", "generate a domain-randomized expert dataset");
  add_common(ds_cmd);
  ds_cmd->add_option("--waypoints", ds_opts.waypoints, "waypoints JSON (overrides config)");
  ds_cmd->add_flag("--no-images", ds_opts.no_images, "state-action pairs only");

  MetricsOptions m_opts;
  auto* m_cmd = app.add_subcommand("metrics", "evaluate a flown states.csv against a desired one");
  add_common(m_cmd);
  m_cmd->add_option("--flown", m_opts.flown, "flown states.csv")->required();
  m_cmd->add_option("--desired", m_opts.desired, "desired states.csv")->required();
  m_cmd->add_option("--scene", m_opts.scene, "PLY scene for collision checks");
  m_cmd->add_option("--radius", m_opts.radius, "proximity radius in metres");
  m_cmd->add_option("--drone-radius", m_opts.drone_radius, "drone radius for collision checks");

  SynthOptions s_opts;
  auto* s_cmd = app.add_subcommand("synth-scene", "write a synthetic gaussian scene as PLY");
  add_common(s_cmd);
  s_cmd->add_option("--spec", s_opts.spec, "scene spec JSON");
  s_cmd->add_option("--demo", s_opts.demo, "demo room with about this many gaussians");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (render_cmd->parsed()) return guarded([&] { return cmd_render(common, render_opts); });
  if (fly_cmd->parsed()) return guarded([&] { return cmd_fly(common, fly_opts); });
  if (ds_cmd->parsed()) return guarded([&] { return cmd_gen_dataset(common, ds_opts); });
  if (m_cmd->parsed()) return guarded([&] { return cmd_metrics(common, m_opts); });
  if (s_cmd->parsed()) return guarded([&] { return cmd_synth_scene(common, s_opts); });
  return kExitConfig;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args));
}

}  // namespace figs::cli
