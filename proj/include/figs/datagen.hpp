// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Domain-randomized expert demonstrations: for every desired sample i and
// draw j, sample (theta_s, x0) around X^d[i], fly the MPC expert for t_s
// seconds under theta_s, render the onboard camera and persist the rollout.
#pragma once

#include "figs/expert.hpp"
#include "figs/image.hpp"
#include "figs/io.hpp"
#include "figs/render.hpp"
#include "figs/rng.hpp"
#include "figs/serialize.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace figs {

inline constexpr int kManifestVersion = 1;

struct RandomizationSpec {
  DroneParams params_min{6.03 * 0.8, 0.8};
  DroneParams params_max{6.03 * 1.2, 1.2};
  Vec3 position_halfwidth = Vec3::Constant(0.25);
  Vec3 velocity_halfwidth = Vec3::Constant(0.25);
  Vec3 attitude_halfwidth = Vec3::Constant(0.1);  // rad about body x, y, z
  int samples_per_step = 5;                       // N_s
  double rollout_duration = 1.0;                  // t_s
  std::uint64_t seed = 0;

  void validate() const {
    if (!params_min.valid() || !params_max.valid()) throw ConfigError("randomization: parameters must be positive");
    if (params_min.thrust_coeff > params_max.thrust_coeff || params_min.mass > params_max.mass) {
      throw ConfigError("randomization: theta_min must not exceed theta_max");
    }
    if ((position_halfwidth.array() < 0).any() || (velocity_halfwidth.array() < 0).any() ||
        (attitude_halfwidth.array() < 0).any()) {
      throw ConfigError("randomization: perturbation half-widths must be non-negative");
    }
    if (samples_per_step < 1) throw ConfigError("randomization: N_s must be >= 1");
    if (!(rollout_duration > 0.0)) throw ConfigError("randomization: t_s must be positive");
  }
};

inline json to_json(const RandomizationSpec& s) {
  return {{"theta_min", to_json(s.params_min)},
          {"theta_max", to_json(s.params_max)},
          {"dx_position", to_json_array(s.position_halfwidth)},
          {"dx_velocity", to_json_array(s.velocity_halfwidth)},
          {"dx_attitude", to_json_array(s.attitude_halfwidth)},
          {"samples_per_step", s.samples_per_step},
          {"rollout_duration", s.rollout_duration},
          {"seed", s.seed}};
}

inline RandomizationSpec randomization_from_json(const json& j, RandomizationSpec s = {}) {
  if (j.contains("theta_min")) s.params_min = params_from_json(j["theta_min"]);
  if (j.contains("theta_max")) s.params_max = params_from_json(j["theta_max"]);
  if (j.contains("dx_position")) s.position_halfwidth = vec3_from_json(j["dx_position"], "dx_position");
  if (j.contains("dx_velocity")) s.velocity_halfwidth = vec3_from_json(j["dx_velocity"], "dx_velocity");
  if (j.contains("dx_attitude")) s.attitude_halfwidth = vec3_from_json(j["dx_attitude"], "dx_attitude");
  s.samples_per_step = j.value("samples_per_step", s.samples_per_step);
  s.rollout_duration = j.value("rollout_duration", s.rollout_duration);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

/// Independent stream for rollout (i, j).
inline Rng rollout_rng(std::uint64_t seed, std::size_t origin, std::size_t sample) {
  return Rng(hash_seed({seed, origin, sample}));
}

struct RolloutSeed {
  DroneParams params;
  DroneState initial;
};

/// theta_s ~ U(theta_min, theta_max); x0 uniform in the box x^d_i ± dx, the
/// attitude perturbed by body-axis rotations of uniform angle then
/// renormalized.
inline RolloutSeed sample_rollout_seed(const RandomizationSpec& spec, const DroneState& desired, Rng& rng) {
  RolloutSeed out;
  out.params.thrust_coeff = rng.uniform(spec.params_min.thrust_coeff, spec.params_max.thrust_coeff);
  out.params.mass = rng.uniform(spec.params_min.mass, spec.params_max.mass);
  out.initial = desired;
  for (int a = 0; a < 3; ++a) {
    out.initial.position[a] += rng.uniform(-spec.position_halfwidth[a], spec.position_halfwidth[a]);
  }
  for (int a = 0; a < 3; ++a) {
    out.initial.velocity[a] += rng.uniform(-spec.velocity_halfwidth[a], spec.velocity_halfwidth[a]);
  }
  Vec3 angles;
  for (int a = 0; a < 3; ++a) angles[a] = rng.uniform(-spec.attitude_halfwidth[a], spec.attitude_halfwidth[a]);
  if (angles != Vec3::Zero()) {
    Quat q = desired.attitude;
    for (int a = 0; a < 3; ++a) q = q * Quat::from_axis_angle(Vec3::Unit(a), angles[a]);
    out.initial.attitude = q.normalized();
  }
  return out;
}

struct HistoryStep {
  double dt = 0.0;
  Vec3 dp = Vec3::Zero();
  Vec3 dv = Vec3::Zero();
  Quat dq = Quat::identity();
};

/// dt^{k-1} = t^k - t^{k-1}, dp^{k-1} = dt^{k-1} v^k, dv^{k-1} = v^k - v^{k-1},
/// dq^{k-1} = q_WB^k ⊗ q_BW^{k-1}.
inline std::vector<HistoryStep> history_features(std::span<const DroneState> states,
                                                 std::span<const double> times) {
  if (states.size() != times.size()) {
    throw std::invalid_argument("history_features: states and timestamps differ in length");
  }
  std::vector<HistoryStep> out;
  for (std::size_t k = 1; k < states.size(); ++k) {
    const double dt = times[k] - times[k - 1];
    if (!(dt > 0.0)) {
      throw std::invalid_argument("history_features: timestamps must be strictly increasing (index " +
                                  std::to_string(k) + ")");
    }
    HistoryStep h;
    h.dt = dt;
    h.dp = dt * states[k].velocity;
    h.dv = states[k].velocity - states[k - 1].velocity;
    h.dq = (states[k].attitude.conjugate() * states[k - 1].attitude).normalized();
    out.push_back(h);
  }
  return out;
}

struct ObjectiveVector {
  Vec3 delta_position = Vec3::Zero();
  Vec3 velocity_initial = Vec3::Zero();
  Vec3 velocity_final = Vec3::Zero();
  Quat attitude_initial = Quat::identity();
  Quat attitude_final = Quat::identity();
  double total_time = 0.0;
};

inline ObjectiveVector objective_vector(std::span<const DroneState> states, std::span<const double> times) {
  if (states.size() < 2 || states.size() != times.size()) {
    throw std::invalid_argument("objective_vector: need >= 2 timestamped states");
  }
  const auto& a = states.front();
  const auto& b = states.back();
  return {b.position - a.position, a.velocity, b.velocity, a.attitude, b.attitude,
          times.back() - times.front()};
}

/// Objective of the desired trajectory between samples `from` and `to`.
inline ObjectiveVector objective_vector(const DesiredTrajectory& traj, std::size_t from, std::size_t to) {
  if (to >= traj.states.size() || from >= to) throw std::invalid_argument("objective_vector: bad slice");
  std::vector<double> times{traj.time(from), traj.time(to)};
  std::vector<DroneState> ends{traj.states[from], traj.states[to]};
  return objective_vector(ends, times);
}

inline json to_json(const ObjectiveVector& o) {
  return {{"delta_position", to_json_array(o.delta_position)},
          {"velocity_initial", to_json_array(o.velocity_initial)},
          {"velocity_final", to_json_array(o.velocity_final)},
          {"attitude_initial", to_json(o.attitude_initial)},
          {"attitude_final", to_json(o.attitude_final)},
          {"total_time", o.total_time}};
}

/// One image per state, rendered at the camera pose of each body pose.
inline std::vector<Image> render_rollout_images(std::span<const DroneState> states,
                                                const RigidTransform& camera_mount, const SplatScene& scene,
                                                const CameraIntrinsics& k, const RenderOptions& options = {}) {
  std::vector<Image> out;
  out.reserve(states.size());
  for (const auto& x : states) out.push_back(render(scene, x.pose(), camera_mount, k, options));
  return out;
}

struct RolloutRecord {
  std::size_t origin = 0;  // i
  std::size_t sample = 0;  // j
  DroneParams params;
  std::vector<double> times;
  std::vector<DroneState> states;
  std::vector<ControlInput> inputs;
  std::vector<std::string> image_files;
  ObjectiveVector objective;
  bool accepted = true;
  std::string reject_reason;
  std::string states_file;

  std::string name() const { return "rollout_" + std::to_string(origin) + "_" + std::to_string(sample); }
};

struct DatasetConfig {
  RandomizationSpec randomization;
  MpcConfig mpc;
  CameraIntrinsics intrinsics;
  RigidTransform camera_mount = forward_camera_mount(0.05);
  std::string scene_path;
  std::string scene_hash;
  bool render_images = true;
  int workers = 0;
};

struct DatasetManifest {
  json document;
  std::size_t rollouts = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t pairs = 0;
};

struct DatasetResult {
  DatasetManifest manifest;
  std::vector<RolloutRecord> records;
  double wall_seconds = 0.0;
};

/// Synthesizes N_s * N_d rollouts (N_d = traj.steps()). Output layout:
///   manifest.json
///   rollouts/rollout_{i}_{j}/states.csv
///   images/rollout_{i}_{j}/frame_{k}.png
/// The manifest and state files depend only on the inputs and seed, never on
/// the worker count or scheduling.
inline DatasetResult generate_dataset(const SplatScene* scene, const DesiredTrajectory& traj,
                                      const DatasetConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  cfg.randomization.validate();
  cfg.mpc.validate();
  if (cfg.render_images && scene == nullptr) {
    throw std::invalid_argument("generate_dataset: image rendering requested without a scene");
  }
  if (traj.steps() == 0) throw std::invalid_argument("generate_dataset: desired trajectory has no steps");

  std::error_code ec;
  fs::create_directories(out_dir / "rollouts", ec);
  if (ec) throw std::runtime_error("generate_dataset: cannot create '" + out_dir.string() + "': " + ec.message());
  if (cfg.render_images) fs::create_directories(out_dir / "images", ec);
  if (ec) throw std::runtime_error("generate_dataset: cannot create image directory: " + ec.message());

  const auto& rs = cfg.randomization;
  const std::size_t origins = traj.steps();
  const auto samples = static_cast<std::size_t>(rs.samples_per_step);
  const std::size_t total = origins * samples;
  const int workers = cfg.workers > 0 ? cfg.workers : std::max(1, omp_get_max_threads());
  std::vector<RolloutRecord> records(total);
  std::vector<std::string> io_errors(total);

  const auto t0 = std::chrono::steady_clock::now();
  const auto total_i = static_cast<std::int64_t>(total);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (std::int64_t idx = 0; idx < total_i; ++idx) {
    RolloutRecord& rec = records[idx];
    rec.origin = static_cast<std::size_t>(idx) / samples;
    rec.sample = static_cast<std::size_t>(idx) % samples;
    Rng rng = rollout_rng(rs.seed, rec.origin, rec.sample);
    const RolloutSeed seed = sample_rollout_seed(rs, traj.states[rec.origin], rng);
    rec.params = seed.params;
    rec.objective = objective_vector(traj, rec.origin, traj.states.size() - 1);
    try {
      const auto run = closed_loop_run(seed.initial, seed.params, traj, rs.rollout_duration, cfg.mpc, rec.origin);
      rec.states = run.states;
      rec.inputs = run.inputs;
      for (std::size_t k = 0; k < rec.states.size(); ++k) rec.times.push_back(static_cast<double>(k) * cfg.mpc.dt());
    } catch (const SolverDiverged& e) {
      rec.accepted = false;
      rec.reject_reason = e.what();
      continue;
    }
    try {
      const fs::path dir = out_dir / "rollouts" / rec.name();
      fs::create_directories(dir);
      rec.states_file = (fs::path("rollouts") / rec.name() / "states.csv").generic_string();
      write_states_csv(out_dir / rec.states_file, {rec.times, rec.states, rec.inputs, rec.params});
      if (cfg.render_images) {
        const fs::path img_dir = out_dir / "images" / rec.name();
        fs::create_directories(img_dir);
        for (std::size_t k = 0; k < rec.states.size(); ++k) {
          const Image img = render(*scene, rec.states[k].pose(), cfg.camera_mount, cfg.intrinsics, {1});
          const std::string file = "frame_" + std::to_string(k) + ".png";
          write_png(img_dir / file, img);
          rec.image_files.push_back((fs::path("images") / rec.name() / file).generic_string());
        }
      }
    } catch (const std::exception& e) {
      io_errors[idx] = e.what();
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  for (const auto& e : io_errors) {
    if (!e.empty()) throw std::runtime_error("generate_dataset: " + e);
  }

  DatasetResult result;
  result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  DatasetManifest& m = result.manifest;
  json rollouts = json::array();
  for (const auto& rec : records) {
    json r = {{"i", rec.origin}, {"j", rec.sample}, {"theta", to_json(rec.params)},
              {"status", rec.accepted ? "ok" : "rejected"}};
    if (rec.accepted) {
      r["states"] = rec.states_file;
      r["pairs"] = rec.inputs.size();
      r["objective"] = to_json(rec.objective);
      if (cfg.render_images) {
        r["images"] = (fs::path("images") / rec.name()).generic_string();
        r["frames"] = rec.image_files.size();
      }
      ++m.accepted;
      m.pairs += rec.inputs.size();
    } else {
      r["reason"] = rec.reject_reason;
      ++m.rejected;
    }
    rollouts.push_back(std::move(r));
  }
  m.rollouts = records.size();
  m.document = {
      {"format_version", kManifestVersion},
      {"seed", rs.seed},
      {"randomization", to_json(rs)},
      {"mpc", to_json(cfg.mpc)},
      {"intrinsics", to_json(cfg.intrinsics)},
      {"camera_mount", to_json(cfg.camera_mount)},
      {"scene", {{"path", cfg.scene_path}, {"hash", cfg.scene_hash}}},
      {"trajectory", {{"steps", traj.steps()}, {"dt", traj.dt}, {"start_time", traj.start_time},
                      {"theta", to_json(traj.params)}}},
      {"images", cfg.render_images},
      {"counts", {{"origins", origins}, {"samples_per_origin", samples}, {"rollouts", m.rollouts},
                  {"accepted", m.accepted}, {"rejected", m.rejected}, {"pairs", m.pairs}}},
      {"columns", kStateColumns},
      {"rollouts", std::move(rollouts)}};
  write_text_file(out_dir / "manifest.json", m.document.dump(2) + "\n");
  result.records = std::move(records);
  return result;
}

}  // namespace figs
