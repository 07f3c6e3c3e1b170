// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. `acceptance --criterion N` runs one check, prints a
// single PASS/FAIL line and exits nonzero on failure; with no arguments every
// check runs. A failure that only more cores could fix exits with 77.

#include "figs/analysis.hpp"
#include "figs/datagen.hpp"
#include "figs/dynamics.hpp"
#include "figs/expert.hpp"
#include "figs/flatness.hpp"
#include "figs/io.hpp"
#include "figs/render.hpp"
#include "figs/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace figs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Exit status for a failure that the host cannot measure (too few cores);
// ctest reports it as skipped instead of passed.
constexpr int kExitHostLimited = 77;

struct Outcome {
  bool pass = true;
  int failures = 0;
  bool host_limited = false;  // the single failure needs hardware this host lacks
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      ++failures;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Quat random_attitude(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quat{n(gen), n(gen), n(gen), n(gen)}.normalized();
}

void closed_form_vs_bruteforce(Outcome& o) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0), thrust(0.3, 3.0);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int i = 0; i < 1000; ++i) {
    const double c = 6.03 * (1.0 + 0.5 * u(gen));
    const double f = thrust(gen);
    const Quat q = random_attitude(gen);
    const Vec3 f_add = 5.0 * Vec3(u(gen), u(gen), u(gen));
    worst = std::max(worst, std::abs(c_hat(c, f, q, f_add).c_hat - c_hat_bruteforce(c, f, q, f_add)));
  }
  const double secs = seconds_since(t0);
  o.detail << "max |closed - brute| = " << worst << " over 1000 draws in " << secs << " s";
  o.require(worst <= 1e-6, "agreement 1e-6");
  o.require(secs < 1.0, "runtime < 1 s");
}

void added_mass_estimate(Outcome& o) {
  const double c = 6.03;
  const double f = DroneParams{}.hover_thrust();
  const Quat q = Quat::from_axis_angle(Vec3(1, 0.5, 0), 0.2);
  const Vec3 z_b = rotate_vector(q, Vec3::UnitZ());
  // With 30% more mass the same command produces c/1.3 of the modeled thrust
  // acceleration; the shortfall appears as a world-frame specific force.
  const Vec3 f_add = -(c / 1.3) * f * z_b + c * f * z_b;
  const double est = c_hat(c, f, q, f_add).c_hat;
  o.detail << "c_hat = " << est << " (6.03/1.3 = " << c / 1.3 << ", reported 4.62)";
  o.require(est >= 4.55 && est <= 4.75, "c_hat in [4.55, 4.75]");
  o.require(4.62 >= 4.55 && 4.62 <= 4.75, "bracket contains 4.62");
}

DroneState sinusoidal_endpoint(int substeps) {
  const DroneParams p;
  DroneState x;
  for (int w = 0; w < 10; ++w) {
    const double t = 0.1 * w;
    const ControlInput u{p.hover_thrust() * (1.0 + 0.2 * std::sin(2.0 * t)),
                         Vec3(0.8 * std::sin(3.0 * t), -0.5 * std::cos(2.0 * t), 0.3 * std::sin(t))};
    for (int s = 0; s < substeps; ++s) x = step(x, u, p, 0.1 / substeps);
  }
  return x;
}

void dynamics_checks(Outcome& o) {
  const DroneParams p;
  DroneState x;
  x.position = Vec3(1, 2, -3);
  x.velocity = Vec3(0.5, -0.2, -1.0);
  DroneState y = x;
  for (int k = 0; k < 10; ++k) y = step(y, {0.0, Vec3::Zero()}, p, 0.05);
  const Vec3 g(0, 0, kGravity);
  const Vec3 p_exact = x.position + 0.5 * x.velocity + 0.5 * g * 0.25;
  const Vec3 v_exact = x.velocity + 0.5 * g;
  const double fall_err = std::max((y.position - p_exact).norm(), (y.velocity - v_exact).norm());

  DroneState z;
  double drift = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double t = 0.01 * k;
    z = step(z, {p.hover_thrust(), Vec3(std::sin(t), 2 * std::cos(0.7 * t), 0.5)}, p, 0.01);
    drift = std::max(drift, std::abs(z.attitude.norm() - 1.0));
  }

  const StateVec a = sinusoidal_endpoint(2).vector();
  const StateVec b = sinusoidal_endpoint(4).vector();
  const StateVec c = sinusoidal_endpoint(8).vector();
  const double order = std::log2((a - b).norm() / (b - c).norm());

  o.detail << "free-fall error " << fall_err << ", max norm drift " << drift << ", observed order " << order;
  o.require(fall_err <= 1e-9, "free fall 1e-9");
  o.require(drift <= 1e-9, "norm drift 1e-9");
  o.require(order >= 3.5, "order >= 3.5");
}

std::vector<Waypoint> random_waypoints(std::mt19937_64& gen, int segments) {
  std::uniform_real_distribution<double> pos(-3.0, 3.0), dt(0.8, 2.5), yaw(-3.0, 3.0);
  std::vector<Waypoint> w;
  double t = 0.0;
  for (int i = 0; i <= segments; ++i) {
    w.push_back({Vec3(pos(gen), pos(gen), -1.0 + 0.3 * pos(gen)), yaw(gen), t});
    t += dt(gen);
  }
  return w;
}

void min_snap_checks(Outcome& o) {
  const DroneParams params;
  std::mt19937_64 gen(4);
  double interp = 0.0, cont = 0.0, flat = 0.0, slowest_ms = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_waypoints(gen, 2 + trial % 9);
    const auto p = min_snap(w);
    for (const auto& wp : w) {
      interp = std::max(interp, (p.evaluate(wp.time, 0).head<3>() - wp.position).norm());
    }
    for (std::size_t i = 1; i < p.segments.size(); ++i) {
      for (int d = 0; d <= 4; ++d) {
        const Vec4 l = p.segments[i - 1].evaluate_normalized(1.0, d);
        const Vec4 r = p.segments[i].evaluate_normalized(0.0, d);
        cont = std::max(cont, (l.head<3>() - r.head<3>()).cwiseAbs().maxCoeff());
      }
    }
    for (double t = p.start_time(); t <= p.end_time(); t += 0.05) {
      const FlatOutput f = flat_output_at(p, t);
      const auto [x, u] = flat_outputs_to_state(f, params);
      flat = std::max(flat, (derivative(x, u, params).segment<3>(3) - f.acceleration).norm());
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_waypoints(gen, 10);
    const auto t0 = Clock::now();
    const auto p = min_snap(w);
    slowest_ms = std::max(slowest_ms, 1e3 * seconds_since(t0));
    if (p.segments.size() != 10) o.require(false, "10 segments");
  }
  o.detail << "interpolation " << interp << " m, knot jump " << cont << ", flatness " << flat
           << ", slowest 10-segment solve " << slowest_ms << " ms";
  o.require(interp <= 1e-6, "interpolation 1e-6");
  o.require(cont <= 1e-6, "continuity 1e-6");
  o.require(flat <= 1e-6, "flatness 1e-6");
  o.require(slowest_ms < 50.0, "solve < 50 ms");
}

void expert_tracking(Outcome& o) {
  const DroneParams nominal;
  const MpcConfig cfg;
  const auto traj = sample_trajectory(min_snap(figure_eight_waypoints()), 20.0, nominal);
  const auto run = closed_loop_run(traj.states.front(), nominal, traj, traj.duration(), cfg);
  const double e0 = tte(run.states, traj.states);
  const double p0 = pp(run.states, traj.states);

  RandomizationSpec spec;
  double worst = 0.0;
  int diverged = 0;
  double worst_pp = 1.0;
  for (std::size_t trial = 0; trial < 50; ++trial) {
    Rng rng = rollout_rng(2024, trial, 0);
    const auto seed = sample_rollout_seed(spec, traj.states.front(), rng);
    const auto r = closed_loop_run_partial(seed.initial, seed.params, traj, traj.duration(), cfg);
    if (!r.failure.empty()) {
      ++diverged;
      continue;
    }
    worst = std::max(worst, tte(r.states, traj.states));
    worst_pp = std::min(worst_pp, pp(r.states, traj.states));
  }
  o.detail << "nominal TTE " << e0 << " m, PP " << 100 * p0 << "%; randomized worst TTE " << worst
           << " m, worst PP " << 100 * worst_pp << "%, " << diverged << "/50 diverged";
  o.require(e0 <= 0.02, "nominal TTE 0.02");
  o.require(p0 == 1.0, "nominal PP 100%");
  o.require(worst <= 0.2, "randomized TTE 0.2");
  o.require(diverged == 0, "no divergence");
}

SplatScene random_scene(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SplatScene s;
  s.background = Vec3(u(gen), u(gen), u(gen));
  for (std::size_t i = 0; i < n; ++i) {
    Gaussian3D g;
    g.mean = Vec3(6 * u(gen) - 3, 4 * u(gen) - 2, 1.0 + 8 * u(gen));
    g.scale = Vec3(0.01 + 0.12 * u(gen), 0.01 + 0.12 * u(gen), 0.01 + 0.12 * u(gen));
    g.rotation = Quat{u(gen) - 0.5, u(gen) - 0.5, u(gen) - 0.5, u(gen) - 0.5}.normalized();
    g.opacity = u(gen);
    g.color = Vec3(u(gen), u(gen), u(gen));
    s.gaussians.push_back(g);
  }
  return s;
}

void renderer_equivalence(Outcome& o) {
  const CameraIntrinsics k{240, 240, 160, 120, 320, 240};
  const RigidTransform none = RigidTransform::identity();
  double worst_frac = 1.0;
  for (int i = 0; i < 20; ++i) {
    const SplatScene s = random_scene(500 * static_cast<std::size_t>(i + 1), 700 + i);
    const Image a = render(s, Pose{}, none, k);
    const Image b = render_reference(s, Pose{}, none, k);
    std::size_t good = 0;
    const std::size_t pixels = a.rgb.size() / 3;
    for (std::size_t p = 0; p < pixels; ++p) {
      bool ok = true;
      for (int c = 0; c < 3; ++c) ok = ok && std::abs(int(a.rgb[3 * p + c]) - int(b.rgb[3 * p + c])) <= 2;
      good += ok;
    }
    worst_frac = std::min(worst_frac, double(good) / double(pixels));
  }

  SplatScene empty;
  empty.background = Vec3(0.3, 0.55, 0.8);
  const Image bg = render(empty, Pose{}, none, k);
  bool exact = true;
  for (std::size_t p = 0; p < bg.rgb.size(); p += 3) {
    for (int c = 0; c < 3; ++c) exact = exact && bg.rgb[p + c] == render_detail::quantize(empty.background[c]);
  }

  // One gaussian on the optical axis through the centre of pixel (160, 120)
  // must render symmetrically about that pixel.
  SplatScene single;
  Gaussian3D g;
  g.mean = Vec3(0.5 / 240 * 3, 0.5 / 240 * 3, 3);
  g.scale = Vec3(0.2, 0.2, 0.2);
  g.opacity = 0.9;
  g.color = Vec3(1, 0.5, 0.2);
  single.gaussians.push_back(g);
  const Image one = render(single, Pose{}, none, k);
  int asym = 0;
  for (int dy = 0; dy < 100; ++dy) {
    for (int dx = 0; dx < 100; ++dx) {
      for (int c = 0; c < 3; ++c) {
        const int v = one.at(160 + dx, 120 + dy, c);
        asym = std::max({asym, std::abs(v - one.at(160 - dx, 120 + dy, c)), std::abs(v - one.at(160 + dx, 120 - dy, c)),
                         std::abs(v - one.at(160 - dx, 120 - dy, c))});
      }
    }
  }
  o.detail << "worst within-2/255 fraction " << worst_frac << " over 20 scenes (500..10000), empty scene exact: "
           << (exact ? "yes" : "no") << ", single-gaussian asymmetry " << asym << "/255";
  o.require(worst_frac >= 0.999, "99.9% of pixels within 2/255");
  o.require(exact, "exact background");
  o.require(asym <= 1, "symmetry 1/255");
}

double frame_rate(const SplatScene& scene, const Pose& body, const CameraIntrinsics& k, int workers, int frames) {
  const RigidTransform mount = forward_camera_mount(0.05);
  render(scene, body, mount, k, {workers});
  const auto t0 = Clock::now();
  for (int i = 0; i < frames; ++i) render(scene, body, mount, k, {workers});
  return frames / seconds_since(t0);
}

void renderer_throughput(Outcome& o) {
  const SplatScene scene = generate_synthetic_scene(demo_scene_spec(50000), 0);
  const CameraIntrinsics k{240, 240, 160, 120, 320, 240};
  const Pose body{Vec3(0, 0, -1), Quat::identity()};
  const int cores = render_detail::resolve_workers(0);
  const double fps_all = frame_rate(scene, body, k, 0, 30);
  const double fps1 = frame_rate(scene, body, k, 1, 20);
  const double fps8 = frame_rate(scene, body, k, 8, 20);
  o.detail << scene.gaussians.size() << " gaussians at 320x240: " << fps_all << " fps with all " << cores
           << " core(s); 1 worker " << fps1 << " fps, 8 workers " << fps8 << " fps, speedup " << fps8 / fps1;
  const bool scaled = fps8 / fps1 >= 2.8;
  o.require(fps_all >= 30.0, ">= 30 fps");
  o.require(scaled, "1->8 worker speedup >= 2.8");
  if (!scaled && cores < 8) {
    o.host_limited = true;
    o.detail << " (host exposes " << cores << " core(s); 8-worker scaling cannot be observed here)";
  }
}

void dataset_pipeline(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "figs_acceptance_dataset";
  fs::remove_all(root);
  const DroneParams nominal;
  const auto hop = sample_trajectory(
      min_snap({{Vec3(0, 0, -1), 0, 0}, {Vec3(0.8, -0.4, -1.3), 0.5, 1.0}}), 20.0, nominal);
  const SplatScene scene = generate_synthetic_scene(demo_scene_spec(5000), 0);
  DatasetConfig cfg;
  cfg.randomization.samples_per_step = 5;
  cfg.randomization.rollout_duration = 1.0;
  cfg.randomization.seed = 99;
  cfg.intrinsics = {160, 160, 160, 120, 320, 240};

  cfg.workers = 1;
  const auto a = generate_dataset(&scene, hop, cfg, root / "a");
  cfg.workers = 4;
  const auto b = generate_dataset(&scene, hop, cfg, root / "b");
  const bool same = read_text_file(root / "a" / "manifest.json") == read_text_file(root / "b" / "manifest.json");

  std::size_t short_rollouts = 0;
  double replay_err = 0.0;
  for (const auto& rec : a.records) {
    if (!rec.accepted) continue;
    if (rec.states.size() != 21 || rec.image_files.size() != 21) ++short_rollouts;
    const StateLog log = read_states_csv(root / "a" / rec.states_file);
    const auto replay = rollout(log.states.front(), log.inputs, log.params, cfg.mpc.dt());
    for (std::size_t k = 0; k < replay.size(); ++k) {
      replay_err = std::max(replay_err, (replay[k].vector() - log.states[k].vector()).cwiseAbs().maxCoeff());
    }
  }

  // Throughput run without images.
  const auto fig8 = sample_trajectory(min_snap(figure_eight_waypoints()), 20.0, nominal);
  DatasetConfig big;
  big.randomization.samples_per_step = 17;
  big.randomization.seed = 5;
  big.render_images = false;
  const auto c = generate_dataset(nullptr, fig8, big, root / "big");
  const double pairs_per_s = c.manifest.pairs / std::max(c.wall_seconds, 1e-9);

  o.detail << a.manifest.rollouts << " rollouts (" << a.manifest.accepted << " accepted), " << a.manifest.pairs
           << " pairs; manifests identical at 1 and 4 workers: " << (same ? "yes" : "no")
           << "; max replay error " << replay_err << "; no-image run " << c.manifest.pairs << " pairs in "
           << c.wall_seconds << " s (" << pairs_per_s << " pairs/s, " << c.manifest.rejected << " rejected)";
  o.require(a.manifest.rollouts == 100 && a.manifest.accepted == 100, "100 accepted rollouts");
  o.require(a.manifest.pairs == 2000 && short_rollouts == 0, "20 pairs per rollout");
  o.require(b.manifest.rollouts == 100, "second run count");
  o.require(same, "identical manifests");
  o.require(replay_err <= 1e-6, "replay 1e-6");
  o.require(c.manifest.pairs >= 100000, ">= 100k pairs");
  fs::remove_all(root);
}

std::vector<DroneState> line_at(double lateral) {
  std::vector<DroneState> xs(201);
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k].position = Vec3(-2.0 + 0.02 * double(k), lateral, -1.5);
  return xs;
}

void metric_fixtures(Outcome& o) {
  const auto d = line_at(0.0);
  double tte_err = 0.0;
  bool pp_ok = true;
  for (const double off : {0.0, 0.05, 0.1, 0.25, 0.29, 0.31, 0.5, 1.0}) {
    const auto f = line_at(off);
    tte_err = std::max(tte_err, std::abs(tte(f, d) - off));
    const double expected = off <= 0.3 ? 1.0 : 0.0;
    pp_ok = pp_ok && std::abs(pp(f, d) - expected) <= 1e-9;
  }
  o.detail << "max |TTE - offset| " << tte_err << ", PP fixtures " << (pp_ok ? "exact" : "wrong")
           << ", default radius " << kDefaultProximityRadius << " m";
  o.require(tte_err <= 1e-9, "TTE equals offset");
  o.require(pp_ok, "PP in {0, 1} as constructed");
  o.require(kDefaultProximityRadius == 0.30, "default radius 0.30 m");
}

void history_identities(Outcome& o) {
  const DroneParams p;
  std::mt19937_64 gen(77);
  std::normal_distribution<double> n(0.0, 1.0);
  double telescope = 0.0, rotation = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ControlInput> us;
    for (int k = 0; k < 60; ++k) us.push_back({p.hover_thrust() * (1.0 + 0.3 * n(gen)), Vec3(n(gen), n(gen), n(gen))});
    DroneState x0;
    x0.attitude = random_attitude(gen);
    x0.velocity = Vec3(n(gen), n(gen), n(gen));
    const auto xs = rollout(x0, us, p, 0.05);
    std::vector<double> ts;
    for (std::size_t k = 0; k < xs.size(); ++k) ts.push_back(0.05 * double(k));
    const auto h = history_features(xs, ts);
    Vec3 sum = Vec3::Zero();
    for (const auto& s : h) sum += s.dv;
    telescope = std::max(telescope, (sum - (xs.back().velocity - xs.front().velocity)).norm());
    for (std::size_t k = 1; k < xs.size(); ++k) {
      const Vec3 v(n(gen), n(gen), n(gen));
      const Vec3 expected = rotate_vector(xs[k].attitude.conjugate(), rotate_vector(xs[k - 1].attitude, v));
      rotation = std::max(rotation, (rotate_vector(h[k - 1].dq, v) - expected).norm());
    }
  }
  o.detail << "telescoping error " << telescope << ", relative rotation error " << rotation;
  o.require(telescope <= 1e-9, "sum dv telescopes");
  o.require(rotation <= 1e-9, "dq composition");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> check;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "c_hat closed form vs brute force", closed_form_vs_bruteforce},
      {2, "c_hat with 30% added mass", added_mass_estimate},
      {3, "dynamics integrator", dynamics_checks},
      {4, "minimum-snap trajectories", min_snap_checks},
      {5, "expert tracking", expert_tracking},
      {6, "renderer equivalence", renderer_equivalence},
      {7, "renderer throughput", renderer_throughput},
      {8, "dataset pipeline", dataset_pipeline},
      {9, "tracking metrics", metric_fixtures},
      {10, "history features", history_identities},
  };
  return all;
}

int run_one(const Criterion& c) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    c.check(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "[exception: " << e.what() << "]";
  }
  std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", seconds_since(t0),
              o.detail.str().c_str());
  std::fflush(stdout);
  if (o.pass) return 0;
  return o.host_limited && o.failures == 1 ? kExitHostLimited : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::string(argv[1]) == "--criterion") {
    const int id = std::atoi(argv[2]);
    for (const auto& c : criteria()) {
      if (c.id == id) return run_one(c);
    }
    std::fprintf(stderr, "unknown criterion %s\n", argv[2]);
    return 2;
  }
  if (argc != 1) {
    std::fprintf(stderr, "usage: acceptance [--criterion N]\n");
    return 2;
  }
  bool all = true;
  for (const auto& c : criteria()) all = run_one(c) == 0 && all;
  return all ? 0 : 1;
}
