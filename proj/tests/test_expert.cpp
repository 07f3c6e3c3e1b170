// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

#include "figs/expert.hpp"

#include <gtest/gtest.h>

#include <limits>

namespace figs {
namespace {

const DroneParams kNominal{};

const DesiredTrajectory& figure_eight() {
  static const DesiredTrajectory traj = sample_trajectory(min_snap(figure_eight_waypoints()), 20.0, kNominal);
  return traj;
}

DesiredTrajectory gentle_line() {
  return sample_trajectory(min_snap({{Vec3(0, 0, -1), 0, 0}, {Vec3(1, 0.5, -1.2), 0.3, 4}}), 20.0, kNominal);
}

TEST(ReferenceWindow, ExactSampleIsSelected) {
  const auto& traj = figure_eight();
  const auto w = reference_window(traj, traj.states[10], 0, 20);
  EXPECT_EQ(w.start, 10u);
  ASSERT_EQ(w.states.size(), 21u);
  ASSERT_EQ(w.inputs.size(), 20u);
  EXPECT_EQ(w.states[0].position, traj.states[10].position);
  EXPECT_EQ(w.inputs[5].thrust, traj.inputs[15].thrust);
}

TEST(ReferenceWindow, CrossingPointPicksTheSecondVisit) {
  const auto& traj = figure_eight();
  // The lemniscate passes through the origin at t = 0, 7.5 and 15 s.
  DroneState x;
  x.position = traj.states[150].position;
  EXPECT_LT((x.position - traj.states[0].position).norm(), 1e-9);
  const std::size_t last = 140;
  const int horizon = 20;
  std::size_t oracle = last;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = last; i < last + 2 * horizon; ++i) {
    const double d = (traj.states[i].position - x.position).norm();
    if (d < best) {
      best = d;
      oracle = i;
    }
  }
  const auto w = reference_window(traj, x, last, horizon);
  EXPECT_EQ(w.start, oracle);
  EXPECT_EQ(w.start, 150u);
}

TEST(ReferenceWindow, TailIsPaddedWithTerminalState) {
  const auto& traj = figure_eight();
  const auto w = reference_window(traj, traj.states[295], 290, 20);
  EXPECT_EQ(w.start, 295u);
  for (int j = 5; j <= 20; ++j) EXPECT_EQ(w.states[j].vector(), traj.states.back().vector());
  for (int j = 5; j < 20; ++j) EXPECT_EQ(w.inputs[j].vector(), traj.inputs.back().vector());
}

TEST(SolveMpc, OnReferenceRecoversDesiredInputs) {
  // Reference states are the model's own rollout of the desired inputs, so
  // the desired inputs are the exact optimum.
  const auto line = gentle_line();
  MpcConfig cfg;
  cfg.sqp_iters = 20;
  cfg.tol = 0.0;
  ReferenceWindow ref;
  ref.start = 30;
  ref.inputs.assign(line.inputs.begin() + 30, line.inputs.begin() + 30 + cfg.horizon);
  ref.states = rollout(line.states[30], ref.inputs, kNominal, cfg.dt());
  const std::vector<ControlInput> hover(cfg.horizon, hover_input(kNominal));
  const auto sol = solve_mpc(ref.states[0], kNominal, ref, hover, cfg);
  ASSERT_EQ(sol.inputs.size(), 20u);
  ASSERT_EQ(sol.predicted.size(), 21u);
  for (int k = 0; k < cfg.horizon; ++k) {
    EXPECT_LT((sol.inputs[k].vector() - ref.inputs[k].vector()).cwiseAbs().maxCoeff(), 1e-3) << k;
  }
  EXPECT_LT(sol.cost, 1e-4 * sol.initial_cost);
}

TEST(SolveMpc, PredictionIsConsistentWithDynamicsAndBounds) {
  const auto& traj = figure_eight();
  MpcConfig cfg;
  DroneState x = traj.states[60];
  x.position += Vec3(0.2, -0.1, 0.15);
  const auto ref = reference_window(traj, x, 55, cfg.horizon);
  const auto sol = solve_mpc(x, kNominal, ref, ref.inputs, cfg);
  EXPECT_LE(sol.cost, sol.initial_cost);
  EXPECT_EQ(sol.predicted[0].vector(), x.vector());
  for (int k = 0; k < cfg.horizon; ++k) {
    const InputVec u = sol.inputs[k].vector();
    EXPECT_TRUE((u.array() >= cfg.input_min.array()).all() && (u.array() <= cfg.input_max.array()).all());
    const DroneState next = step(sol.predicted[k], sol.inputs[k], kNominal, cfg.dt());
    EXPECT_LT((next.vector() - sol.predicted[k + 1].vector()).norm(), 1e-12);
  }
}

TEST(SolveMpc, CostIsNonIncreasingInIterations) {
  const auto& traj = figure_eight();
  DroneState x = traj.states[100];
  x.position += Vec3(-0.25, 0.2, 0.1);
  x.velocity += Vec3(0.3, 0.0, -0.2);
  double last = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 8; ++iters) {
    MpcConfig cfg;
    cfg.sqp_iters = iters;
    cfg.tol = 0.0;
    const auto ref = reference_window(traj, x, 95, cfg.horizon);
    const auto sol = solve_mpc(x, kNominal, ref, ref.inputs, cfg);
    EXPECT_LE(sol.cost, last + 1e-12);
    EXPECT_LE(sol.cost, sol.initial_cost);
    last = sol.cost;
  }
}

TEST(SolveMpc, HeavyInputWeightMatchesGridOracle) {
  // Two-step horizon around hover; with R scaled by 1e6 the optimum stays at
  // the reference input. The oracle evaluates the true cost on a grid of
  // perturbations and the solver's plan must be at least as good.
  MpcConfig cfg;
  cfg.horizon = 2;
  cfg.input_weight *= 1e6;
  cfg.sqp_iters = 20;
  cfg.tol = 0.0;
  DesiredTrajectory traj;
  traj.params = kNominal;
  traj.dt = cfg.dt();
  DroneState target;
  target.position = Vec3(0.0, 0.0, -1.0);
  traj.states.assign(3, target);
  traj.inputs.assign(2, hover_input(kNominal));
  DroneState x0;
  x0.position = Vec3(0.3, -0.2, -0.8);
  const auto ref = reference_window(traj, x0, 0, 2);
  const auto sol = solve_mpc(x0, kNominal, ref, ref.inputs, cfg);

  auto cost = [&](const InputVec& u0, const InputVec& u1) {
    const DroneState x1 = step(x0, ControlInput::from_vector(u0), kNominal, cfg.dt());
    const DroneState x2 = step(x1, ControlInput::from_vector(u1), kNominal, cfg.dt());
    return mpc_detail::trajectory_cost({x0, x1, x2}, {u0, u1}, ref, cfg);
  };
  const InputVec h = hover_input(kNominal).vector();
  for (const auto& u : sol.inputs) EXPECT_LT((u.vector() - h).norm(), 1e-3);
  const double best = cost(sol.inputs[0].vector(), sol.inputs[1].vector());
  const double step_size = 2e-4;
  for (int a = 0; a < 6561; ++a) {
    InputVec u0 = sol.inputs[0].vector(), u1 = sol.inputs[1].vector();
    int code = a;
    for (int d = 0; d < 8; ++d, code /= 3) {
      const double off = (code % 3 - 1) * step_size;
      if (d < 4) {
        u0[d] += off;
      } else {
        u1[d - 4] += off;
      }
    }
    ASSERT_GE(cost(u0, u1), best - 1e-9 * best);
  }
}

TEST(SolveMpc, DegenerateBoundsGiveConstantHover) {
  MpcConfig cfg;
  cfg.input_min = cfg.input_max = hover_input(kNominal).vector();
  cfg.validate();
  const auto& traj = figure_eight();
  DroneState x = traj.states[40];
  x.position += Vec3(0.1, 0.1, 0.1);
  const auto ref = reference_window(traj, x, 40, cfg.horizon);
  const auto sol = solve_mpc(x, kNominal, ref, ref.inputs, cfg);
  for (const auto& u : sol.inputs) EXPECT_EQ(u.vector(), cfg.input_min);
}

TEST(SolveMpc, RejectsWrongSliceLength) {
  MpcConfig cfg;
  ReferenceWindow w;
  w.states.resize(5);
  w.inputs.resize(4);
  EXPECT_THROW(solve_mpc(DroneState{}, kNominal, w, {}, cfg), std::invalid_argument);
}

TEST(SolveMpc, NonFiniteCostIsDivergence) {
  MpcConfig cfg;
  const auto& traj = figure_eight();
  auto ref = reference_window(traj, traj.states[0], 0, cfg.horizon);
  ref.states[3].position.x() = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_mpc(traj.states[0], kNominal, ref, ref.inputs, cfg), SolverDiverged);
}

TEST(MpcConfig, Validation) {
  MpcConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.input_min[0] = 5.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = MpcConfig{};
  cfg.stage_weight(0, 0) = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = MpcConfig{};
  cfg.horizon = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = MpcConfig{};
  cfg.input_weight(0, 1) = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ClosedLoop, CountsAndBounds) {
  MpcConfig cfg;
  const auto& traj = figure_eight();
  const auto r = closed_loop_run(traj.states[30], kNominal, traj, 1.0, cfg, 30);
  EXPECT_EQ(r.inputs.size(), 20u);
  EXPECT_EQ(r.states.size(), 21u);
  for (const auto& u : r.inputs) {
    const InputVec v = u.vector();
    EXPECT_TRUE((v.array() >= cfg.input_min.array()).all() && (v.array() <= cfg.input_max.array()).all());
  }
  for (std::size_t k = 0; k < r.inputs.size(); ++k) {
    EXPECT_EQ(step(r.states[k], r.inputs[k], kNominal, cfg.dt()).vector(), r.states[k + 1].vector());
  }
}

TEST(ClosedLoop, StartingOnReferenceStaysClose) {
  MpcConfig cfg;
  const auto& traj = figure_eight();
  for (const std::size_t i : {0u, 57u, 143u, 260u}) {
    const auto r = closed_loop_run(traj.states[i], kNominal, traj, 1.0, cfg, i);
    for (std::size_t k = 0; k < r.states.size(); ++k) {
      const std::size_t j = std::min(i + k, traj.states.size() - 1);
      EXPECT_LT((r.states[k].position - traj.states[j].position).norm(), 0.02) << i << " " << k;
    }
  }
}

TEST(ClosedLoop, LateralPerturbationContracts) {
  MpcConfig cfg;
  const auto& traj = figure_eight();
  const std::size_t i = 80;
  DroneState x0 = traj.states[i];
  const Vec3 lateral = traj.states[i].velocity.cross(Vec3::UnitZ()).normalized();
  x0.position += 0.25 * lateral;
  const auto r = closed_loop_run(x0, kNominal, traj, 1.0, cfg, i);
  // Deviation from the desired path: the window re-anchors on the nearest
  // sample, so along-track lag is not corrected and not counted.
  std::vector<double> dev;
  for (const auto& x : r.states) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& d : traj.states) best = std::min(best, (x.position - d.position).norm());
    dev.push_back(best);
  }
  for (std::size_t k = 11; k < dev.size(); ++k) EXPECT_LE(dev[k], dev[k - 1] + 1e-9) << k;
  EXPECT_LT(dev.back(), 0.05);
}

TEST(ClosedLoop, RejectsMismatchedRateAndBadDuration) {
  MpcConfig cfg;
  cfg.rate_hz = 10.0;
  const auto& traj = figure_eight();
  EXPECT_THROW(closed_loop_run(traj.states[0], kNominal, traj, 1.0, cfg), std::invalid_argument);
  EXPECT_THROW(closed_loop_run(traj.states[0], kNominal, traj, 0.0, MpcConfig{}), std::invalid_argument);
}

TEST(ClosedLoop, PartialRunKeepsStatesOnFailure) {
  // A huge velocity with impossible bounds diverges numerically.
  MpcConfig cfg;
  const auto& traj = figure_eight();
  DroneState x0 = traj.states[0];
  x0.velocity = Vec3(1e200, 0, 0);
  const auto r = closed_loop_run_partial(x0, kNominal, traj, 1.0, cfg);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_EQ(r.states.size(), r.inputs.size() + 1);
  EXPECT_THROW(closed_loop_run(x0, kNominal, traj, 1.0, cfg), SolverDiverged);
}

}  // namespace
}  // namespace figs
