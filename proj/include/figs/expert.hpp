// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

// Receding-horizon MPC expert with privileged dynamics parameters.
//
// Each solve is a small SQP: roll out the incumbent plan, linearize the RK4
// step along it, solve the time-varying LQR subproblem by a Riccati sweep
// with box-clamped inputs, then line-search on the nonlinear cost.
#pragma once

#include "figs/dynamics.hpp"
#include "figs/flatness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace figs {

class SolverDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MpcConfig {
  int horizon = 20;
  StateMat stage_weight = default_stage_weight();
  InputMat input_weight = default_input_weight();
  StateMat terminal_weight = 5.0 * default_stage_weight();
  InputVec input_min = (InputVec() << 0.0, -6.0, -6.0, -6.0).finished();
  InputVec input_max = (InputVec() << 4.0, 6.0, 6.0, 6.0).finished();
  double rate_hz = 20.0;
  int sqp_iters = 5;
  double tol = 1e-6;

  static StateMat default_stage_weight() {
    StateVec d;
    d << 10, 10, 10, 1, 1, 1, 2, 2, 2, 2;
    return d.asDiagonal();
  }
  static InputMat default_input_weight() {
    InputVec d;
    d << 2.0, 0.5, 0.5, 0.5;
    return d.asDiagonal();
  }

  double dt() const { return 1.0 / rate_hz; }

  void validate() const {
    if (horizon < 2) throw ConfigError("mpc: horizon must be >= 2");
    if (!(rate_hz > 0.0)) throw ConfigError("mpc: rate_hz must be positive");
    if (sqp_iters < 1) throw ConfigError("mpc: sqp_iters must be >= 1");
    if (!(tol >= 0.0)) throw ConfigError("mpc: tol must be >= 0");
    if ((input_min.array() > input_max.array()).any()) {
      throw ConfigError("mpc: infeasible input bounds (u_min > u_max)");
    }
    auto psd = [](const auto& m, const char* name) {
      if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-12)) {
        throw ConfigError(std::string("mpc: ") + name + " must be finite and symmetric");
      }
      using M = std::decay_t<decltype(m)>;
      Eigen::SelfAdjointEigenSolver<M> es(m);
      if (es.eigenvalues().minCoeff() < -1e-10) {
        throw ConfigError(std::string("mpc: ") + name + " must be positive semidefinite");
      }
    };
    psd(stage_weight, "Q");
    psd(input_weight, "R");
    psd(terminal_weight, "Q_N");
  }
};

struct ReferenceWindow {
  std::size_t start = 0;
  std::vector<DroneState> states;      // horizon + 1
  std::vector<ControlInput> inputs;    // horizon
};

/// Closest desired sample at or after last_index within the next
/// 2 * horizon samples; the slice repeats the final sample past the end.
inline ReferenceWindow reference_window(const DesiredTrajectory& traj, const DroneState& x,
                                        std::size_t last_index, int horizon) {
  const std::size_t n = traj.states.size();
  const std::size_t first = std::min(last_index, n - 1);
  const std::size_t last = std::min(n, first + 2 * static_cast<std::size_t>(horizon));
  std::size_t best = first;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < last; ++i) {
    const double d = (x.position - traj.states[i].position).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  ReferenceWindow w;
  w.start = best;
  const ControlInput tail_input = traj.inputs.empty() ? hover_input(traj.params) : traj.inputs.back();
  for (int j = 0; j <= horizon; ++j) {
    w.states.push_back(traj.states[std::min(best + j, n - 1)]);
    if (j < horizon) {
      const std::size_t k = best + j;
      w.inputs.push_back(k < traj.inputs.size() ? traj.inputs[k] : tail_input);
    }
  }
  return w;
}

struct MpcSolution {
  std::vector<ControlInput> inputs;
  std::vector<DroneState> predicted;
  double cost = 0.0;
  double initial_cost = 0.0;
  int iterations = 0;
};

namespace mpc_detail {

/// State error with the reference quaternion sign-aligned to the state's.
inline StateVec state_error(const DroneState& x, const DroneState& ref) {
  StateVec r = ref.vector();
  const StateVec s = x.vector();
  if (s.segment<4>(6).dot(r.segment<4>(6)) < 0.0) r.segment<4>(6) *= -1.0;
  return s - r;
}

inline InputVec clamp(const InputVec& u, const InputVec& lo, const InputVec& hi) {
  return u.cwiseMax(lo).cwiseMin(hi);
}

inline double trajectory_cost(const std::vector<DroneState>& xs, const std::vector<InputVec>& us,
                              const ReferenceWindow& ref, const MpcConfig& cfg) {
  double j = 0.0;
  const int n = cfg.horizon;
  for (int k = 0; k < n; ++k) {
    const StateVec e = state_error(xs[k], ref.states[k]);
    const InputVec du = us[k] - ref.inputs[k].vector();
    j += e.dot(cfg.stage_weight * e) + du.dot(cfg.input_weight * du);
  }
  const StateVec e = state_error(xs[n], ref.states[n]);
  return j + e.dot(cfg.terminal_weight * e);
}

/// min 1/2 d'Hd + g'd  s.t. lo <= d <= hi, by projected Newton. `free`
/// reports the inactive coordinates at the solution.
inline InputVec box_qp(const InputMat& h, const InputVec& g, const InputVec& lo, const InputVec& hi,
                       Eigen::Array<bool, kInputDim, 1>& free) {
  InputVec d = InputVec::Zero().cwiseMax(lo).cwiseMin(hi);
  auto objective = [&](const InputVec& v) { return 0.5 * v.dot(h * v) + g.dot(v); };
  free.setConstant(true);
  for (int iter = 0; iter < 50; ++iter) {
    const InputVec grad = h * d + g;
    for (int i = 0; i < kInputDim; ++i) {
      const bool at_lo = d[i] <= lo[i] && grad[i] > 0.0;
      const bool at_hi = d[i] >= hi[i] && grad[i] < 0.0;
      free[i] = !(lo[i] == hi[i] || at_lo || at_hi);
    }
    const int nf = static_cast<int>(free.count());
    if (nf == 0) break;
    Eigen::MatrixXd hff(nf, nf);
    Eigen::VectorXd gf(nf);
    std::array<int, kInputDim> idx{};
    for (int i = 0, a = 0; i < kInputDim; ++i) {
      if (free[i]) idx[a++] = i;
    }
    for (int a = 0; a < nf; ++a) {
      gf[a] = grad[idx[a]];
      for (int b = 0; b < nf; ++b) hff(a, b) = h(idx[a], idx[b]);
    }
    const Eigen::VectorXd step_f = -hff.ldlt().solve(gf);
    InputVec dir = InputVec::Zero();
    for (int a = 0; a < nf; ++a) dir[idx[a]] = step_f[a];
    if (dir.norm() < 1e-13) break;
    const double f0 = objective(d);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      const InputVec cand = (d + alpha * dir).cwiseMax(lo).cwiseMin(hi);
      if (objective(cand) <= f0 + 1e-4 * alpha * grad.dot(dir)) {
        moved = (cand - d).norm() > 1e-14;
        d = cand;
        break;
      }
    }
    if (!moved) break;
  }
  return d;
}

}  // namespace mpc_detail

/// Minimizes sum(dx'Q dx + du'R du) + dx_N'Q_N dx_N over the horizon with the
/// RK4 model under `params`, subject to input bounds.
inline MpcSolution solve_mpc(const DroneState& x0, const DroneParams& params,
                             const ReferenceWindow& ref, const std::vector<ControlInput>& warm_start,
                             const MpcConfig& cfg) {
  const int n = cfg.horizon;
  if (static_cast<int>(ref.states.size()) != n + 1 || static_cast<int>(ref.inputs.size()) != n) {
    throw std::invalid_argument("solve_mpc: reference slice must hold horizon + 1 states");
  }
  const double dt = cfg.dt();
  const InputVec& lo = cfg.input_min;
  const InputVec& hi = cfg.input_max;

  std::vector<InputVec> us(n);
  for (int k = 0; k < n; ++k) {
    const InputVec guess = k < static_cast<int>(warm_start.size()) ? warm_start[k].vector()
                                                                   : ref.inputs[k].vector();
    us[k] = mpc_detail::clamp(guess, lo, hi);
  }
  std::vector<DroneState> xs(n + 1);
  xs[0] = x0;
  for (int k = 0; k < n; ++k) xs[k + 1] = step(xs[k], ControlInput::from_vector(us[k]), params, dt);
  double cost = mpc_detail::trajectory_cost(xs, us, ref, cfg);
  if (!std::isfinite(cost)) throw SolverDiverged("solve_mpc: non-finite initial cost");

  MpcSolution sol;
  sol.initial_cost = cost;

  std::vector<StateMat> a(n);
  std::vector<StateInputMat> b(n);
  std::vector<InputVec> ff(n);
  std::vector<Eigen::Matrix<double, kInputDim, kStateDim>> fb(n);

  for (int iter = 0; iter < cfg.sqp_iters; ++iter) {
    for (int k = 0; k < n; ++k) {
      const auto lin = linearize_step(xs[k], ControlInput::from_vector(us[k]), params, dt);
      a[k] = lin.a;
      b[k] = lin.b;
    }

    StateVec vx = 2.0 * cfg.terminal_weight * mpc_detail::state_error(xs[n], ref.states[n]);
    StateMat vxx = 2.0 * cfg.terminal_weight;
    for (int k = n - 1; k >= 0; --k) {
      const StateVec e = mpc_detail::state_error(xs[k], ref.states[k]);
      const InputVec du = us[k] - ref.inputs[k].vector();
      const StateVec qx = 2.0 * cfg.stage_weight * e + a[k].transpose() * vx;
      const InputVec qu = 2.0 * cfg.input_weight * du + b[k].transpose() * vx;
      const StateMat qxx = 2.0 * cfg.stage_weight + a[k].transpose() * vxx * a[k];
      InputMat quu = 2.0 * cfg.input_weight + b[k].transpose() * vxx * b[k];
      quu = 0.5 * (quu + quu.transpose()) + 1e-9 * InputMat::Identity();
      const Eigen::Matrix<double, kInputDim, kStateDim> qux = b[k].transpose() * vxx * a[k];

      Eigen::Array<bool, kInputDim, 1> free;
      ff[k] = mpc_detail::box_qp(quu, qu, lo - us[k], hi - us[k], free);
      fb[k].setZero();
      const int nf = static_cast<int>(free.count());
      if (nf > 0) {
        Eigen::MatrixXd hff(nf, nf);
        Eigen::MatrixXd qf(nf, kStateDim);
        std::array<int, kInputDim> idx{};
        for (int i = 0, c = 0; i < kInputDim; ++i) {
          if (free[i]) idx[c++] = i;
        }
        for (int r = 0; r < nf; ++r) {
          qf.row(r) = qux.row(idx[r]);
          for (int c = 0; c < nf; ++c) hff(r, c) = quu(idx[r], idx[c]);
        }
        const Eigen::MatrixXd kf = -hff.ldlt().solve(qf);
        for (int r = 0; r < nf; ++r) fb[k].row(idx[r]) = kf.row(r);
      }
      const auto& kk = fb[k];
      const InputVec& d = ff[k];
      vx = qx + kk.transpose() * quu * d + kk.transpose() * qu + qux.transpose() * d;
      vxx = qxx + kk.transpose() * quu * kk + kk.transpose() * qux + qux.transpose() * kk;
      vxx = 0.5 * (vxx + vxx.transpose());
    }

    bool accepted = false;
    double alpha = 1.0;
    std::vector<DroneState> xs_new(n + 1);
    std::vector<InputVec> us_new(n);
    double cost_new = cost;
    for (int ls = 0; ls < 10; ++ls, alpha *= 0.5) {
      xs_new[0] = x0;
      for (int k = 0; k < n; ++k) {
        const StateVec dx = xs_new[k].vector() - xs[k].vector();
        us_new[k] = mpc_detail::clamp(us[k] + alpha * ff[k] + fb[k] * dx, lo, hi);
        xs_new[k + 1] = step(xs_new[k], ControlInput::from_vector(us_new[k]), params, dt);
      }
      cost_new = mpc_detail::trajectory_cost(xs_new, us_new, ref, cfg);
      if (!std::isfinite(cost_new)) continue;
      if (cost_new < cost) {
        accepted = true;
        break;
      }
    }
    sol.iterations = iter + 1;
    if (!accepted) break;
    const double decrease = cost - cost_new;
    xs.swap(xs_new);
    us.swap(us_new);
    cost = cost_new;
    if (decrease < cfg.tol) break;
  }

  if (!std::isfinite(cost)) throw SolverDiverged("solve_mpc: non-finite cost");
  sol.cost = cost;
  sol.predicted = std::move(xs);
  sol.inputs.reserve(n);
  for (const auto& u : us) sol.inputs.push_back(ControlInput::from_vector(u));
  return sol;
}

struct ClosedLoopResult {
  std::vector<DroneState> states;
  std::vector<ControlInput> inputs;
  std::vector<std::size_t> reference_indices;
  std::string failure;  // empty unless the run stopped early
};

/// Runs round(rate * duration) control steps from x0 on the true model
/// `params`, warm-starting each solve with the previous plan shifted by one.
/// On divergence the states flown so far are kept and `failure` is set.
inline ClosedLoopResult closed_loop_run_partial(const DroneState& x0, const DroneParams& params,
                                        const DesiredTrajectory& traj, double duration,
                                        const MpcConfig& cfg, std::size_t start_index = 0) {
  if (!(duration > 0.0)) throw std::invalid_argument("closed_loop_run: duration must be positive");
  if (traj.states.empty()) throw std::invalid_argument("closed_loop_run: empty desired trajectory");
  if (std::abs(traj.dt - cfg.dt()) > 1e-9) {
    throw std::invalid_argument("closed_loop_run: trajectory sample rate differs from controller rate");
  }
  const auto steps = static_cast<std::size_t>(std::llround(cfg.rate_hz * duration));
  ClosedLoopResult out;
  out.states.reserve(steps + 1);
  out.inputs.reserve(steps);
  out.states.push_back(x0);

  std::size_t last_index = start_index;
  std::vector<ControlInput> plan;
  for (std::size_t s = 0; s < steps; ++s) {
    const DroneState& x = out.states.back();
    const ReferenceWindow ref = reference_window(traj, x, last_index, cfg.horizon);
    last_index = ref.start;
    if (plan.empty()) {
      plan = ref.inputs;
    } else {
      plan.erase(plan.begin());
      plan.push_back(plan.back());
    }
    MpcSolution sol;
    try {
      sol = solve_mpc(x, params, ref, plan, cfg);
    } catch (const SolverDiverged& e) {
      out.failure = std::string(e.what()) + " at step " + std::to_string(s);
      return out;
    }
    plan = sol.inputs;
    const ControlInput u = plan.front();
    const DroneState next = step(x, u, params, cfg.dt());
    if (!next.is_finite()) {
      out.failure = "closed_loop_run: non-finite state at step " + std::to_string(s);
      return out;
    }
    out.inputs.push_back(u);
    out.reference_indices.push_back(ref.start);
    out.states.push_back(next);
  }
  return out;
}

/// As closed_loop_run_partial, but divergence throws SolverDiverged.
inline ClosedLoopResult closed_loop_run(const DroneState& x0, const DroneParams& params,
                                        const DesiredTrajectory& traj, double duration,
                                        const MpcConfig& cfg, std::size_t start_index = 0) {
  auto out = closed_loop_run_partial(x0, params, traj, duration, cfg, start_index);
  if (!out.failure.empty()) throw SolverDiverged(out.failure);
  return out;
}

}  // namespace figs
