// Copyright 2026 The compensctrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Closed-loop trials: simulated human + observer + LQR + robot.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "compensctrl/estimator_regulator.hpp"

namespace compensctrl {

enum class PlantModel {
  /// Full kinematics, relinearized every step.
  nonlinear,
  /// Error dynamics frozen at the initial configuration.
  linearized,
};

struct Scenario {
  std::string name;
  KinematicChain chain;
  InternalModel mode = InternalModel::connected;
  PlantModel plant = PlantModel::nonlinear;

  /// The simulated human.
  HumanModel human;
  bool w_defaulted = false;

  RegulatorConfig regulator;
  /// Initial observer covariance. Ignored when `steady_state_covariance`.
  Matrix12d P0 = default_initial_covariance();
  /// Start the observer at its stationary covariance (constant gain).
  bool steady_state_covariance = false;
  /// The regulator models the human with Lambda_hat = ratio * Lambda.
  double lambda_ratio_e = 1.0;
  double lambda_ratio_c = 1.0;

  VectorXd initial_q;
  /// Reaching target relative to the initial end-effector pose: position
  /// offset, and rotation vector premultiplied onto the initial orientation.
  ErrorVec6 target_offset;

  /// Gaussian perturbation of the initial estimate (0 = start at zero).
  double initial_estimate_std = 0.0;
  std::uint64_t seed = 0;

  double horizon = 15.0;
  double dt = 1e-3;
  bool controller_enabled = true;
  bool early_termination = true;

  void validate() const {
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (dt > horizon) throw ConfigError("dt must not exceed the horizon");
    if (initial_q.size() != chain.joint_count())
      throw DimensionError("initial_q has " + std::to_string(initial_q.size()) +
                           " entries, chain has " + std::to_string(chain.joint_count()));
    if (!(lambda_ratio_e > 0.0) || !(lambda_ratio_c > 0.0))
      throw ConfigError("lambda ratios must be positive");
    if (initial_estimate_std < 0.0) throw ConfigError("initial_estimate_std must be >= 0");
    human.validate();
    regulator.validate(chain.input_dim());
    if (mode == InternalModel::disconnected_avatar) validate_avatar_chain(chain);
    if (human.internal_model != mode)
      throw ConfigError("human internal model does not match the scenario mode");
  }

  /// The regulator's model of the human.
  HumanModel estimated_human() const {
    HumanModel m = human;
    m.lambda_e *= lambda_ratio_e;
    m.lambda_c *= lambda_ratio_c;
    return m;
  }

  Targets targets() const {
    const Pose xe = forward_kinematics(chain, initial_q, kEndEffectorFrame);
    const Pose xc = forward_kinematics(chain, initial_q, kCompensationFrame);
    Targets t;
    t.reach = Pose(xe.position + target_offset.translation,
                   rotation_exp(target_offset.rotation) * xe.orientation);
    t.compensation = xc;
    return t;
  }
};

struct TraceRecord {
  double t = 0.0;
  VectorXd q_h;
  VectorXd q_r;
  Vector6d e_e;
  Vector6d e_c;
  Vector12d e_hat;
  VectorXd u;

  Vector12d xi() const {
    Vector12d v;
    v << e_e, e_c;
    return v;
  }
};

struct TraceMetadata {
  std::string scenario;
  std::string termination = "horizon";  // "equilibrium", "stopped"
  long steps = 0;
  /// Largest DARE residual (inf-norm) over all gain computations.
  double max_dare_residual = 0.0;
  int max_dare_iterations = 0;
  /// Steps at which the human law used the pseudo-inverse fallback.
  long pseudo_inverse_steps = 0;
  /// Largest real part of eig(A) of the plant over visited configurations
  /// (only filled when monitoring is enabled).
  double max_real_eig_A = -std::numeric_limits<double>::infinity();
};

struct SimulationTrace {
  std::vector<TraceRecord> records;  // empty unless records were kept
  TraceMetadata meta;
  /// Final record, kept even when `records` is not.
  TraceRecord last;

  const TraceRecord& back() const { return last; }
};

struct TrialOptions {
  /// Track max Re(eig(A)) of the plant at every visited configuration.
  bool monitor_eigenvalues = false;
  /// Store the per-step records in the returned trace.
  bool keep_records = true;
  /// Called with every record; returning false stops the trial
  /// (termination "stopped").
  std::function<bool(const TraceRecord&)> on_record;
};

/// Stop once ||xi||_inf stays below this for kEquilibriumSteps steps.
inline constexpr double kEquilibriumTolerance = 1e-4;
inline constexpr int kEquilibriumSteps = 50;

namespace detail {

inline double max_real_eigenvalue(const Matrix12d& A) {
  Eigen::EigenSolver<Matrix12d> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

inline std::size_t step_count(double horizon, double dt) {
  return static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
}

}  // namespace detail

/// Executes the loop
///   Jacobians at q(t) -> human velocity -> observer step -> LQR gain -> u
///   -> integrate,
/// with u forced to zero when the controller is disabled.
inline SimulationTrace run_trial(const Scenario& s, const TrialOptions& opt = {}) {
  s.validate();
  const KinematicChain& chain = s.chain;
  const HumanModel model_hat = s.estimated_human();
  const Targets targets = s.targets();
  const int n_u = chain.input_dim();

  SimulationTrace trace;
  trace.meta.scenario = s.name;
  const std::size_t n_steps = detail::step_count(s.horizon, s.dt);
  if (opt.keep_records) trace.records.reserve(n_steps + 1);

  VectorXd q = s.initial_q;
  Vector12d xi = compute_errors(chain, q, targets);

  ObserverState obs;
  if (s.initial_estimate_std > 0.0) {
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> noise(0.0, s.initial_estimate_std);
    for (int i = 0; i < 12; ++i) obs.e_hat[i] = noise(rng);
  }

  // Frozen linearization for the linear plant.
  JacobianBundle bundle;
  LinearizedSystem plant_sys, model_sys;
  try {
    bundle = make_bundle(chain, q, s.mode);
    plant_sys = assemble_system(s.human, bundle);
    model_sys = assemble_system(model_hat, bundle);
  } catch (const Error& e) {
    throw SimulationError(e.what(), 0, 0.0);
  }
  MatrixXd K = MatrixXd::Zero(n_u, 12);
  auto update_gain = [&]() {
    if (!s.controller_enabled) return;
    const DareSolution sol = lqr_solve(model_sys, s.regulator, s.dt, /*validated=*/true);
    K = sol.K;
    trace.meta.max_dare_residual = std::max(trace.meta.max_dare_residual, sol.residual);
    trace.meta.max_dare_iterations = std::max(trace.meta.max_dare_iterations, sol.iterations);
  };

  // A stationary covariance is held fixed, giving a constant observer gain.
  Eigen::Matrix<double, 12, 6> L_fixed = Eigen::Matrix<double, 12, 6>::Zero();
  if (s.steady_state_covariance) {
    try {
      obs.P = steady_state_covariance(model_sys.A, model_sys.C, s.regulator.R_cov,
                                      s.regulator.Q_cov);
      L_fixed = observer_gain(obs.P, model_sys.C, s.regulator.R_cov);
    } catch (const Error& e) {
      throw SimulationError(e.what(), 0, 0.0);
    }
  } else {
    obs.P = s.P0;
  }

  int quiet_steps = 0;
  TraceRecord rec;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * s.dt;
    try {
      if (s.plant == PlantModel::nonlinear && k > 0) {
        bundle = make_bundle(chain, q, s.mode);
        model_sys = assemble_system(model_hat, bundle);
      }
      if (opt.monitor_eigenvalues && (s.plant == PlantModel::nonlinear || k == 0)) {
        if (s.plant == PlantModel::nonlinear && k > 0) plant_sys = assemble_system(s.human, bundle);
        trace.meta.max_real_eig_A =
            std::max(trace.meta.max_real_eig_A, detail::max_real_eigenvalue(plant_sys.A));
      }
      if (s.plant == PlantModel::nonlinear || k == 0) update_gain();

      const VectorXd u = s.controller_enabled ? control_input(K, obs.e_hat, s.regulator.rate_limit)
                                              : VectorXd::Zero(n_u);

      rec.t = t;
      rec.q_h = chain.gather(q, Owner::human);
      rec.q_r = chain.gather(q, Owner::robot);
      rec.e_e = xi.head<6>();
      rec.e_c = xi.tail<6>();
      rec.e_hat = obs.e_hat;
      rec.u = u;
      ++trace.meta.steps;
      const bool go_on = !opt.on_record || opt.on_record(rec);
      if (opt.keep_records) trace.records.push_back(rec);
      trace.last = rec;
      if (!go_on) {
        trace.meta.termination = "stopped";
        break;
      }

      if (k == n_steps) break;
      if (s.early_termination) {
        quiet_steps = xi.cwiseAbs().maxCoeff() < kEquilibriumTolerance ? quiet_steps + 1 : 0;
        if (quiet_steps >= kEquilibriumSteps) {
          trace.meta.termination = "equilibrium";
          break;
        }
      }

      const Vector6d y = xi.tail<6>();
      if (s.steady_state_covariance) {
        obs.e_hat = estimate_step(obs.e_hat, model_sys, u, y, L_fixed, s.dt);
      } else {
        obs = observer_step(obs, model_sys, u, y, s.regulator, s.dt);
      }

      if (s.plant == PlantModel::nonlinear) {
        bool pinv = false;
        const MatrixXd G = human_velocity_operator(s.human, stack_human_jacobian(bundle), &pinv);
        if (pinv) ++trace.meta.pseudo_inverse_steps;
        StepOutcome step = advance(chain, q, targets, G * xi, u, s.dt);
        q = std::move(step.q_next);
        xi = step.xi_next;
      } else {
        xi = xi + s.dt * (plant_sys.A * xi + plant_sys.B * u);
      }
      if (!xi.allFinite()) throw Error("error state became non-finite");
    } catch (const SimulationError&) {
      throw;
    } catch (const Error& e) {
      throw SimulationError(e.what(), static_cast<long>(k), t);
    }
  }
  return trace;
}

/// Pilot-avatar trial: disconnected internal model on a unicycle-based
/// robot.
inline SimulationTrace run_avatar_trial(const Scenario& s, const TrialOptions& opt = {}) {
  if (s.mode != InternalModel::disconnected_avatar)
    throw ConfigError("avatar trial requires mode 'disconnected-avatar'");
  if (s.chain.base_mode() != BaseMode::unicycle)
    throw ConfigError("avatar trial requires a unicycle base");
  return run_trial(s, opt);
}

/// Log-spaced grid including both endpoints.
inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ConfigError("invalid log grid");
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) g[i] = std::pow(10.0, a + (b - a) * i / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

/// Finite-horizon stability label: stable iff ||xi||_inf never reaches 10x
/// its initial value and the final ||xi|| is below 1e-3 of the initial one.
class StabilityClassifier {
 public:
  static constexpr double kBlowUpFactor = 10.0;
  static constexpr double kSettleFactor = 1e-3;

  explicit StabilityClassifier(const Vector12d& xi0)
      : peak_limit_(kBlowUpFactor * xi0.cwiseAbs().maxCoeff()), initial_norm_(xi0.norm()) {}

  /// Feeds one sample; returns false once the label is settled as unstable.
  bool observe(const Vector12d& xi) {
    if (!(xi.cwiseAbs().maxCoeff() < peak_limit_)) blown_up_ = true;
    last_norm_ = xi.norm();
    return !blown_up_;
  }

  /// Label given the last sample fed was the final state.
  bool stable() const { return !blown_up_ && last_norm_ < kSettleFactor * initial_norm_; }
  bool blown_up() const { return blown_up_; }

 private:
  double peak_limit_;
  double initial_norm_;
  double last_norm_ = std::numeric_limits<double>::infinity();
  bool blown_up_ = false;
};

/// Classifies a stored trace, looking at every `stride`-th record plus the
/// last one.
inline bool classify_stable(const SimulationTrace& trace, std::size_t stride = 1) {
  const auto& r = trace.records;
  if (r.empty()) return false;
  StabilityClassifier c(r.front().xi());
  for (std::size_t k = 0; k < r.size(); k += std::max<std::size_t>(stride, 1)) c.observe(r[k].xi());
  c.observe(r.back().xi());
  return c.stable();
}

}  // namespace compensctrl
