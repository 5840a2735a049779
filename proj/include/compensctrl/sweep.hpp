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

// Robustness of the closed loop to a mis-estimated human: the regulator and
// observer are built on Lambda_hat = ratio * Lambda while the plant keeps
// the true gains.

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "compensctrl/scenario.hpp"

namespace compensctrl {

struct SweepCell {
  double ratio_e = 1.0;
  double ratio_c = 1.0;
  /// Trial-based label.
  bool stable = false;
  /// Spectral radius of the frozen one-step closed-loop map.
  double spectral_radius = 0.0;
  long steps = 0;

  bool oracle_stable() const { return spectral_radius < 1.0; }
};

struct SweepResult {
  std::vector<double> ratios_e;
  std::vector<double> ratios_c;
  /// Row-major: ratio_e outer, ratio_c inner.
  std::vector<SweepCell> cells;

  const SweepCell& at(std::size_t i, std::size_t j) const { return cells[i * ratios_c.size() + j]; }
};

/// The scenario actually simulated for one cell: linearized plant, fixed
/// (stationary) observer gain, no rate limit, no early stop.
inline Scenario sweep_cell_scenario(const Scenario& base, double ratio_e, double ratio_c) {
  Scenario s = base;
  s.plant = PlantModel::linearized;
  s.steady_state_covariance = true;
  s.controller_enabled = true;
  s.early_termination = false;
  s.regulator.rate_limit.resize(0);
  s.lambda_ratio_e = ratio_e;
  s.lambda_ratio_c = ratio_c;
  return s;
}

/// Closed-loop eigenvalue oracle for one cell.
inline double sweep_cell_spectral_radius(const Scenario& s) {
  const JacobianBundle bundle = make_bundle(s.chain, s.initial_q, s.mode);
  const LinearizedSystem plant = assemble_system(s.human, bundle);
  const LinearizedSystem model = assemble_system(s.estimated_human(), bundle);
  const MatrixXd K = lqr_gain(model, s.regulator, s.dt);
  const Matrix12d P = steady_state_covariance(model.A, model.C, s.regulator.R_cov, s.regulator.Q_cov);
  const auto L = observer_gain(P, model.C, s.regulator.R_cov);
  return spectral_radius(closed_loop_matrix(plant, model, K, L, s.dt));
}

inline SweepCell run_sweep_cell(const Scenario& base, double ratio_e, double ratio_c) {
  const Scenario s = sweep_cell_scenario(base, ratio_e, ratio_c);
  SweepCell cell;
  cell.ratio_e = ratio_e;
  cell.ratio_c = ratio_c;

  std::optional<StabilityClassifier> classifier;
  TrialOptions opt;
  opt.keep_records = false;
  opt.on_record = [&](const TraceRecord& r) {
    if (!classifier) classifier.emplace(r.xi());
    return classifier->observe(r.xi());
  };
  try {
    const SimulationTrace trace = run_trial(s, opt);
    cell.steps = trace.meta.steps;
    cell.stable = classifier->stable();
  } catch (const SimulationError&) {
    // Overflow of a diverging cell is a data point.
    cell.stable = false;
  }
  cell.spectral_radius = sweep_cell_spectral_radius(s);
  return cell;
}

/// Runs every (ratio_e, ratio_c) cell, `jobs` at a time. The result does not
/// depend on `jobs`.
inline SweepResult stability_sweep(const Scenario& base, const std::vector<double>& ratios_e,
                                   const std::vector<double>& ratios_c, int jobs = 1) {
  base.validate();
  SweepResult result;
  result.ratios_e = ratios_e;
  result.ratios_c = ratios_c;
  const std::size_t n = ratios_e.size() * ratios_c.size();
  result.cells.resize(n);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        result.cells[k] =
            run_sweep_cell(base, ratios_e[k / ratios_c.size()], ratios_c[k % ratios_c.size()]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

}  // namespace compensctrl
