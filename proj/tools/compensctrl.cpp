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

// compensctrl: run trials, stability sweeps and the invariant checks.
//
// Exit codes: 0 success, 1 failed check, 2 configuration error,
// 3 simulation error, 4 I/O error.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "compensctrl/compensctrl.hpp"

namespace fs = std::filesystem;
using namespace compensctrl;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitIo = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level() {
  const char* env = std::getenv("COMPENSCTRL_LOG");
  if (!env) return LogLevel::warn;
  const std::string v = env;
  if (v == "quiet" || v == "0") return LogLevel::quiet;
  if (v == "info" || v == "2") return LogLevel::info;
  if (v == "debug" || v == "3") return LogLevel::debug;
  return LogLevel::warn;
}

void log(LogLevel level, const std::string& msg) {
  static const LogLevel threshold = log_level();
  static std::mutex m;
  if (level > threshold) return;
  std::lock_guard<std::mutex> lock(m);
  std::cerr << msg << '\n';
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

struct CommonFlags {
  std::string out = "out";
  std::optional<double> dt, horizon, w, ratio_e, ratio_c;
  std::optional<std::string> controller;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  ScenarioOverrides overrides() const {
    ScenarioOverrides o;
    o.dt = dt;
    o.horizon = horizon;
    o.w = w;
    o.ratio_e = ratio_e;
    o.ratio_c = ratio_c;
    o.seed = seed;
    if (controller) o.controller = *controller == "on";
    return o;
  }
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_controller) {
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--dt", f.dt, "Integration step [s]")->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", f.horizon, "Trial length [s]")->check(CLI::PositiveNumber);
  if (with_controller)
    cmd->add_option("--controller", f.controller, "Robot controller")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--w", f.w, "Human reaching weight in [0, 1]")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--ratio-e", f.ratio_e, "Lambda_hat_e / Lambda_e")->check(CLI::PositiveNumber);
  cmd->add_option("--ratio-c", f.ratio_c, "Lambda_hat_c / Lambda_c")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed of the initial-estimate perturbation");
  cmd->add_option("--jobs", f.jobs, "Parallel workers")->check(CLI::PositiveNumber)->capture_default_str();
}

// Loads every scenario before anything runs so that a bad file or override
// aborts early.
std::vector<LoadedScenario> load_all(const std::vector<std::string>& paths, const ScenarioOverrides& o) {
  std::vector<LoadedScenario> out;
  for (const std::string& p : paths) {
    LoadedScenario s = load_scenario(p, o);
    if (s.scenario.w_defaulted)
      log(LogLevel::warn, "warning: " + p + ": human.w not given, using default " +
                              fmt("%g", s.scenario.human.w));
    log(LogLevel::debug, p + ": config hash " + s.config_hash);
    out.push_back(std::move(s));
  }
  return out;
}

int cmd_run(const std::vector<std::string>& files, const CommonFlags& flags, std::size_t stride) {
  const std::vector<LoadedScenario> scenarios = load_all(files, flags.overrides());
  const fs::path out_dir(flags.out);
  ensure_dir(out_dir);

  struct Outcome {
    std::string summary;
    int code = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      const LoadedScenario& ls = scenarios[i];
      const std::string stem = fs::path(files[i]).stem().string();
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const SimulationTrace trace = ls.scenario.mode == InternalModel::disconnected_avatar
                                          ? run_avatar_trial(ls.scenario)
                                          : run_trial(ls.scenario);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream csv;
        write_trace_csv(csv, ls.scenario.chain, trace, stride);
        write_file(out_dir / (stem + ".csv"), csv.str());
        write_file(out_dir / (stem + ".meta.json"), trace_metadata(ls, trace).dump(2) + "\n");
        const TraceSummary s = summarize(trace);
        outcomes[i].summary = ls.scenario.name + ": final |e_e| " + fmt("%.3e", s.final_e_e) +
                              "  |e_c| " + fmt("%.3e", s.final_e_c) + "  |xi - e_hat| " +
                              fmt("%.3e", s.final_estimate_error) + "  steps " +
                              std::to_string(trace.meta.steps) + " (" + trace.meta.termination +
                              ")  wall " + fmt("%.2f", wall) + " s";
      } catch (const IoError& e) {
        outcomes[i] = {"", kExitIo, e.what()};
      } catch (const ConfigError& e) {
        outcomes[i] = {"", kExitConfig, e.what()};
      } catch (const Error& e) {
        outcomes[i] = {"", kExitSimulation, e.what()};
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::max(1, std::min<int>(flags.jobs, static_cast<int>(scenarios.size())));
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].code) {
      std::cerr << "error: " << files[i] << ": " << outcomes[i].error << '\n';
      if (!code) code = outcomes[i].code;
    } else {
      std::cout << outcomes[i].summary << '\n';
    }
  }
  return code;
}

std::pair<int, int> parse_grid(const std::string& g) {
  const auto x = g.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(g);
    std::size_t pos = 0;
    const int r = std::stoi(g.substr(0, x), &pos);
    const int c = std::stoi(g.substr(x + 1));
    if (r < 1 || c < 1) throw std::invalid_argument(g);
    return {r, c};
  } catch (const std::exception&) {
    throw ConfigError("--grid must look like RxC with positive R and C, got '" + g + "'");
  }
}

int cmd_sweep(const std::string& file, const CommonFlags& flags, const std::string& grid,
              double lo, double hi) {
  const auto [rows, cols] = parse_grid(grid);
  const LoadedScenario base = load_all({file}, flags.overrides()).front();
  const fs::path out_dir(flags.out);
  ensure_dir(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult result =
      stability_sweep(base.scenario, log_grid(lo, hi, rows), log_grid(lo, hi, cols), flags.jobs);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream csv;
  write_sweep_csv(csv, result);
  write_file(out_dir / "sweep.csv", csv.str());
  write_file(out_dir / "sweep.meta.json", sweep_metadata(base, result).dump(2) + "\n");

  std::size_t stable = 0, agree = 0;
  for (const SweepCell& c : result.cells) {
    stable += c.stable;
    agree += c.stable == c.oracle_stable();
  }
  std::cout << base.scenario.name << ": " << stable << "/" << result.cells.size()
            << " cells stable, eigenvalue oracle agrees on " << agree << "/" << result.cells.size()
            << ", wall " << fmt("%.2f", wall) << " s\n";
  if (agree != result.cells.size())
    log(LogLevel::warn, "warning: trial labels and eigenvalue oracle disagree on " +
                            std::to_string(result.cells.size() - agree) + " cells");
  return 0;
}

int cmd_check(std::vector<std::string> chains, int samples, std::uint64_t seed) {
  if (chains.empty()) {
    const fs::path dir = fs::path(COMPENSCTRL_DATA_DIR) / "chains";
    std::vector<std::string> found;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
      if (e.path().extension() == ".json") found.push_back(e.path().string());
    std::sort(found.begin(), found.end());
    chains = found;
  }
  CheckOptions opt;
  opt.chain_files = chains;
  opt.samples = samples;
  opt.seed = seed;
  bool ok = true;
  for (const CheckResult& r : run_checks(opt)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot control from compensatory human motion: trials, sweeps and checks"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::vector<std::string> run_files;
  std::size_t stride = 1;
  CLI::App* run = app.add_subcommand("run", "Simulate scenarios and write traces");
  run->add_option("scenarios", run_files, "Scenario JSON files")->required();
  add_common(run, run_flags, true);
  run->add_option("--stride", stride, "Write every N-th trace row")->check(CLI::PositiveNumber);

  CommonFlags sweep_flags;
  std::string sweep_file, grid = "9x9";
  double lo = 1e-2, hi = 1e2;
  CLI::App* sweep = app.add_subcommand("sweep", "Stability over mis-estimated human gains");
  sweep->add_option("scenario", sweep_file, "Base scenario JSON")->required();
  add_common(sweep, sweep_flags, false);
  sweep->add_option("--grid", grid, "Grid size RxC (ratio_e x ratio_c)")->capture_default_str();
  sweep->add_option("--min", lo, "Smallest ratio")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--max", hi, "Largest ratio")->check(CLI::PositiveNumber)->capture_default_str();

  std::vector<std::string> check_chains;
  int samples = 100;
  std::uint64_t check_seed = 1;
  CLI::App* check = app.add_subcommand("check", "Run the numerical invariant suite");
  check->add_option("--chain", check_chains, "Chain file to validate (repeatable)");
  check->add_option("--samples", samples, "Random instances per check")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_files, run_flags, stride);
    if (*sweep) return cmd_sweep(sweep_file, sweep_flags, grid, lo, hi);
    if (*check) return cmd_check(check_chains, samples, check_seed);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSimulation;
  }
  return 0;
}
