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

// Scenario files, trace CSV and metadata sidecars.
//
// Scenario JSON (paths relative to the scenario file):
//
//   {
//     "name": "reach",
//     "chain": "../chains/prosthesis7.json",
//     "mode": "connected" | "disconnected-avatar",
//     "plant": "nonlinear" | "linearized",
//     "human": {"lambda_e": 1, "lambda_c": 0.1, "w": 0.8,
//               "on_singular": "pseudo-inverse" | "error"},
//     "estimate": {"lambda_ratio_e": 1, "lambda_ratio_c": 1,
//                  "initial_std": 0, "seed": 0},
//     "regulator": {"Q": [..12], "R": 1, "S": 0, "Q_cov": 1, "R_cov": 0.01,
//                   "P0": [..12] | "steady-state", "rate_limit": [..]},
//     "initial_q": [..],
//     "target": {"translation": [x, y, z], "rotation": [rx, ry, rz]},
//     "horizon": 30, "dt": 0.001, "controller": true,
//     "early_termination": true
//   }
//
// A matrix entry is a scalar (s * I), a list of n (diagonal), a flat list
// of n*n (row-major) or a list of rows.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "compensctrl/chain_io.hpp"
#include "compensctrl/scenario.hpp"
#include "compensctrl/sweep.hpp"

namespace compensctrl {

using nlohmann::json;

/// Command-line style overrides, applied to the document before parsing.
struct ScenarioOverrides {
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<bool> controller;
  std::optional<double> w;
  std::optional<double> ratio_e;
  std::optional<double> ratio_c;
  std::optional<std::uint64_t> seed;
};

struct LoadedScenario {
  Scenario scenario;
  /// Fully defaulted configuration including the chain definition.
  json resolved;
  std::string config_hash;
};

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double json_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

inline bool json_bool(const json& j, const std::string& what) {
  if (!j.is_boolean()) throw ConfigError(what + " must be true or false");
  return j.get<bool>();
}

inline std::string json_string(const json& j, const std::string& what) {
  if (!j.is_string()) throw ConfigError(what + " must be a string");
  return j.get<std::string>();
}

inline VectorXd json_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = json_number(j[i], what + "[" + std::to_string(i) + "]");
  return v;
}

inline MatrixXd json_matrix(const json& j, int rows, int cols, const std::string& what) {
  if (j.is_number()) {
    if (rows != cols) throw ConfigError(what + ": a scalar needs a square matrix");
    return j.get<double>() * MatrixXd::Identity(rows, cols);
  }
  if (!j.is_array()) throw ConfigError(what + " must be a number or an array");
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != rows)
      throw DimensionError(what + " must have " + std::to_string(rows) + " rows");
    MatrixXd M(rows, cols);
    for (int r = 0; r < rows; ++r) {
      const VectorXd row = json_vector(j[r], what);
      if (row.size() != cols)
        throw DimensionError(what + " rows must have " + std::to_string(cols) + " entries");
      M.row(r) = row.transpose();
    }
    return M;
  }
  const VectorXd flat = json_vector(j, what);
  if (rows == cols && flat.size() == rows) return flat.asDiagonal();
  if (flat.size() == static_cast<Eigen::Index>(rows) * cols) {
    MatrixXd M(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) M(r, c) = flat[r * cols + c];
    return M;
  }
  throw DimensionError(what + " has " + std::to_string(flat.size()) + " entries, expected " +
                       (rows == cols ? std::to_string(rows) + " or " : std::string()) +
                       std::to_string(rows * cols));
}

inline json matrix_json(const MatrixXd& M) {
  json rows = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json vector_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " '" + path + "': " + e.what());
  }
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

/// 64-bit FNV-1a of the compact JSON text, as 16 hex digits.
inline std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void apply_overrides(json& doc, const ScenarioOverrides& o) {
  if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
  if (o.dt) doc["dt"] = *o.dt;
  if (o.horizon) doc["horizon"] = *o.horizon;
  if (o.controller) doc["controller"] = *o.controller;
  if (o.w) doc["human"]["w"] = *o.w;
  if (o.ratio_e) doc["estimate"]["lambda_ratio_e"] = *o.ratio_e;
  if (o.ratio_c) doc["estimate"]["lambda_ratio_c"] = *o.ratio_c;
  if (o.seed) doc["estimate"]["seed"] = *o.seed;
}

/// The resolved configuration of `s`, embedding the chain definition.
inline json scenario_to_json(const Scenario& s, const std::string& chain_path,
                             const json& chain_doc) {
  using detail::matrix_json;
  using detail::vector_json;
  json j;
  j["name"] = s.name;
  j["chain"] = chain_path;
  j["chain_definition"] = chain_doc;
  j["mode"] = s.mode == InternalModel::connected ? "connected" : "disconnected-avatar";
  j["plant"] = s.plant == PlantModel::nonlinear ? "nonlinear" : "linearized";
  j["human"] = {{"lambda_e", matrix_json(s.human.lambda_e)},
                {"lambda_c", matrix_json(s.human.lambda_c)},
                {"w", s.human.w},
                {"on_singular", s.human.on_singular == SingularPolicy::error ? "error"
                                                                             : "pseudo-inverse"}};
  j["estimate"] = {{"lambda_ratio_e", s.lambda_ratio_e},
                   {"lambda_ratio_c", s.lambda_ratio_c},
                   {"initial_std", s.initial_estimate_std},
                   {"seed", s.seed}};
  const int n_u = s.chain.input_dim();
  json reg = {{"Q", matrix_json(s.regulator.Q)},
              {"R", matrix_json(s.regulator.R)},
              {"S", matrix_json(s.regulator.mixed_cost(n_u))},
              {"Q_cov", matrix_json(s.regulator.Q_cov)},
              {"R_cov", matrix_json(s.regulator.R_cov)}};
  reg["P0"] = s.steady_state_covariance ? json("steady-state") : matrix_json(s.P0);
  if (s.regulator.rate_limit.size()) reg["rate_limit"] = vector_json(s.regulator.rate_limit);
  j["regulator"] = reg;
  j["initial_q"] = vector_json(s.initial_q);
  j["target"] = {{"translation", vector_json(s.target_offset.translation)},
                 {"rotation", vector_json(s.target_offset.rotation)}};
  j["horizon"] = s.horizon;
  j["dt"] = s.dt;
  j["controller"] = s.controller_enabled;
  j["early_termination"] = s.early_termination;
  return j;
}

/// Parses a scenario document. `base_dir` anchors a relative chain path.
inline LoadedScenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir) {
  using namespace detail;
  check_keys(doc,
             {"name", "description", "chain", "mode", "plant", "human", "estimate", "regulator",
              "initial_q", "target", "horizon", "dt", "controller", "early_termination"},
             "scenario");
  for (const char* key : {"chain", "initial_q", "target"}) {
    if (!doc.contains(key)) throw ConfigError(std::string("scenario: missing required key '") + key + "'");
  }
  try {
    Scenario s;
    s.name = doc.contains("name") ? json_string(doc["name"], "name") : "scenario";

    const std::string chain_path = json_string(doc["chain"], "chain");
    std::filesystem::path cp(chain_path);
    if (cp.is_relative()) cp = base_dir / cp;
    const json chain_doc = read_json_file(cp.string(), "chain file");
    s.chain = chain_from_json(chain_doc);

    if (doc.contains("mode")) {
      const std::string m = json_string(doc["mode"], "mode");
      if (m == "connected") {
        s.mode = InternalModel::connected;
      } else if (m == "disconnected-avatar" || m == "disconnected_avatar") {
        s.mode = InternalModel::disconnected_avatar;
      } else {
        throw ConfigError("mode must be 'connected' or 'disconnected-avatar'");
      }
    }
    if (doc.contains("plant")) {
      const std::string p = json_string(doc["plant"], "plant");
      if (p == "nonlinear") {
        s.plant = PlantModel::nonlinear;
      } else if (p == "linearized") {
        s.plant = PlantModel::linearized;
      } else {
        throw ConfigError("plant must be 'nonlinear' or 'linearized'");
      }
    }

    s.human.internal_model = s.mode;
    s.w_defaulted = true;
    if (doc.contains("human")) {
      const json& h = doc["human"];
      check_keys(h, {"lambda_e", "lambda_c", "w", "on_singular"}, "human");
      if (h.contains("lambda_e")) s.human.lambda_e = json_matrix(h["lambda_e"], 6, 6, "human.lambda_e");
      if (h.contains("lambda_c")) s.human.lambda_c = json_matrix(h["lambda_c"], 6, 6, "human.lambda_c");
      if (h.contains("w")) {
        s.human.w = json_number(h["w"], "human.w");
        s.w_defaulted = false;
      }
      if (h.contains("on_singular")) {
        const std::string p = json_string(h["on_singular"], "human.on_singular");
        if (p == "error") {
          s.human.on_singular = SingularPolicy::error;
        } else if (p == "pseudo-inverse" || p == "pseudo_inverse") {
          s.human.on_singular = SingularPolicy::pseudo_inverse;
        } else {
          throw ConfigError("human.on_singular must be 'pseudo-inverse' or 'error'");
        }
      }
    }

    if (doc.contains("estimate")) {
      const json& e = doc["estimate"];
      check_keys(e, {"lambda_ratio_e", "lambda_ratio_c", "initial_std", "seed"}, "estimate");
      if (e.contains("lambda_ratio_e")) s.lambda_ratio_e = json_number(e["lambda_ratio_e"], "estimate.lambda_ratio_e");
      if (e.contains("lambda_ratio_c")) s.lambda_ratio_c = json_number(e["lambda_ratio_c"], "estimate.lambda_ratio_c");
      if (e.contains("initial_std")) s.initial_estimate_std = json_number(e["initial_std"], "estimate.initial_std");
      if (e.contains("seed")) {
        if (!e["seed"].is_number_integer() || e["seed"].get<long long>() < 0)
          throw ConfigError("estimate.seed must be a non-negative integer");
        s.seed = e["seed"].get<std::uint64_t>();
      }
    }

    const int n_u = s.chain.input_dim();
    Vector12d q_diag;
    q_diag << Vector6d::Zero(), 10.0, 10.0, 10.0, 0.1, 0.1, 0.1;
    s.regulator.Q = q_diag.asDiagonal();
    s.regulator.R = MatrixXd::Identity(n_u, n_u);
    if (doc.contains("regulator")) {
      const json& r = doc["regulator"];
      check_keys(r, {"Q", "R", "S", "Q_cov", "R_cov", "P0", "rate_limit"}, "regulator");
      if (r.contains("Q")) s.regulator.Q = json_matrix(r["Q"], 12, 12, "regulator.Q");
      if (r.contains("R")) s.regulator.R = json_matrix(r["R"], n_u, n_u, "regulator.R");
      if (r.contains("S")) {
        s.regulator.S = r["S"].is_number() && r["S"].get<double>() == 0.0
                            ? MatrixXd()
                            : json_matrix(r["S"], 12, n_u, "regulator.S");
      }
      if (r.contains("Q_cov")) s.regulator.Q_cov = json_matrix(r["Q_cov"], 12, 12, "regulator.Q_cov");
      if (r.contains("R_cov")) s.regulator.R_cov = json_matrix(r["R_cov"], 6, 6, "regulator.R_cov");
      if (r.contains("P0")) {
        if (r["P0"].is_string()) {
          if (r["P0"].get<std::string>() != "steady-state")
            throw ConfigError("regulator.P0 must be a matrix or 'steady-state'");
          s.steady_state_covariance = true;
        } else {
          s.P0 = json_matrix(r["P0"], 12, 12, "regulator.P0");
        }
      }
      if (r.contains("rate_limit")) s.regulator.rate_limit = json_vector(r["rate_limit"], "regulator.rate_limit");
    }

    s.initial_q = json_vector(doc["initial_q"], "initial_q");
    const json& t = doc["target"];
    check_keys(t, {"translation", "rotation"}, "target");
    if (t.contains("translation")) s.target_offset.translation = json_vec3(t["translation"], "target.translation");
    if (t.contains("rotation")) s.target_offset.rotation = json_vec3(t["rotation"], "target.rotation");

    s.horizon = s.mode == InternalModel::connected ? 15.0 : 30.0;
    if (doc.contains("horizon")) s.horizon = json_number(doc["horizon"], "horizon");
    if (doc.contains("dt")) s.dt = json_number(doc["dt"], "dt");
    if (doc.contains("controller")) s.controller_enabled = json_bool(doc["controller"], "controller");
    if (doc.contains("early_termination"))
      s.early_termination = json_bool(doc["early_termination"], "early_termination");

    s.validate();

    LoadedScenario out;
    out.resolved = scenario_to_json(s, chain_path, chain_doc);
    out.config_hash = config_hash(out.resolved);
    out.scenario = std::move(s);
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

inline LoadedScenario load_scenario(const std::string& path, const ScenarioOverrides& overrides = {}) {
  json doc = detail::read_json_file(path, "scenario file");
  apply_overrides(doc, overrides);
  return scenario_from_json(doc, std::filesystem::path(path).parent_path());
}

/// CSV header for a chain: t, qh_*, qr_*, ee_*, ec_*, ehat_0..11, u_*.
inline std::string trace_csv_header(const KinematicChain& chain) {
  std::string h = "t";
  for (int i = 0; i < chain.human_count(); ++i) h += ",qh_" + std::to_string(i);
  for (int i = 0; i < chain.robot_count(); ++i) h += ",qr_" + std::to_string(i);
  for (const char* block : {"ee", "ec"}) {
    for (const char* c : {"tx", "ty", "tz", "rx", "ry", "rz"}) h += std::string(",") + block + "_" + c;
  }
  for (int i = 0; i < 12; ++i) h += ",ehat_" + std::to_string(i);
  for (int i = 0; i < chain.input_dim(); ++i) h += ",u_" + std::to_string(i);
  return h;
}

inline void write_trace_row(std::ostream& out, const TraceRecord& r) {
  out << detail::format_double(r.t);
  auto put = [&](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << detail::format_double(v[i]);
  };
  put(r.q_h);
  put(r.q_r);
  put(r.e_e);
  put(r.e_c);
  put(r.e_hat);
  put(r.u);
  out << '\n';
}

/// Writes every `stride`-th record and always the last one.
inline void write_trace_csv(std::ostream& out, const KinematicChain& chain,
                            const SimulationTrace& trace, std::size_t stride = 1) {
  stride = std::max<std::size_t>(stride, 1);
  out << trace_csv_header(chain) << '\n';
  const auto& r = trace.records;
  for (std::size_t k = 0; k < r.size(); k += stride) write_trace_row(out, r[k]);
  if (!r.empty() && (r.size() - 1) % stride != 0) write_trace_row(out, r.back());
}

/// Summary statistics of a trace.
struct TraceSummary {
  double final_e_e = 0.0, final_e_c = 0.0, final_estimate_error = 0.0;
  double peak_e_e = 0.0, peak_e_c = 0.0;
};

inline TraceSummary summarize(const SimulationTrace& trace) {
  TraceSummary s;
  const TraceRecord& last = trace.back();
  s.final_e_e = last.e_e.norm();
  s.final_e_c = last.e_c.norm();
  s.final_estimate_error = (last.xi() - last.e_hat).norm();
  for (const auto& r : trace.records) {
    s.peak_e_e = std::max(s.peak_e_e, r.e_e.norm());
    s.peak_e_c = std::max(s.peak_e_c, r.e_c.norm());
  }
  return s;
}

inline json trace_metadata(const LoadedScenario& loaded, const SimulationTrace& trace) {
  const TraceSummary sum = summarize(trace);
  json j;
  j["scenario"] = loaded.scenario.name;
  j["config_hash"] = loaded.config_hash;
  j["w"] = loaded.scenario.human.w;
  j["w_defaulted"] = loaded.scenario.w_defaulted;
  j["termination"] = trace.meta.termination;
  j["steps"] = trace.meta.steps;
  j["max_dare_residual"] = trace.meta.max_dare_residual;
  j["max_dare_iterations"] = trace.meta.max_dare_iterations;
  j["pseudo_inverse_steps"] = trace.meta.pseudo_inverse_steps;
  j["final"] = {{"e_e_norm", sum.final_e_e},
                {"e_c_norm", sum.final_e_c},
                {"estimate_error_norm", sum.final_estimate_error}};
  j["peak"] = {{"e_e_norm", sum.peak_e_e}, {"e_c_norm", sum.peak_e_c}};
  j["config"] = loaded.resolved;
  return j;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "ratio_e,ratio_c,stable\n";
  for (const SweepCell& c : result.cells) {
    out << detail::format_double(c.ratio_e) << ',' << detail::format_double(c.ratio_c) << ','
        << (c.stable ? "stable" : "unstable") << '\n';
  }
}

inline json sweep_metadata(const LoadedScenario& base, const SweepResult& result) {
  json cells = json::array();
  std::size_t agree = 0;
  for (const SweepCell& c : result.cells) {
    cells.push_back({{"ratio_e", c.ratio_e},
                     {"ratio_c", c.ratio_c},
                     {"stable", c.stable},
                     {"spectral_radius", c.spectral_radius},
                     {"oracle_stable", c.oracle_stable()},
                     {"steps", c.steps}});
    if (c.stable == c.oracle_stable()) ++agree;
  }
  json j;
  j["scenario"] = base.scenario.name;
  j["config_hash"] = base.config_hash;
  j["cells"] = cells;
  j["oracle_agreement"] = {{"agree", agree}, {"total", result.cells.size()}};
  j["config"] = base.resolved;
  return j;
}

}  // namespace compensctrl
