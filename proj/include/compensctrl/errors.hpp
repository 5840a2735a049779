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

#pragma once

#include <stdexcept>
#include <string>

namespace compensctrl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (chain, scenario, overrides).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix sizes that do not agree with the model.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Lookup of a frame name the chain does not define.
class UnknownFrameError : public Error {
 public:
  explicit UnknownFrameError(const std::string& name)
      : Error("unknown frame '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// The human weighted normal matrix J_w is numerically singular. Usually
/// means the human joint model carries redundant joints.
class SingularJacobianError : public Error {
 public:
  SingularJacobianError(double smallest_singular_value, double largest_singular_value)
      : Error("human weighted Jacobian is singular (sigma_min=" +
              std::to_string(smallest_singular_value) +
              ", sigma_max=" + std::to_string(largest_singular_value) +
              "); remove redundant human joints"),
        sigma_min_(smallest_singular_value),
        sigma_max_(largest_singular_value) {}
  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }

 private:
  double sigma_min_;
  double sigma_max_;
};

/// Singular observation-noise covariance or input cost.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// The Riccati iteration grew without bound: a penalized mode cannot be
/// stabilized by the available inputs.
class RiccatiDivergenceError : public Error {
 public:
  using Error::Error;
};

/// Failure inside a trial, tagged with the step at which it happened.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, long step, double time)
      : Error(what + " (step " + std::to_string(step) + ", t=" + std::to_string(time) + " s)"),
        step_(step),
        time_(time) {}
  long step() const { return step_; }
  double time() const { return time_; }

 private:
  long step_;
  double time_;
};

}  // namespace compensctrl
