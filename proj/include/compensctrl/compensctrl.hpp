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

#include "compensctrl/errors.hpp"
#include "compensctrl/se3.hpp"
#include "compensctrl/kinematics.hpp"
#include "compensctrl/chain_io.hpp"
#include "compensctrl/human_model.hpp"
#include "compensctrl/error_dynamics.hpp"
#include "compensctrl/riccati.hpp"
#include "compensctrl/estimator_regulator.hpp"
#include "compensctrl/scenario.hpp"
#include "compensctrl/sweep.hpp"
#include "compensctrl/scenario_io.hpp"
#include "compensctrl/checks.hpp"
