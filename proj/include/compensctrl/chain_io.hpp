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

// JSON chain description:
//
//   {
//     "base_mode": "fixed" | "unicycle",
//     "joints": [ {"kind": "revolute", "axis": [0,0,1], "origin_xyz": [..],
//                  "origin_rpy": [..], "owner": "human", "parent": 2}, ... ],
//     "frames": { "end_effector": {"joint": 12, "xyz": [..], "rpy": [..]},
//                 "compensation": {...}, ... }
//   }
//
// "parent" defaults to the previous joint. Angles in radians, lengths in
// meters. Axes are taken as written; a non-unit axis is rejected.

#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "compensctrl/kinematics.hpp"

namespace compensctrl {

namespace detail {

inline Vector3d json_vec3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + " must be an array of 3 numbers");
  Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must be an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline Vector3d json_vec3_or_zero(const nlohmann::json& obj, const char* key,
                                  const std::string& what) {
  return obj.contains(key) ? json_vec3(obj.at(key), what + "." + key) : Vector3d::Zero();
}

inline JointKind parse_joint_kind(const std::string& s) {
  if (s == "revolute" || s == "revolute-axis") return JointKind::revolute;
  if (s == "prismatic" || s == "prismatic-axis") return JointKind::prismatic;
  if (s == "planar_translation" || s == "planar-base-translation")
    return JointKind::planar_translation;
  if (s == "planar_rotation" || s == "planar-base-rotation") return JointKind::planar_rotation;
  throw ConfigError("unknown joint kind '" + s + "'");
}

inline const char* joint_kind_name(JointKind k) {
  switch (k) {
    case JointKind::revolute: return "revolute";
    case JointKind::prismatic: return "prismatic";
    case JointKind::planar_translation: return "planar_translation";
    case JointKind::planar_rotation: return "planar_rotation";
  }
  return "?";
}

}  // namespace detail

inline KinematicChain chain_from_json(const nlohmann::json& doc) {
  using detail::json_vec3;
  using detail::json_vec3_or_zero;
  if (!doc.is_object()) throw ConfigError("chain must be a JSON object");
  if (!doc.contains("joints") || !doc["joints"].is_array())
    throw ConfigError("chain: missing 'joints' array");
  if (!doc.contains("frames") || !doc["frames"].is_object())
    throw ConfigError("chain: missing 'frames' object");

  BaseMode base = BaseMode::fixed;
  if (doc.contains("base_mode")) {
    const std::string m = doc["base_mode"].get<std::string>();
    if (m == "unicycle") {
      base = BaseMode::unicycle;
    } else if (m != "fixed") {
      throw ConfigError("chain: unknown base_mode '" + m + "'");
    }
  }

  std::vector<Joint> joints;
  for (std::size_t i = 0; i < doc["joints"].size(); ++i) {
    const auto& jj = doc["joints"][i];
    const std::string where = "joints[" + std::to_string(i) + "]";
    if (!jj.is_object() || !jj.contains("kind") || !jj.contains("axis") || !jj.contains("owner"))
      throw ConfigError(where + ": 'kind', 'axis' and 'owner' are required");
    Joint j;
    j.kind = detail::parse_joint_kind(jj["kind"].get<std::string>());
    j.axis = json_vec3(jj["axis"], where + ".axis");
    j.origin = Pose::from_xyz_rpy(json_vec3_or_zero(jj, "origin_xyz", where),
                                  json_vec3_or_zero(jj, "origin_rpy", where));
    const std::string owner = jj["owner"].get<std::string>();
    if (owner == "human") {
      j.owner = Owner::human;
    } else if (owner == "robot") {
      j.owner = Owner::robot;
    } else {
      throw ConfigError(where + ": owner must be 'human' or 'robot'");
    }
    j.parent = jj.contains("parent") ? jj["parent"].get<int>() : static_cast<int>(i) - 1;
    joints.push_back(j);
  }

  std::map<std::string, FrameAttachment> frames;
  for (const auto& [name, ff] : doc["frames"].items()) {
    if (!ff.is_object() || !ff.contains("joint"))
      throw ConfigError("frames." + name + ": 'joint' is required");
    FrameAttachment f;
    f.joint = ff["joint"].get<int>();
    f.offset = Pose::from_xyz_rpy(json_vec3_or_zero(ff, "xyz", "frames." + name),
                                  json_vec3_or_zero(ff, "rpy", "frames." + name));
    frames.emplace(name, f);
  }
  return KinematicChain(std::move(joints), std::move(frames), base);
}

inline KinematicChain load_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open chain file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("chain file '" + path + "': " + e.what());
  }
  try {
    return chain_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("chain file '" + path + "': " + e.what());
  }
}

}  // namespace compensctrl
