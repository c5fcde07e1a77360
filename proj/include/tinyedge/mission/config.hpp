/* Copyright 2026 The TinyEdge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Mission configuration and its flat key=value file format.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tinyedge/control/pid.hpp"
#include "tinyedge/error.hpp"
#include "tinyedge/link/link.hpp"
#include "tinyedge/mission/world.hpp"
#include "tinyedge/sim/drone.hpp"
#include "tinyedge/sim/energy.hpp"

namespace tinyedge::mission {

enum class InferenceMode : std::uint8_t { Onboard, Distributed };
enum class EndCondition : std::uint8_t { Targets, Depletion };
enum class FlightProfile : std::uint8_t { Hover, Maneuver };

inline const char* to_string(InferenceMode m) {
  return m == InferenceMode::Onboard ? "onboard" : "distributed";
}
inline const char* to_string(EndCondition e) {
  return e == EndCondition::Targets ? "targets" : "depletion";
}
inline const char* to_string(FlightProfile p) {
  return p == FlightProfile::Hover ? "hover" : "maneuver";
}

// Per-classification compute time on the onboard boards (s).
inline constexpr double kOpenMvLatency = 0.859;
inline constexpr double kArduinoNanoLatency = 7.235;

struct MissionConfig {
  sim::PayloadConfig payload = sim::PayloadConfig::OpenMV;
  InferenceMode mode = InferenceMode::Onboard;
  std::optional<double> inference_latency_s;  // onboard override
  double remote_compute_s = 0.05;
  link::LinkConfig link;
  control::PidGains pid;
  SceneSpec scene;
  std::optional<int> random_targets;  // resolved against the scene
  double dt = 0.05;
  double control_period_s = 0.1;
  std::uint64_t seed = 1;
  EndCondition end = EndCondition::Targets;
  FlightProfile profile = FlightProfile::Hover;
  double time_limit_s = 900.0;
  double framing_timeout_s = 20.0;
  double framing_tolerance_px = 5.0;
  double framing_size_tolerance = 0.15;
  sim::EnergyProfile energy = sim::energy_profile_default();
  sim::SimParams sim;
  std::string model_path;

  // Distributed runs fly the distributed kit whatever payload is named.
  sim::PayloadConfig effective_payload() const {
    return mode == InferenceMode::Distributed ? sim::PayloadConfig::DistributedKit : payload;
  }

  // Time from frame capture to decision.
  double decision_period() const {
    if (mode == InferenceMode::Distributed) {
      return remote_compute_s + 2.0 * link.one_way_latency;
    }
    if (inference_latency_s) return *inference_latency_s;
    switch (payload) {
      case sim::PayloadConfig::OpenMV: return kOpenMvLatency;
      case sim::PayloadConfig::ArduinoNano: return kArduinoNanoLatency;
      default: return 0.0;
    }
  }

  // Battery energy at launch: the budget of the state the mission mostly
  // flies in.
  double capacity_j() const {
    return energy.budget_j(effective_payload(), profile == FlightProfile::Hover
                                                    ? sim::FlightState::Hover
                                                    : sim::FlightState::Maneuver);
  }

  void finalize() {
    if (random_targets) {
      scene.targets = mission::random_targets(*random_targets, scene.world_extent, scene.seed);
      random_targets.reset();
    }
  }

  void validate() const {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(control_period_s >= dt)) throw InvalidArgument("control period must be >= dt");
    if (!(time_limit_s > 0.0)) throw InvalidArgument("time limit must be positive");
    if (!(framing_timeout_s >= 0.0)) throw InvalidArgument("framing timeout must be >= 0");
    if (inference_latency_s && !(*inference_latency_s >= 0.0)) {
      throw InvalidArgument("inference latency must be >= 0");
    }
    if (!(remote_compute_s >= 0.0)) throw InvalidArgument("remote compute must be >= 0");
    link.validate();
    scene.validate();
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == s.npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) {
    throw InvalidArgument("key '" + std::string(key) + "' needs a number, got '" +
                          std::string(v) + "'");
  }
  return out;
}

inline long long to_integer(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) {
    throw InvalidArgument("key '" + std::string(key) + "' needs an integer, got '" +
                          std::string(v) + "'");
  }
  return out;
}

inline MaskLabel parse_label(std::string_view v) {
  if (v == "mask") return MaskLabel::Mask;
  if (v == "no_mask" || v == "nomask") return MaskLabel::NoMask;
  throw InvalidArgument("unknown label '" + std::string(v) + "'");
}

// "x,y,label"
inline Target parse_target(std::string_view key, std::string_view v) {
  const auto c1 = v.find(',');
  const auto c2 = c1 == v.npos ? v.npos : v.find(',', c1 + 1);
  if (c2 == v.npos) throw InvalidArgument("key '" + std::string(key) + "' needs x,y,label");
  return {to_double(key, trim(v.substr(0, c1))), to_double(key, trim(v.substr(c1 + 1, c2 - c1 - 1))),
          parse_label(trim(v.substr(c2 + 1)))};
}

}  // namespace detail

inline void apply_config_value(MissionConfig& cfg, std::string_view key, std::string_view v) {
  using detail::to_double;
  using detail::to_integer;
  if (key.substr(0, 7) == "energy.") {
    cfg.energy.apply_override(key, to_double(key, v));
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_integer(key, v));
  } else if (key == "dt") {
    cfg.dt = to_double(key, v);
  } else if (key == "payload") {
    cfg.payload = sim::parse_payload(v);
  } else if (key == "mode" || key == "inference.mode") {
    if (v == "onboard") {
      cfg.mode = InferenceMode::Onboard;
    } else if (v == "distributed") {
      cfg.mode = InferenceMode::Distributed;
    } else {
      throw InvalidArgument("unknown inference mode '" + std::string(v) + "'");
    }
  } else if (key == "inference.latency_s") {
    cfg.inference_latency_s = to_double(key, v);
  } else if (key == "inference.remote_compute_s") {
    cfg.remote_compute_s = to_double(key, v);
  } else if (key == "control.period_s") {
    cfg.control_period_s = to_double(key, v);
  } else if (key == "pid.kp") {
    cfg.pid.kp = to_double(key, v);
  } else if (key == "pid.ki") {
    cfg.pid.ki = to_double(key, v);
  } else if (key == "pid.kd") {
    cfg.pid.kd = to_double(key, v);
  } else if (key == "link.one_way_latency_s") {
    cfg.link.one_way_latency = to_double(key, v);
  } else if (key == "link.drop_probability") {
    cfg.link.drop_probability = to_double(key, v);
  } else if (key == "link.response_timeout_s") {
    cfg.link.response_timeout = to_double(key, v);
  } else if (key == "link.retries") {
    cfg.link.retries = static_cast<int>(to_integer(key, v));
  } else if (key == "link.control_port") {
    cfg.link.control_port = static_cast<int>(to_integer(key, v));
  } else if (key == "link.state_port") {
    cfg.link.state_port = static_cast<int>(to_integer(key, v));
  } else if (key == "mission.end") {
    if (v == "targets") {
      cfg.end = EndCondition::Targets;
    } else if (v == "depletion") {
      cfg.end = EndCondition::Depletion;
    } else {
      throw InvalidArgument("unknown mission end '" + std::string(v) + "'");
    }
  } else if (key == "mission.profile") {
    if (v == "hover") {
      cfg.profile = FlightProfile::Hover;
    } else if (v == "maneuver") {
      cfg.profile = FlightProfile::Maneuver;
    } else {
      throw InvalidArgument("unknown flight profile '" + std::string(v) + "'");
    }
  } else if (key == "mission.time_limit_s") {
    cfg.time_limit_s = to_double(key, v);
  } else if (key == "mission.framing_timeout_s") {
    cfg.framing_timeout_s = to_double(key, v);
  } else if (key == "scene.targets") {
    cfg.random_targets = static_cast<int>(to_integer(key, v));
  } else if (key.substr(0, 13) == "scene.target.") {
    cfg.scene.targets.push_back(detail::parse_target(key, v));
  } else if (key == "scene.extent_m") {
    cfg.scene.world_extent = to_double(key, v);
  } else if (key == "scene.face_radius_px") {
    cfg.scene.face_radius_px = to_double(key, v);
  } else if (key == "scene.standoff_m") {
    cfg.scene.standoff_m = to_double(key, v);
  } else if (key == "scene.face_height_m") {
    cfg.scene.face_height_m = to_double(key, v);
  } else if (key == "scene.noise_level") {
    cfg.scene.noise_level = to_double(key, v);
  } else if (key == "scene.seed") {
    cfg.scene.seed = static_cast<std::uint64_t>(to_integer(key, v));
  } else if (key == "sim.v_max") {
    cfg.sim.v_max = to_double(key, v);
  } else if (key == "sim.tau") {
    cfg.sim.tau = to_double(key, v);
  } else if (key == "sim.climb_speed") {
    cfg.sim.climb_speed = to_double(key, v);
  } else if (key == "sim.takeoff_altitude_m") {
    cfg.sim.takeoff_altitude = to_double(key, v);
  } else if (key == "model.path") {
    cfg.model_path = std::string(v);
  } else {
    throw InvalidArgument("unknown config key '" + std::string(key) + "'");
  }
}

// '#' starts a comment; blank lines are ignored. Errors carry the line.
inline MissionConfig parse_config(std::string_view text, MissionConfig cfg = {}) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == line.npos) {
      throw InvalidArgument("line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    try {
      apply_config_value(cfg, key, value);
    } catch (const Error& e) {
      throw InvalidArgument("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.finalize();
  cfg.validate();
  return cfg;
}

inline MissionConfig load_config(const std::string& path, MissionConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const Error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

}  // namespace tinyedge::mission
