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

// Table-driven energy model: each (payload, flight state) row is a total
// energy budget drained at a constant rate over the measured endurance.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "tinyedge/error.hpp"

namespace tinyedge::sim {

enum class PayloadConfig : std::uint8_t { NoPayload, ArduinoNano, OpenMV, DistributedKit };
enum class FlightState : std::uint8_t { Idle, TakingOff, Hover, Maneuver, Landing, Depleted };

inline constexpr std::array<PayloadConfig, 4> kAllPayloads{
    PayloadConfig::NoPayload, PayloadConfig::ArduinoNano, PayloadConfig::OpenMV,
    PayloadConfig::DistributedKit};

inline const char* to_string(PayloadConfig p) {
  switch (p) {
    case PayloadConfig::NoPayload: return "none";
    case PayloadConfig::ArduinoNano: return "arduino";
    case PayloadConfig::OpenMV: return "openmv";
    case PayloadConfig::DistributedKit: return "distributed";
  }
  return "?";
}

inline const char* to_string(FlightState s) {
  switch (s) {
    case FlightState::Idle: return "idle";
    case FlightState::TakingOff: return "takeoff";
    case FlightState::Hover: return "hover";
    case FlightState::Maneuver: return "maneuver";
    case FlightState::Landing: return "landing";
    case FlightState::Depleted: return "depleted";
  }
  return "?";
}

inline PayloadConfig parse_payload(std::string_view s) {
  for (PayloadConfig p : kAllPayloads) {
    if (s == to_string(p)) return p;
  }
  if (s == "nopayload") return PayloadConfig::NoPayload;
  if (s == "arduino_nano" || s == "arduinonano") return PayloadConfig::ArduinoNano;
  throw InvalidArgument("unknown payload '" + std::string(s) + "'");
}

inline FlightState parse_flight_state(std::string_view s) {
  for (auto st : {FlightState::Idle, FlightState::TakingOff, FlightState::Hover,
                  FlightState::Maneuver, FlightState::Landing, FlightState::Depleted}) {
    if (s == to_string(st)) return st;
  }
  throw InvalidArgument("unknown flight state '" + std::string(s) + "'");
}

struct EnergyEntry {
  double budget_j = 0.0;
  double endurance_s = 0.0;

  double power_w() const { return budget_j / endurance_s; }
};

class EnergyProfile {
 public:
  using Key = std::pair<PayloadConfig, FlightState>;

  void set(PayloadConfig p, FlightState s, EnergyEntry e) {
    if (!(e.budget_j > 0.0) || !(e.endurance_s > 0.0)) {
      throw InvalidArgument("energy budget and endurance must be positive");
    }
    entries_[{p, s}] = e;
  }

  std::optional<EnergyEntry> find(PayloadConfig p, FlightState s) const {
    const auto it = entries_.find({p, s});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  // Rows the tables leave blank fall back: idle to the bare airframe's idle
  // row, takeoff and landing to the configuration's hover row.
  EnergyEntry entry(PayloadConfig p, FlightState s) const {
    FlightState row = s;
    if (s == FlightState::TakingOff || s == FlightState::Landing) row = FlightState::Hover;
    if (auto e = find(p, row)) return *e;
    if (row == FlightState::Idle) {
      if (auto e = find(PayloadConfig::NoPayload, FlightState::Idle)) return *e;
    }
    throw InvalidArgument(std::string("no energy row for ") + to_string(p) + "/" +
                          to_string(s));
  }

  double power_w(PayloadConfig p, FlightState s) const {
    if (s == FlightState::Depleted) return 0.0;
    return entry(p, s).power_w();
  }

  double budget_j(PayloadConfig p, FlightState s) const { return entry(p, s).budget_j; }

  const std::map<Key, EnergyEntry>& entries() const { return entries_; }

  // Accepts energy.<payload>.<state>.budget_j and .endurance_s; returns
  // false for keys outside that namespace.
  bool apply_override(std::string_view key, double value) {
    constexpr std::string_view prefix = "energy.";
    if (key.substr(0, prefix.size()) != prefix) return false;
    std::string_view rest = key.substr(prefix.size());
    const auto d1 = rest.find('.');
    const auto d2 = rest.find('.', d1 == rest.npos ? d1 : d1 + 1);
    if (d1 == rest.npos || d2 == rest.npos) {
      throw InvalidArgument("malformed energy key '" + std::string(key) + "'");
    }
    const PayloadConfig p = parse_payload(rest.substr(0, d1));
    const FlightState s = parse_flight_state(rest.substr(d1 + 1, d2 - d1 - 1));
    const std::string_view field = rest.substr(d2 + 1);
    EnergyEntry e = find(p, s).value_or(EnergyEntry{});
    if (field == "budget_j") {
      e.budget_j = value;
    } else if (field == "endurance_s") {
      e.endurance_s = value;
    } else {
      throw InvalidArgument("unknown energy field '" + std::string(field) + "'");
    }
    if (e.budget_j > 0.0 && e.endurance_s > 0.0) {
      set(p, s, e);
    } else if (!(value > 0.0)) {
      throw InvalidArgument("energy values must be positive");
    } else {
      entries_[{p, s}] = e;  // completed by the matching key
    }
    return true;
  }

 private:
  std::map<Key, EnergyEntry> entries_;
};

// Measured budgets (J) and endurances (s) for the nine table rows.
inline EnergyProfile energy_profile_default() {
  using P = PayloadConfig;
  using S = FlightState;
  EnergyProfile e;
  e.set(P::NoPayload, S::Idle, {60192.0, 720.0});
  e.set(P::NoPayload, S::Hover, {77976.0, 563.0});
  e.set(P::NoPayload, S::Maneuver, {89727.0, 485.0});
  e.set(P::ArduinoNano, S::Hover, {96307.0, 470.0});
  e.set(P::ArduinoNano, S::Maneuver, {112449.0, 402.0});
  e.set(P::OpenMV, S::Hover, {116280.0, 380.0});
  e.set(P::OpenMV, S::Maneuver, {141588.0, 310.0});
  e.set(P::DistributedKit, S::Hover, {86320.0, 516.0});
  e.set(P::DistributedKit, S::Maneuver, {101232.0, 433.0});
  return e;
}

}  // namespace tinyedge::sim
