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

// Kinematic quadrotor stand-in driven by Tello-style rc setpoints. Velocity
// follows a first-order lag toward the commanded value; energy drains at the
// profile rate of the current flight state.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

#include "tinyedge/error.hpp"
#include "tinyedge/sim/energy.hpp"

namespace tinyedge::sim {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct SimParams {
  double v_max = 1.0;             // m/s at rc 100
  double tau = 0.5;               // s, velocity and yaw-rate lag
  double climb_speed = 1.0;       // m/s during takeoff and landing
  double takeoff_altitude = 5.0;  // m
  double maneuver_threshold = 0.1;  // m/s horizontal speed
  double yaw_rate_max_deg = 100.0;  // deg/s at rc 100

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

using RcCommand = std::array<int, 4>;  // lateral, forward, vertical, yaw

inline constexpr int kRcLimit = 100;

inline bool rc_in_range(const RcCommand& rc) {
  return std::all_of(rc.begin(), rc.end(),
                     [](int v) { return v >= -kRcLimit && v <= kRcLimit; });
}

// Yaw is the heading measured clockwise from +y, so a positive yaw command
// turns right, as on the real aircraft.
struct DroneState {
  Vec3 position;
  Vec3 velocity;
  double yaw = 0.0;       // rad
  double yaw_rate = 0.0;  // rad/s
  FlightState flight_state = FlightState::Idle;
  double energy_remaining = 0.0;  // J
  double capacity = 0.0;          // J, budget the run started with
  double elapsed = 0.0;           // s since power-on
  double flight_time = 0.0;       // s spent off the ground
  RcCommand rc{0, 0, 0, 0};

  friend bool operator==(const DroneState&, const DroneState&) = default;
};

struct Telemetry {
  double t = 0.0;
  Vec3 position;
  Vec3 velocity;
  double yaw = 0.0;
  FlightState state = FlightState::Idle;
  double energy_j = 0.0;
  int soc_pct = 0;
  double flight_time = 0.0;

  friend bool operator==(const Telemetry&, const Telemetry&) = default;
};

inline bool airborne(FlightState s) {
  return s == FlightState::TakingOff || s == FlightState::Hover ||
         s == FlightState::Maneuver || s == FlightState::Landing;
}

class Drone {
 public:
  // capacity_j defaults to the hover budget of the payload.
  explicit Drone(PayloadConfig payload, EnergyProfile profile = energy_profile_default(),
                 SimParams params = {}, double capacity_j = 0.0)
      : payload_(payload), profile_(std::move(profile)), params_(params) {
    if (!(params.v_max > 0.0) || !(params.tau > 0.0) || !(params.climb_speed > 0.0) ||
        !(params.takeoff_altitude > 0.0) || !(params.maneuver_threshold >= 0.0)) {
      throw InvalidArgument("simulation parameters must be positive");
    }
    const double cap =
        capacity_j > 0.0 ? capacity_j : profile_.budget_j(payload, FlightState::Hover);
    state_.capacity = cap;
    state_.energy_remaining = cap;
  }

  PayloadConfig payload() const { return payload_; }
  const EnergyProfile& profile() const { return profile_; }
  const SimParams& params() const { return params_; }
  const DroneState& state() const { return state_; }

  void apply_rc(int a, int b, int c, int d) {
    const RcCommand rc{a, b, c, d};
    if (!rc_in_range(rc)) throw InvalidArgument("rc component outside [-100, 100]");
    state_.rc = rc;
  }

  // Velocity the rc setpoint asks for, in world axes.
  Vec3 target_velocity() const {
    const double lateral = state_.rc[0] * params_.v_max / kRcLimit;
    const double forward = state_.rc[1] * params_.v_max / kRcLimit;
    const double s = std::sin(state_.yaw), c = std::cos(state_.yaw);
    return {forward * s + lateral * c, forward * c - lateral * s,
            state_.rc[2] * params_.v_max / kRcLimit};
  }

  double target_yaw_rate() const {
    return state_.rc[3] * params_.yaw_rate_max_deg / kRcLimit * std::numbers::pi / 180.0;
  }

  void takeoff() {
    if (state_.flight_state != FlightState::Idle) {
      throw InvalidState(std::string("takeoff from ") + to_string(state_.flight_state));
    }
    state_.flight_state = FlightState::TakingOff;
    state_.rc = {0, 0, 0, 0};
  }

  void land() {
    const FlightState s = state_.flight_state;
    if (s != FlightState::Hover && s != FlightState::Maneuver &&
        s != FlightState::TakingOff) {
      throw InvalidState(std::string("land from ") + to_string(s));
    }
    state_.flight_state = FlightState::Landing;
    state_.rc = {0, 0, 0, 0};
  }

  // Places the drone at the takeoff altitude in the given airborne state.
  // Maneuver starts at full forward speed with the matching rc setpoint.
  void start_airborne(FlightState s) {
    if (s != FlightState::Hover && s != FlightState::Maneuver) {
      throw InvalidArgument("start_airborne needs hover or maneuver");
    }
    state_.position.z = params_.takeoff_altitude;
    state_.flight_state = s;
    state_.rc = {0, 0, 0, 0};
    state_.velocity = {};
    if (s == FlightState::Maneuver) {
      state_.rc[1] = kRcLimit;
      state_.velocity = target_velocity();
    }
  }

  // Advances by dt seconds. Returns false, changing nothing, once depleted.
  bool tick(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    DroneState& s = state_;
    if (s.flight_state == FlightState::Depleted) return false;
    const bool was_airborne = airborne(s.flight_state);

    switch (s.flight_state) {
      case FlightState::Idle:
        s.velocity = {};
        s.yaw_rate = 0.0;
        break;
      case FlightState::TakingOff:
        s.velocity = {0.0, 0.0, params_.climb_speed};
        s.position.z = std::min(params_.takeoff_altitude,
                                s.position.z + params_.climb_speed * dt);
        if (s.position.z >= params_.takeoff_altitude) {
          s.flight_state = FlightState::Hover;
          s.velocity = {};
        }
        break;
      case FlightState::Landing:
        s.velocity = {0.0, 0.0, -params_.climb_speed};
        s.position.z = std::max(0.0, s.position.z - params_.climb_speed * dt);
        if (s.position.z <= 0.0) {
          s.flight_state = FlightState::Idle;
          s.velocity = {};
        }
        break;
      case FlightState::Hover:
      case FlightState::Maneuver: {
        const double k = std::min(1.0, dt / params_.tau);
        const Vec3 vt = target_velocity();
        s.velocity.x += (vt.x - s.velocity.x) * k;
        s.velocity.y += (vt.y - s.velocity.y) * k;
        s.velocity.z += (vt.z - s.velocity.z) * k;
        s.yaw_rate += (target_yaw_rate() - s.yaw_rate) * k;
        s.position.x += s.velocity.x * dt;
        s.position.y += s.velocity.y * dt;
        s.position.z += s.velocity.z * dt;
        if (s.position.z < 0.0) {
          s.position.z = 0.0;
          s.velocity.z = 0.0;
        }
        s.yaw = std::remainder(s.yaw + s.yaw_rate * dt, 2.0 * std::numbers::pi);
        const double horizontal = std::hypot(s.velocity.x, s.velocity.y);
        s.flight_state = horizontal > params_.maneuver_threshold ? FlightState::Maneuver
                                                                 : FlightState::Hover;
        break;
      }
      case FlightState::Depleted:
        break;
    }

    s.energy_remaining -= profile_.power_w(payload_, s.flight_state) * dt;
    s.elapsed += dt;
    if (was_airborne || airborne(s.flight_state)) s.flight_time += dt;
    if (s.energy_remaining <= 0.0) {
      // Forced descent: the aircraft is on the ground with nothing left.
      s.energy_remaining = 0.0;
      s.flight_state = FlightState::Depleted;
      s.position.z = 0.0;
      s.velocity = {};
      s.yaw_rate = 0.0;
      s.rc = {0, 0, 0, 0};
    }
    return true;
  }

  int soc_pct() const {
    if (state_.capacity <= 0.0) return 0;
    const double pct = 100.0 * state_.energy_remaining / state_.capacity;
    return static_cast<int>(std::lround(std::clamp(pct, 0.0, 100.0)));
  }

  Telemetry telemetry() const {
    return {state_.elapsed,        state_.position,
            state_.velocity,       state_.yaw,
            state_.flight_state,   state_.energy_remaining,
            soc_pct(),             state_.flight_time};
  }

 private:
  PayloadConfig payload_;
  EnergyProfile profile_;
  SimParams params_;
  DroneState state_;
};

struct EnduranceResult {
  double endurance_s = 0.0;  // elapsed time at depletion
  double energy_j = 0.0;     // energy drawn until depletion
  long ticks = 0;
};

// Constant-state run from a full budget for that state until depletion.
inline EnduranceResult endurance_run(PayloadConfig payload, FlightState state, double dt,
                                     const EnergyProfile& profile = energy_profile_default(),
                                     SimParams params = {}) {
  const double budget = profile.budget_j(payload, state);
  Drone d(payload, profile, params, budget);
  if (state != FlightState::Idle) d.start_airborne(state);
  EnduranceResult r;
  const long limit = static_cast<long>(std::ceil(10.0 * profile.entry(payload, state).endurance_s / dt));
  while (d.state().flight_state != FlightState::Depleted) {
    if (++r.ticks > limit) throw InvalidState("endurance run did not deplete");
    d.tick(dt);
  }
  r.endurance_s = d.state().elapsed;
  r.energy_j = budget - d.state().energy_remaining;
  return r;
}

inline constexpr const char* kTelemetryCsvHeader = "t,x,y,z,state,energy_j,soc_pct";

inline std::string telemetry_csv_row(const Telemetry& t) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.3f,%.3f,%s,%.3f,%d", t.t, t.position.x,
                t.position.y, t.position.z, to_string(t.state), t.energy_j, t.soc_pct);
  return buf;
}

}  // namespace tinyedge::sim
