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

// Discrete per-iteration PID law with output clamping. The integral freezes on
// saturated steps so a long excursion does not wind it up.

#pragma once

#include <algorithm>
#include <cmath>

#include "tinyedge/error.hpp"

namespace tinyedge::control {

inline constexpr double kDefaultKp = 0.5;
inline constexpr double kDefaultKi = 0.05;
inline constexpr double kDefaultKd = 0.5;
inline constexpr double kCommandLimit = 100.0;

struct PidGains {
  double kp = kDefaultKp;
  double ki = kDefaultKi;
  double kd = kDefaultKd;

  friend bool operator==(const PidGains&, const PidGains&) = default;
};

class PidController {
 public:
  PidController() : PidController(PidGains{}) {}

  explicit PidController(PidGains gains, double out_min = -kCommandLimit,
                         double out_max = kCommandLimit)
      : gains_(gains), out_min_(out_min), out_max_(out_max) {
    if (!(out_min < out_max)) throw InvalidArgument("pid bounds need out_min < out_max");
    if (!std::isfinite(gains.kp) || !std::isfinite(gains.ki) ||
        !std::isfinite(gains.kd)) {
      throw InvalidArgument("pid gains must be finite");
    }
  }

  double step(double error) {
    if (!std::isfinite(error)) throw InvalidArgument("pid error must be finite");
    const double derivative = first_step_ ? 0.0 : error - prev_error_;
    const double integral = integral_ + error;
    const double raw = gains_.kp * error + gains_.kd * derivative + gains_.ki * integral;
    if (raw >= out_min_ && raw <= out_max_) integral_ = integral;
    prev_error_ = error;
    first_step_ = false;
    return std::clamp(raw, out_min_, out_max_);
  }

  void reset() {
    integral_ = 0.0;
    prev_error_ = 0.0;
    first_step_ = true;
  }

  const PidGains& gains() const { return gains_; }
  double out_min() const { return out_min_; }
  double out_max() const { return out_max_; }
  double integral() const { return integral_; }
  double prev_error() const { return prev_error_; }
  bool first_step() const { return first_step_; }

 private:
  PidGains gains_;
  double out_min_;
  double out_max_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool first_step_ = true;
};

inline PidController pid_new(double kp = kDefaultKp, double ki = kDefaultKi,
                             double kd = kDefaultKd) {
  return PidController(PidGains{kp, ki, kd});
}

}  // namespace tinyedge::control
