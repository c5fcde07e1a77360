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

// Closed detection-control loop over a virtual clock: the drone renders what
// it sees, tracks the largest face, and classifies it once it is framed,
// while the simulator charges energy for every second in the air.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/link/link.hpp"
#include "tinyedge/link/protocol.hpp"
#include "tinyedge/mission/config.hpp"
#include "tinyedge/mission/perception.hpp"
#include "tinyedge/mission/world.hpp"
#include "tinyedge/nn/graph.hpp"
#include "tinyedge/rng.hpp"
#include "tinyedge/sim/drone.hpp"

namespace tinyedge::mission {

struct TargetResult {
  int target = -1;  // scene index, -1 when no ground-truth face matched
  MaskLabel truth = MaskLabel::NoMask;
  MaskLabel prediction = MaskLabel::NoMask;
  double confidence = 0.0;
  double decided_at = 0.0;       // s, virtual clock
  double decision_period = 0.0;  // s, capture to decision
  bool skipped = false;

  bool correct() const { return !skipped && target >= 0 && truth == prediction; }
};

struct TimelineRecord {
  double t = 0.0;
  sim::Vec3 position;
  sim::FlightState state = sim::FlightState::Idle;
  double energy_j = 0.0;  // remaining
  std::string event;
};

struct MissionReport {
  std::string payload;
  std::string mode;
  double decision_period = 0.0;  // configured
  double flight_time = 0.0;
  double energy_used = 0.0;
  double capacity = 0.0;
  std::vector<TargetResult> results;
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // truth x prediction
  std::size_t decisions = 0;
  std::size_t control_iterations = 0;
  std::size_t link_timeouts = 0;
  std::string end_reason;
  std::vector<TimelineRecord> timeline;

  std::size_t targets() const {
    std::size_t n = 0;
    for (const auto& r : results) n += !r.skipped && r.target >= 0;
    return n;
  }
  std::size_t correct() const {
    std::size_t n = 0;
    for (const auto& r : results) n += r.correct();
    return n;
  }
  double accuracy() const {
    const auto t = targets();
    return t == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(t);
  }
};

namespace detail {

inline std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Ground-truth face under the detection centre; the nearest (largest) wins.
inline const GroundTruth* match_truth(const Frame& f, const Detection& d) {
  const GroundTruth* best = nullptr;
  for (const auto& g : f.truth) {
    if (std::fabs(d.bbox.cx - g.bbox.cx) > g.bbox.w / 2 ||
        std::fabs(d.bbox.cy - g.bbox.cy) > g.bbox.h / 2) {
      continue;
    }
    if (!best || g.bbox.h > best->bbox.h) best = &g;
  }
  return best;
}

}  // namespace detail

class MissionRunner {
 public:
  MissionRunner(const MissionConfig& cfg, const nn::ModelGraph& model)
      : cfg_(cfg),
        model_(model),
        drone_(cfg.effective_payload(), cfg.energy, cfg.sim, cfg.capacity_j()),
        server_(drone_),
        link_(server_, cfg.link, derive_seed(cfg.seed, 0x11),
              [this](double t) { advance_world(t); }),
        client_(link_),
        pids_(cfg.pid),
        classified_(cfg.scene.targets.size(), false) {
    cfg_.validate();
    report_.payload = sim::to_string(cfg.effective_payload());
    report_.mode = to_string(cfg.mode);
    report_.decision_period = cfg.decision_period();
    report_.capacity = drone_.state().capacity;
  }

  MissionRunner(const MissionRunner&) = delete;
  MissionRunner& operator=(const MissionRunner&) = delete;

  MissionReport run() {
    record("start");
    if (!reliable([&] { client_.enter_sdk(); }) ||
        !reliable([&] {
          confirmed([&] { client_.takeoff(); },
                    {sim::FlightState::TakingOff, sim::FlightState::Hover});
        })) {
      return finish("link_failure");
    }
    record("takeoff");
    while (drone_.state().flight_state == sim::FlightState::TakingOff) step_clock();
    if (depleted()) return finish("depleted");
    record("airborne");

    const bool depletion_mode =
        cfg_.end == EndCondition::Depletion || cfg_.scene.targets.empty();
    double tracking_since = link_.now();
    double last_classify = -1e300;
    std::uint64_t frame_index = 0;
    const double period = cfg_.decision_period();

    while (true) {
      if (depleted()) return finish("depleted");
      if (link_.now() >= cfg_.time_limit_s) return finish("time_limit");
      const bool all_done = remaining_targets() == 0;
      if (all_done && !depletion_mode) {
        if (!reliable([&] {
              confirmed([&] { client_.land(); },
                        {sim::FlightState::Landing, sim::FlightState::Idle});
            })) {
          return finish("link_failure");
        }
        record("land");
        while (drone_.state().flight_state == sim::FlightState::Landing) step_clock();
        return finish(depleted() ? "depleted" : "complete");
      }

      const Frame frame = render(cfg_.scene, camera_pose(drone_.state()),
                                 derive_seed(derive_seed(cfg_.seed, 0xf7), frame_index++),
                                 classified_);
      const auto det = detect_face(frame);
      ++report_.control_iterations;

      if (det && !all_done && link_.now() - last_classify >= period &&
          (framed(*det) || link_.now() - tracking_since >= cfg_.framing_timeout_s)) {
        client_.rc(0, 0, 0, 0);
        const double start = link_.now();
        last_classify = start;
        record("classify");
        link_.advance_to(start + period);  // inference dead time
        const Classification c = classify_target(model_, frame, *det);
        const GroundTruth* truth = detail::match_truth(frame, *det);
        TargetResult r;
        r.target = truth ? truth->target : -1;
        r.truth = truth ? truth->label : MaskLabel::NoMask;
        r.prediction = c.label;
        r.confidence = c.confidence;
        r.skipped = c.skipped;
        r.decided_at = link_.now();
        r.decision_period = r.decided_at - start;
        ++report_.decisions;
        if (r.target >= 0) {
          classified_[r.target] = true;
          if (!r.skipped) {
            ++report_.confusion[static_cast<int>(r.truth)][static_cast<int>(r.prediction)];
          }
        }
        record(detail::format("decision target=%d truth=%s pred=%s conf=%.3f period=%.3f",
                              r.target, to_string(r.truth),
                              r.skipped ? "skipped" : to_string(r.prediction), r.confidence,
                              period));
        report_.results.push_back(r);
        pids_.reset();
        tracking_since = link_.now();
        continue;
      }

      sim::RcCommand rc{0, 0, 0, 0};
      if (!all_done) {
        if (!det) pids_.reset();
        rc = control_step(det, pids_, cfg_.scene.target_width_px());
      } else if (cfg_.profile == FlightProfile::Maneuver) {
        rc = {0, 50, 0, 15};  // patrol circle
      }
      client_.rc(rc[0], rc[1], rc[2], rc[3]);
      step_clock();
      record({});
    }
  }

  const sim::Drone& drone() const { return drone_; }

 private:
  bool framed(const Detection& d) const {
    const double w = cfg_.scene.target_width_px();
    return std::fabs(d.bbox.cx - kFrameCenter) <= cfg_.framing_tolerance_px &&
           std::fabs(d.bbox.cy - kFrameCenter) <= cfg_.framing_tolerance_px &&
           std::fabs(d.bbox.w - w) <= cfg_.framing_size_tolerance * w;
  }

  std::size_t remaining_targets() const {
    std::size_t n = 0;
    for (bool c : classified_) n += !c;
    return n;
  }

  bool depleted() const { return drone_.state().flight_state == sim::FlightState::Depleted; }

  void step_clock() { link_.advance_to(link_.now() + cfg_.control_period_s); }

  void advance_world(double t) {
    while (drone_.state().elapsed + 0.5 * cfg_.dt <= t) {
      if (!drone_.tick(cfg_.dt)) break;
    }
  }

  // Retries a reply-bearing exchange a few times before giving up.
  template <typename Fn>
  bool reliable(Fn&& fn) {
    for (int attempt = 0; attempt < 3; ++attempt) {
      try {
        fn();
        return true;
      } catch (const TimeoutError&) {
        ++report_.link_timeouts;
        record("link_timeout");
      }
    }
    return false;
  }

  // A takeoff or land whose "ok" was lost is resent by the link and then
  // answered "error", since the drone already acted on the first copy. The
  // state stream tells the two cases apart.
  template <typename Fn>
  void confirmed(Fn&& fn, std::initializer_list<sim::FlightState> accepted) {
    try {
      fn();
    } catch (const InvalidState&) {
      const auto s = drone_.state().flight_state;
      if (std::find(accepted.begin(), accepted.end(), s) == accepted.end()) throw;
      record("state_confirms_command");
    }
  }

  void record(std::string event) {
    const auto& s = drone_.state();
    report_.timeline.push_back({link_.now(), s.position, s.flight_state, s.energy_remaining,
                                std::move(event)});
  }

  MissionReport finish(const char* reason) {
    report_.end_reason = reason;
    record(std::string("end ") + reason);
    report_.flight_time = drone_.state().flight_time;
    report_.energy_used = drone_.state().capacity - drone_.state().energy_remaining;
    return std::move(report_);
  }

  MissionConfig cfg_;
  const nn::ModelGraph& model_;
  sim::Drone drone_;
  link::TelloServer server_;
  link::VirtualLink link_;
  link::TelloClient<link::VirtualLink> client_;
  AxisPids pids_;
  std::vector<bool> classified_;
  MissionReport report_;
};

inline MissionReport run_mission(const MissionConfig& cfg, const nn::ModelGraph& model) {
  MissionConfig c = cfg;
  c.finalize();
  return MissionRunner(c, model).run();
}

}  // namespace tinyedge::mission
