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

// Tello-style ASCII command protocol: parser, drone-side state machine and
// the 10 Hz state line.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "tinyedge/error.hpp"
#include "tinyedge/sim/drone.hpp"

namespace tinyedge::link {

enum class CommandKind : std::uint8_t {
  EnterSdk, Takeoff, Land, Rc, BatteryQuery, TimeQuery
};

struct Command {
  CommandKind kind = CommandKind::EnterSdk;
  sim::RcCommand rc{0, 0, 0, 0};

  bool expects_reply() const { return kind != CommandKind::Rc; }

  friend bool operator==(const Command&, const Command&) = default;
};

inline Command rc_command(int a, int b, int c, int d) {
  return {CommandKind::Rc, {a, b, c, d}};
}

inline std::string encode_command(const Command& c) {
  switch (c.kind) {
    case CommandKind::EnterSdk: return "command";
    case CommandKind::Takeoff: return "takeoff";
    case CommandKind::Land: return "land";
    case CommandKind::BatteryQuery: return "battery?";
    case CommandKind::TimeQuery: return "time?";
    case CommandKind::Rc:
      return "rc " + std::to_string(c.rc[0]) + " " + std::to_string(c.rc[1]) + " " +
             std::to_string(c.rc[2]) + " " + std::to_string(c.rc[3]);
  }
  return {};
}

namespace detail {

inline bool is_trailing_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

// One signed decimal integer ending at a single space or end of input.
inline int parse_rc_arg(std::string_view s, std::size_t& pos, std::size_t base) {
  const std::size_t start = pos;
  std::size_t end = pos;
  if (end < s.size() && s[end] == '-') ++end;
  const std::size_t digits = end;
  while (end < s.size() && s[end] >= '0' && s[end] <= '9') ++end;
  if (end == digits) throw ParseError(base + start, "rc argument is not an integer");
  if (end - digits > 4) throw ParseError(base + start, "rc argument out of range");
  int v = 0;
  std::from_chars(s.data() + start, s.data() + end, v);
  if (v < -sim::kRcLimit || v > sim::kRcLimit) {
    throw ParseError(base + start, "rc argument out of range");
  }
  pos = end;
  return v;
}

}  // namespace detail

// Throws ParseError with the byte offset of the offending token.
inline Command parse_command(std::string_view datagram) {
  std::string_view s = datagram;
  while (!s.empty() && detail::is_trailing_space(s.back())) s.remove_suffix(1);
  if (s == "command") return {CommandKind::EnterSdk};
  if (s == "takeoff") return {CommandKind::Takeoff};
  if (s == "land") return {CommandKind::Land};
  if (s == "battery?") return {CommandKind::BatteryQuery};
  if (s == "time?") return {CommandKind::TimeQuery};
  if (s.substr(0, 3) != "rc ") throw ParseError(0, "unknown command");
  Command c{CommandKind::Rc};
  std::size_t pos = 3;
  for (int i = 0; i < 4; ++i) {
    if (i > 0) {
      if (pos >= s.size() || s[pos] != ' ') throw ParseError(pos, "rc needs 4 arguments");
      ++pos;
    }
    c.rc[i] = detail::parse_rc_arg(s, pos, 0);
  }
  if (pos != s.size()) throw ParseError(pos, "rc takes exactly 4 arguments");
  return c;
}

inline std::optional<Command> try_parse_command(std::string_view datagram) {
  try {
    return parse_command(datagram);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

inline constexpr const char* kReplyOk = "ok";
inline constexpr const char* kReplyError = "error";

// Drone-side protocol endpoint. Commands are applied one at a time in the
// order they are handed in; nothing but "command" is accepted before it.
class TelloServer {
 public:
  explicit TelloServer(sim::Drone& drone) : drone_(&drone) {}

  bool sdk_mode() const { return sdk_mode_; }
  sim::Drone& drone() { return *drone_; }
  const sim::Drone& drone() const { return *drone_; }

  std::optional<std::string> handle(std::string_view datagram) {
    const auto cmd = try_parse_command(datagram);
    if (!cmd) return std::string(kReplyError);
    return handle(*cmd);
  }

  std::optional<std::string> handle(const Command& cmd) {
    if (cmd.kind == CommandKind::EnterSdk) {
      sdk_mode_ = true;
      return std::string(kReplyOk);
    }
    if (!sdk_mode_) return std::string(kReplyError);
    try {
      switch (cmd.kind) {
        case CommandKind::Takeoff:
          drone_->takeoff();
          return std::string(kReplyOk);
        case CommandKind::Land:
          drone_->land();
          return std::string(kReplyOk);
        case CommandKind::BatteryQuery:
          return std::to_string(drone_->soc_pct());
        case CommandKind::TimeQuery:
          return std::to_string(static_cast<long>(std::floor(drone_->state().flight_time)));
        case CommandKind::Rc:
          drone_->apply_rc(cmd.rc[0], cmd.rc[1], cmd.rc[2], cmd.rc[3]);
          return std::nullopt;
        case CommandKind::EnterSdk:
          break;
      }
    } catch (const Error&) {
      return std::string(kReplyError);
    }
    return std::string(kReplyError);
  }

 private:
  sim::Drone* drone_;
  bool sdk_mode_ = false;
};

// Fields of the state line, in wire units.
struct StateFields {
  int pitch = 0, roll = 0, yaw = 0;  // deg
  int vgx = 0, vgy = 0, vgz = 0;     // dm/s
  int h = 0;                         // dm
  int bat = 0;                       // %
  int time = 0;                      // s

  friend bool operator==(const StateFields&, const StateFields&) = default;
};

inline StateFields state_fields(const sim::Telemetry& t) {
  const auto r = [](double v) { return static_cast<int>(std::lround(v)); };
  StateFields f;
  f.yaw = r(t.yaw * 180.0 / std::numbers::pi);
  f.vgx = r(t.velocity.x * 10.0);
  f.vgy = r(t.velocity.y * 10.0);
  f.vgz = r(t.velocity.z * 10.0);
  f.h = r(t.position.z * 10.0);
  f.bat = t.soc_pct;
  f.time = static_cast<int>(std::floor(t.flight_time));
  return f;
}

inline std::string encode_state(const StateFields& f) {
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "pitch:%d;roll:%d;yaw:%d;vgx:%d;vgy:%d;vgz:%d;h:%d;bat:%d;time:%d;\r\n",
                f.pitch, f.roll, f.yaw, f.vgx, f.vgy, f.vgz, f.h, f.bat, f.time);
  return buf;
}

inline std::string encode_state(const sim::Telemetry& t) {
  return encode_state(state_fields(t));
}

inline StateFields decode_state(std::string_view line) {
  static constexpr const char* kNames[] = {"pitch", "roll", "yaw", "vgx", "vgy",
                                           "vgz",   "h",    "bat", "time"};
  StateFields f;
  int* slots[] = {&f.pitch, &f.roll, &f.yaw, &f.vgx, &f.vgy,
                  &f.vgz,   &f.h,    &f.bat, &f.time};
  std::size_t pos = 0;
  for (int i = 0; i < 9; ++i) {
    const std::string_view name = kNames[i];
    if (line.substr(pos, name.size()) != name || pos + name.size() >= line.size() ||
        line[pos + name.size()] != ':') {
      throw ParseError(pos, "expected field '" + std::string(name) + "'");
    }
    pos += name.size() + 1;
    const auto [end, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), *slots[i]);
    if (ec != std::errc{}) throw ParseError(pos, "bad integer");
    pos = static_cast<std::size_t>(end - line.data());
    if (pos >= line.size() || line[pos] != ';') throw ParseError(pos, "expected ';'");
    ++pos;
  }
  if (line.substr(pos) != "\r\n") throw ParseError(pos, "expected CRLF terminator");
  return f;
}

}  // namespace tinyedge::link
