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

// Link configuration, the protocol client and a deterministic in-process
// transport that runs on a virtual clock.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "tinyedge/error.hpp"
#include "tinyedge/link/protocol.hpp"
#include "tinyedge/rng.hpp"

namespace tinyedge::link {

struct LinkConfig {
  int control_port = 8889;
  int state_port = 8890;
  double one_way_latency = 0.0;  // s
  double drop_probability = 0.0;
  double response_timeout = 1.0;  // s
  int retries = 2;

  void validate() const {
    if (control_port < 0 || control_port > 65535 || state_port < 0 || state_port > 65535) {
      throw InvalidArgument("port out of range");
    }
    if (control_port != 0 && control_port == state_port) {
      throw InvalidArgument("control and state ports must differ");
    }
    if (!(one_way_latency >= 0.0) || !std::isfinite(one_way_latency)) {
      throw InvalidArgument("latency must be non-negative");
    }
    if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
      throw InvalidArgument("drop probability must lie in [0, 1]");
    }
    if (!(response_timeout > 0.0)) throw InvalidArgument("response timeout must be positive");
    if (retries < 0) throw InvalidArgument("retries must be non-negative");
  }

  friend bool operator==(const LinkConfig&, const LinkConfig&) = default;
};

struct SendResult {
  std::optional<std::string> reply;  // empty for fire-and-forget commands
  int sends = 0;                     // datagrams put on the wire
  double round_trip = 0.0;           // s, request to reply
};

// In-process link over a virtual clock. Every datagram, in either direction,
// arrives one_way_latency after it was sent unless the seeded drop draw
// discards it. The owner supplies an advance callback that moves the rest of
// the world (for example the simulator) forward to a given time.
class VirtualLink {
 public:
  using Advance = std::function<void(double)>;

  VirtualLink(TelloServer& server, LinkConfig cfg, std::uint64_t seed, Advance advance = {})
      : server_(&server), cfg_(cfg), rng_(seed), advance_(std::move(advance)) {
    cfg_.validate();
  }

  const LinkConfig& config() const { return cfg_; }
  double now() const { return now_; }
  std::size_t datagrams_sent() const { return sent_; }
  std::size_t datagrams_dropped() const { return dropped_; }

  // Delivers fire-and-forget datagrams due by t, in send order, and moves the
  // clock to t.
  void advance_to(double t) {
    while (!pending_.empty() && pending_.front().first <= t) {
      auto [at, datagram] = std::move(pending_.front());
      pending_.pop_front();
      move_clock(at);
      server_->handle(datagram);
    }
    move_clock(t);
  }

  SendResult send(std::string_view datagram) {
    const auto parsed = try_parse_command(datagram);
    const bool fire_and_forget = parsed && !parsed->expects_reply();
    SendResult r;
    if (fire_and_forget) {
      r.sends = 1;
      if (transmit()) pending_.emplace_back(now_ + cfg_.one_way_latency, std::string(datagram));
      return r;
    }
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      const double sent_at = now_;
      const double deadline = sent_at + cfg_.response_timeout;
      ++r.sends;
      if (transmit()) {
        const double arrival = sent_at + cfg_.one_way_latency;
        if (arrival <= deadline) {
          advance_to(arrival);
          auto reply = server_->handle(datagram);
          if (reply && transmit()) {
            const double back = arrival + cfg_.one_way_latency;
            if (back <= deadline) {
              advance_to(back);
              r.reply = std::move(reply);
              r.round_trip = back - sent_at;
              return r;
            }
          }
        }
      }
      advance_to(deadline);
    }
    throw TimeoutError("no reply to '" + std::string(datagram) + "'", r.sends);
  }

 private:
  bool transmit() {
    ++sent_;
    if (cfg_.drop_probability > 0.0 && rng_.bernoulli(cfg_.drop_probability)) {
      ++dropped_;
      return false;
    }
    return true;
  }

  void move_clock(double t) {
    if (t < now_) return;
    now_ = t;
    if (advance_) advance_(t);
  }

  TelloServer* server_;
  LinkConfig cfg_;
  Rng rng_;
  Advance advance_;
  double now_ = 0.0;
  std::deque<std::pair<double, std::string>> pending_;
  std::size_t sent_ = 0;
  std::size_t dropped_ = 0;
};

// Typed command helpers over any transport exposing
// SendResult send(std::string_view).
template <typename Transport>
class TelloClient {
 public:
  explicit TelloClient(Transport& transport) : transport_(&transport) {}

  Transport& transport() { return *transport_; }

  SendResult send(const Command& c) { return transport_->send(encode_command(c)); }

  std::string request(const Command& c) {
    SendResult r = send(c);
    return r.reply.value_or(std::string{});
  }

  // Sends and requires an "ok" reply.
  void expect_ok(const Command& c) {
    const std::string reply = request(c);
    if (reply != kReplyOk) {
      throw InvalidState("'" + encode_command(c) + "' answered '" + reply + "'");
    }
  }

  void enter_sdk() { expect_ok({CommandKind::EnterSdk}); }
  void takeoff() { expect_ok({CommandKind::Takeoff}); }
  void land() { expect_ok({CommandKind::Land}); }
  void rc(int a, int b, int c, int d) { send(rc_command(a, b, c, d)); }

  int battery() { return query_int({CommandKind::BatteryQuery}); }
  int time() { return query_int({CommandKind::TimeQuery}); }

 private:
  int query_int(const Command& c) {
    const std::string reply = request(c);
    int v = 0;
    const auto [end, ec] = std::from_chars(reply.data(), reply.data() + reply.size(), v);
    if (ec != std::errc{} || end != reply.data() + reply.size()) {
      throw ParseError(0, "non-numeric reply '" + reply + "'");
    }
    return v;
  }

  Transport* transport_;
};

}  // namespace tinyedge::link
