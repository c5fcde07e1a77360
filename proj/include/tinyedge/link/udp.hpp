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

// The same protocol over real UDP sockets (POSIX). The server owns a thread
// that applies datagrams to the simulator one at a time and pushes the state
// line at 10 Hz; the client blocks on replies with wall-clock timeouts.

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include "tinyedge/error.hpp"
#include "tinyedge/link/link.hpp"
#include "tinyedge/link/protocol.hpp"
#include "tinyedge/rng.hpp"

namespace tinyedge::link {

class UdpSocket {
 public:
  UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
    if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  }
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  UdpSocket(UdpSocket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  ~UdpSocket() {
    if (fd_ >= 0) ::close(fd_);
  }

  // Binds to host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    sockaddr_in a = make_address(host, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a) != 0) {
      throw Error("bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof a;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    return ntohs(a.sin_port);
  }

  void send_to(const sockaddr_in& to, std::string_view data) {
    ::sendto(fd_, data.data(), data.size(), 0, reinterpret_cast<const sockaddr*>(&to),
             sizeof to);
  }

  // Waits up to timeout for one datagram.
  std::optional<std::pair<std::string, sockaddr_in>> receive(std::chrono::milliseconds timeout) {
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, static_cast<int>(timeout.count())) <= 0) return std::nullopt;
    char buf[2048];
    sockaddr_in from{};
    socklen_t len = sizeof from;
    const auto n = ::recvfrom(fd_, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n < 0) return std::nullopt;
    return std::pair{std::string(buf, static_cast<std::size_t>(n)), from};
  }

  static sockaddr_in make_address(const std::string& host, int port) {
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) {
      throw InvalidArgument("bad IPv4 address '" + host + "'");
    }
    return a;
  }

 private:
  int fd_;
};

namespace detail {

inline void sleep_seconds(double s) {
  if (s > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

}  // namespace detail

class UdpServer {
 public:
  // With realtime set the simulator is ticked by wall-clock time.
  UdpServer(sim::Drone& drone, LinkConfig cfg, std::uint64_t seed, bool realtime = false,
            std::string host = "127.0.0.1")
      : server_(drone), cfg_(cfg), rng_(seed), realtime_(realtime), host_(std::move(host)) {
    cfg_.validate();
    control_port_ = control_.bind(host_, cfg_.control_port);
  }
  UdpServer(const UdpServer&) = delete;
  UdpServer& operator=(const UdpServer&) = delete;
  ~UdpServer() { stop(); }

  int control_port() const { return control_port_; }

  void start() {
    if (running_.exchange(true)) return;
    thread_ = std::thread([this] { loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    if (thread_.joinable()) thread_.join();
  }

  // Serialized access to the simulator for inspection while serving.
  template <typename Fn>
  auto with_drone(Fn&& fn) {
    std::lock_guard lock(mutex_);
    return fn(server_.drone());
  }

 private:
  void loop() {
    using clock = std::chrono::steady_clock;
    auto last_tick = clock::now();
    auto next_state = clock::now();
    std::optional<sockaddr_in> peer;
    while (running_) {
      if (auto got = control_.receive(std::chrono::milliseconds(10))) {
        if (!rng_.bernoulli(cfg_.drop_probability)) {
          detail::sleep_seconds(cfg_.one_way_latency);
          peer = got->second;
          std::optional<std::string> reply;
          {
            std::lock_guard lock(mutex_);
            reply = server_.handle(got->first);
          }
          if (reply && !rng_.bernoulli(cfg_.drop_probability)) {
            detail::sleep_seconds(cfg_.one_way_latency);
            control_.send_to(got->second, *reply);
          }
        }
      }
      const auto now = clock::now();
      if (realtime_) {
        const double dt = std::chrono::duration<double>(now - last_tick).count();
        if (dt > 0.0) {
          std::lock_guard lock(mutex_);
          server_.drone().tick(dt);
        }
      }
      last_tick = now;
      if (peer && cfg_.state_port != 0 && now >= next_state) {
        sockaddr_in to = *peer;
        to.sin_port = htons(static_cast<std::uint16_t>(cfg_.state_port));
        std::string line;
        {
          std::lock_guard lock(mutex_);
          line = encode_state(server_.drone().telemetry());
        }
        state_.send_to(to, line);
        next_state = now + std::chrono::milliseconds(100);
      }
    }
  }

  TelloServer server_;
  LinkConfig cfg_;
  Rng rng_;
  bool realtime_;
  std::string host_;
  UdpSocket control_;
  UdpSocket state_;
  int control_port_ = 0;
  std::mutex mutex_;
  std::atomic<bool> running_{false};
  std::thread thread_;
};

class UdpClient {
 public:
  UdpClient(const std::string& host, int port, LinkConfig cfg, std::uint64_t seed)
      : server_(UdpSocket::make_address(host, port)), cfg_(cfg), rng_(seed) {
    cfg_.validate();
    socket_.bind("0.0.0.0", 0);
  }

  SendResult send(std::string_view datagram) {
    using clock = std::chrono::steady_clock;
    const auto parsed = try_parse_command(datagram);
    SendResult r;
    if (parsed && !parsed->expects_reply()) {
      r.sends = 1;
      transmit(datagram);
      return r;
    }
    const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::duration<double>(cfg_.response_timeout));
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      // Stale replies from an earlier timed-out attempt are discarded.
      while (socket_.receive(std::chrono::milliseconds(0))) {
      }
      ++r.sends;
      const auto start = clock::now();
      transmit(datagram);
      if (auto got = socket_.receive(timeout)) {
        r.reply = std::move(got->first);
        r.round_trip = std::chrono::duration<double>(clock::now() - start).count();
        return r;
      }
    }
    throw TimeoutError("no reply to '" + std::string(datagram) + "'", r.sends);
  }

 private:
  // Latency is applied by the server in both directions; the client only
  // draws drops.
  void transmit(std::string_view datagram) {
    if (rng_.bernoulli(cfg_.drop_probability)) return;
    socket_.send_to(server_, datagram);
  }

  sockaddr_in server_;
  LinkConfig cfg_;
  Rng rng_;
  UdpSocket socket_;
};

}  // namespace tinyedge::link
