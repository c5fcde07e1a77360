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

// Face detection by hue distance, the per-axis tracking law and crop-based
// mask classification.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "tinyedge/control/pid.hpp"
#include "tinyedge/mission/scene.hpp"
#include "tinyedge/nn/graph.hpp"
#include "tinyedge/sim/drone.hpp"

namespace tinyedge::mission {

struct Detection {
  BBox bbox;
  double confidence = 0.0;
  int area = 0;  // pixels in the component

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectorOptions {
  double color_distance = 40.0;
  int min_area = 16;
};

inline bool is_face_pixel(const Frame& f, int x, int y, double max_distance) {
  double d2 = 0.0;
  for (int c = 0; c < kFrameChannels; ++c) {
    const double d = static_cast<double>(f.at(x, y, c)) - kFaceColor[c];
    d2 += d * d;
  }
  return d2 <= max_distance * max_distance;
}

// Largest 4-connected face-colored component. Its bounding box is the
// detection; confidence is the filled share of the inscribed ellipse.
inline std::optional<Detection> detect_face(const Frame& f, const DetectorOptions& opt = {}) {
  constexpr int n = kFrameSize * kFrameSize;
  std::vector<std::uint8_t> mask(n, 0);
  for (int y = 0; y < kFrameSize; ++y) {
    for (int x = 0; x < kFrameSize; ++x) {
      mask[y * kFrameSize + x] = is_face_pixel(f, x, y, opt.color_distance);
    }
  }
  std::vector<int> label(n, -1);
  std::vector<int> stack;
  struct Component {
    int area = 0, x0 = kFrameSize, y0 = kFrameSize, x1 = -1, y1 = -1;
  };
  std::optional<Component> best;
  int next_label = 0;
  for (int start = 0; start < n; ++start) {
    if (!mask[start] || label[start] >= 0) continue;
    Component c;
    label[start] = next_label;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % kFrameSize, y = p / kFrameSize;
      ++c.area;
      c.x0 = std::min(c.x0, x);
      c.x1 = std::max(c.x1, x);
      c.y0 = std::min(c.y0, y);
      c.y1 = std::max(c.y1, y);
      const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nbrs) {
        if (q[0] < 0 || q[0] >= kFrameSize || q[1] < 0 || q[1] >= kFrameSize) continue;
        const int qi = q[1] * kFrameSize + q[0];
        if (mask[qi] && label[qi] < 0) {
          label[qi] = next_label;
          stack.push_back(qi);
        }
      }
    }
    ++next_label;
    if (!best || c.area > best->area) best = c;
  }
  if (!best || best->area < opt.min_area) return std::nullopt;
  Detection d;
  const double w = best->x1 - best->x0 + 1;
  const double h = best->y1 - best->y0 + 1;
  d.bbox = {best->x0 + w / 2.0, best->y0 + h / 2.0, w, h};
  d.area = best->area;
  const double expected = std::numbers::pi * w * h / 4.0;
  d.confidence = std::clamp(best->area / expected, 0.0, 1.0);
  return d;
}

// One PID per controlled rc channel.
struct AxisPids {
  control::PidController yaw;
  control::PidController vertical;
  control::PidController forward;

  explicit AxisPids(control::PidGains g = {}) : yaw(g), vertical(g), forward(g) {}

  void reset() {
    yaw.reset();
    vertical.reset();
    forward.reset();
  }
};

inline constexpr int kSearchYaw = 15;
inline constexpr double kErrorScale = 100.0 / kFrameCenter;

inline int to_rc(double u) {
  return static_cast<int>(std::clamp(std::lround(u), -100l, 100l));
}

// Pixel errors scaled to command units drive yaw (horizontal offset),
// vertical speed (vertical offset, image y grows downward) and forward speed
// (apparent width short of the framing width). Without a detection the
// aircraft holds position and turns slowly to search.
inline sim::RcCommand control_step(const std::optional<Detection>& d, AxisPids& pids,
                                   double target_width_px) {
  if (!d) return {0, 0, 0, kSearchYaw};
  const double ex = (d->bbox.cx - kFrameCenter) * kErrorScale;
  const double ey = (d->bbox.cy - kFrameCenter) * kErrorScale;
  const double ef = (target_width_px - d->bbox.w) / target_width_px * 100.0;
  const int yaw = to_rc(pids.yaw.step(ex));
  const int vertical = to_rc(-pids.vertical.step(ey));
  const int forward = to_rc(pids.forward.step(ef));
  return {0, forward, vertical, yaw};
}

struct CropRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

inline constexpr double kCropMargin = 0.2;
inline constexpr double kMinClassifyExtent = 4.0;

// Square around the detection, 20% margin on each side, clipped to the frame.
inline CropRect crop_rect(const BBox& b) {
  const double side = std::max(b.w, b.h) * (1.0 + 2.0 * kCropMargin);
  const auto lo = [](double v) {
    return std::clamp(static_cast<int>(std::floor(v)), 0, kFrameSize);
  };
  const auto hi = [](double v) {
    return std::clamp(static_cast<int>(std::ceil(v)), 0, kFrameSize);
  };
  return {lo(b.cx - side / 2), lo(b.cy - side / 2), hi(b.cx + side / 2), hi(b.cy + side / 2)};
}

// Nearest-neighbour resample of the rectangle to a full frame.
inline Frame crop_resize(const Frame& f, const CropRect& r) {
  if (r.width() <= 0 || r.height() <= 0) throw InvalidArgument("empty crop");
  Frame out;
  for (int y = 0; y < kFrameSize; ++y) {
    const int sy = r.y0 + y * r.height() / kFrameSize;
    for (int x = 0; x < kFrameSize; ++x) {
      const int sx = r.x0 + x * r.width() / kFrameSize;
      for (int c = 0; c < kFrameChannels; ++c) out.at(x, y, c) = f.at(sx, sy, c);
    }
  }
  return out;
}

struct Classification {
  bool skipped = false;  // degenerate box, no inference run
  MaskLabel label = MaskLabel::NoMask;
  double confidence = 0.0;
};

inline Classification classify_target(const nn::ModelGraph& model, const Frame& f,
                                      const Detection& d) {
  if (d.bbox.w < kMinClassifyExtent || d.bbox.h < kMinClassifyExtent) {
    return {true, MaskLabel::NoMask, 0.0};
  }
  const Frame crop = crop_resize(f, crop_rect(d.bbox));
  const auto probs = nn::run_inference(model, to_tensor(crop));
  const int k = nn::argmax(probs);
  return {false, static_cast<MaskLabel>(k), probs[k]};
}

}  // namespace tinyedge::mission
