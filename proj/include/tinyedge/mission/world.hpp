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

// Flat world with standing faces and a level pinhole camera on the drone.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/mission/scene.hpp"
#include "tinyedge/rng.hpp"
#include "tinyedge/sim/drone.hpp"

namespace tinyedge::mission {

inline constexpr double kFieldOfViewDeg = 60.0;

// Focal length in pixels for the horizontal field of view.
inline double focal_length_px() {
  return kFrameCenter / std::tan(kFieldOfViewDeg / 2.0 * std::numbers::pi / 180.0);
}

struct Target {
  double x = 0.0, y = 0.0;  // m, ground position
  MaskLabel label = MaskLabel::NoMask;

  friend bool operator==(const Target&, const Target&) = default;
};

struct SceneSpec {
  double world_extent = 10.0;   // m, targets lie in [-extent, extent]^2
  std::vector<Target> targets;
  double face_radius_px = 24.0;  // apparent radius at the standoff distance
  double standoff_m = 2.0;       // distance at which a face is framed
  double face_height_m = 1.6;
  double noise_level = 0.5;
  std::uint64_t seed = 1;

  // Physical face radius implied by the apparent radius at the standoff.
  double face_radius_m() const { return face_radius_px * standoff_m / focal_length_px(); }

  // Bounding-box width of a framed face.
  double target_width_px() const { return 2.0 * kFaceAspect * face_radius_px; }

  void validate() const {
    if (!(world_extent > 0.0)) throw InvalidArgument("scene extent must be positive");
    if (!(face_radius_px > 0.0) || !(standoff_m > 0.0) || !(face_height_m >= 0.0)) {
      throw InvalidArgument("face geometry must be positive");
    }
    if (!(noise_level >= 0.0 && noise_level <= 1.0)) {
      throw InvalidArgument("noise level must lie in [0, 1]");
    }
    for (const auto& t : targets) {
      if (std::fabs(t.x) > world_extent || std::fabs(t.y) > world_extent) {
        throw InvalidArgument("target outside the world extent");
      }
    }
  }
};

// Targets at least min_range from the takeoff point with alternating labels
// in shuffled order, so a scene with an even count is balanced.
inline std::vector<Target> random_targets(int count, double extent, std::uint64_t seed,
                                          double min_range = 3.0) {
  if (count < 0) throw InvalidArgument("target count must be non-negative");
  if (min_range >= extent) throw InvalidArgument("extent too small for min_range");
  Rng rng(derive_seed(seed, 0x7a7));
  std::vector<Target> out;
  for (int i = 0; i < count; ++i) {
    Target t;
    do {
      t.x = rng.uniform(-extent, extent);
      t.y = rng.uniform(-extent, extent);
    } while (std::hypot(t.x, t.y) < min_range);
    t.label = i % 2 == 0 ? MaskLabel::Mask : MaskLabel::NoMask;
    out.push_back(t);
  }
  for (std::size_t i = out.size(); i > 1; --i) {
    std::swap(out[i - 1].label, out[rng.below(i)].label);
  }
  return out;
}

struct CameraPose {
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0;  // rad, clockwise from +y
};

inline CameraPose camera_pose(const sim::DroneState& s) {
  return {s.position.x, s.position.y, s.position.z, s.yaw};
}

struct Projection {
  double u = 0.0, v = 0.0;  // px
  double depth = 0.0;       // m along the optical axis
};

inline constexpr double kNearPlane = 0.2;

// Pinhole projection; depth <= kNearPlane means the point is not in view.
inline Projection project(const CameraPose& cam, double px, double py, double pz) {
  const double dx = px - cam.x, dy = py - cam.y, dz = pz - cam.z;
  const double s = std::sin(cam.yaw), c = std::cos(cam.yaw);
  const double forward = dx * s + dy * c;
  const double right = dx * c - dy * s;
  const double f = focal_length_px();
  Projection p;
  p.depth = forward;
  if (forward > kNearPlane) {
    p.u = kFrameCenter + f * right / forward;
    p.v = kFrameCenter - f * dz / forward;
  }
  return p;
}

// Draws every visible target not flagged in hidden, far ones first so near
// faces occlude them. frame_seed fixes the noise.
inline Frame render(const SceneSpec& scene, const CameraPose& cam, std::uint64_t frame_seed,
                    const std::vector<bool>& hidden = {}) {
  Rng rng(frame_seed);
  Frame f;
  fill_background(f, scene.noise_level, rng);
  struct Visible {
    int index;
    Projection p;
    double radius;
  };
  std::vector<Visible> visible;
  const double focal = focal_length_px();
  for (std::size_t i = 0; i < scene.targets.size(); ++i) {
    if (i < hidden.size() && hidden[i]) continue;
    const Target& t = scene.targets[i];
    const Projection p = project(cam, t.x, t.y, scene.face_height_m);
    if (p.depth <= kNearPlane) continue;
    const double r = focal * scene.face_radius_m() / p.depth;
    if (r < 1.0) continue;
    const BBox box = face_bbox(p.u, p.v, r);
    if (box.cx + box.w / 2 < 0 || box.cx - box.w / 2 > kFrameSize ||
        box.cy + box.h / 2 < 0 || box.cy - box.h / 2 > kFrameSize) {
      continue;
    }
    visible.push_back({static_cast<int>(i), p, r});
  }
  std::stable_sort(visible.begin(), visible.end(),
                   [](const Visible& a, const Visible& b) { return a.p.depth > b.p.depth; });
  for (const auto& v : visible) {
    const Target& t = scene.targets[v.index];
    draw_face(f, v.p.u, v.p.v, v.radius, t.label, rng);
    f.truth.push_back({face_bbox(v.p.u, v.p.v, v.radius), t.label, v.index});
  }
  return f;
}

}  // namespace tinyedge::mission
