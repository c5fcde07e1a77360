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

// Deterministic synthetic scenes: faces are filled ellipses of a fixed hue
// over a uniform-noise background; masked faces carry a contrasting band
// across the lower half.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/nn/train.hpp"
#include "tinyedge/rng.hpp"
#include "tinyedge/tensor.hpp"

namespace tinyedge::mission {

inline constexpr int kFrameSize = 96;
inline constexpr int kFrameChannels = 3;
inline constexpr double kFrameCenter = kFrameSize / 2.0;

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kFaceColor{230, 170, 120};
inline constexpr Rgb kMaskColor{70, 140, 220};

enum class MaskLabel : int { Mask = 0, NoMask = 1 };

inline const char* to_string(MaskLabel l) {
  return l == MaskLabel::Mask ? "mask" : "no_mask";
}

// Axis-aligned box in pixels, stored by center and extents.
struct BBox {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct GroundTruth {
  BBox bbox;
  MaskLabel label = MaskLabel::NoMask;
  int target = -1;  // scene target index, -1 for dataset frames
};

struct Frame {
  std::vector<std::uint8_t> pixels =
      std::vector<std::uint8_t>(kFrameSize * kFrameSize * kFrameChannels, 0);
  std::vector<GroundTruth> truth;

  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * kFrameSize + x) * kFrameChannels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * kFrameSize + x) * kFrameChannels + c];
  }

  friend bool operator==(const Frame& a, const Frame& b) {
    return a.pixels == b.pixels;
  }
};

// Model input: [1, 96, 96, 3] with pixels mapped to [-1, 1].
inline Tensor to_tensor(const Frame& f) {
  std::vector<float> data(f.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<float>(f.pixels[i]) / 127.5f - 1.0f;
  }
  return Tensor::real({1, kFrameSize, kFrameSize, kFrameChannels}, std::move(data));
}

namespace detail {

inline std::uint8_t clamp_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

}  // namespace detail

// Uniform noise around mid-gray; noise_level in [0, 1] scales the spread.
inline void fill_background(Frame& f, double noise_level, Rng& rng) {
  const double spread = 127.0 * std::clamp(noise_level, 0.0, 1.0);
  for (auto& p : f.pixels) p = detail::clamp_pixel(128.0 + spread * rng.uniform(-1.0, 1.0));
}

// Face ellipse with semi-axes 0.8 r (horizontal) and r (vertical).
inline constexpr double kFaceAspect = 0.8;
inline constexpr double kFaceJitter = 8.0;

inline BBox face_bbox(double cx, double cy, double radius) {
  return {cx, cy, 2.0 * kFaceAspect * radius, 2.0 * radius};
}

inline void draw_face(Frame& f, double cx, double cy, double radius,
                      MaskLabel label, Rng& rng) {
  const double a = kFaceAspect * radius;
  const double b = radius;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - a)));
  const int x1 = std::min(kFrameSize - 1, static_cast<int>(std::ceil(cx + a)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - b)));
  const int y1 = std::min(kFrameSize - 1, static_cast<int>(std::ceil(cy + b)));
  // The band leaves a two pixel rim of skin so the face stays one region.
  const double band_a = std::max(0.0, a - 2.0);
  const double band_b = std::max(0.0, b - 2.0);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x + 0.5 - cx) / a;
      const double dy = (y + 0.5 - cy) / b;
      if (dx * dx + dy * dy > 1.0) continue;
      bool band = false;
      if (label == MaskLabel::Mask && band_a > 0.0 && band_b > 0.0) {
        const double rel = (y + 0.5 - cy) / b;
        const double bx = (x + 0.5 - cx) / band_a;
        const double by = (y + 0.5 - cy) / band_b;
        band = rel >= 0.15 && rel <= 0.75 && bx * bx + by * by <= 1.0;
      }
      const Rgb& base = band ? kMaskColor : kFaceColor;
      for (int c = 0; c < kFrameChannels; ++c) {
        f.at(x, y, c) =
            detail::clamp_pixel(base[c] + rng.uniform(-kFaceJitter, kFaceJitter));
      }
    }
  }
}

struct DatasetOptions {
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  double noise_level = 0.5;
  double min_radius = 28.0;
  double max_radius = 36.0;
  double max_offset = 6.0;
};

// Face close-ups, exactly half of them masked (the extra frame of an odd
// count is unmasked). Frame i depends only on (seed, i).
inline std::vector<Frame> make_dataset(const DatasetOptions& opt) {
  std::vector<MaskLabel> labels(opt.count);
  for (std::size_t i = 0; i < opt.count; ++i) {
    labels[i] = i < opt.count / 2 ? MaskLabel::Mask : MaskLabel::NoMask;
  }
  Rng shuffle(derive_seed(opt.seed, 0));
  for (std::size_t i = opt.count; i > 1; --i) {
    std::swap(labels[i - 1], labels[shuffle.below(i)]);
  }
  std::vector<Frame> frames(opt.count);
  for (std::size_t i = 0; i < opt.count; ++i) {
    Rng rng(derive_seed(opt.seed, i + 1));
    Frame& f = frames[i];
    fill_background(f, opt.noise_level, rng);
    const double cx = kFrameCenter + rng.uniform(-opt.max_offset, opt.max_offset);
    const double cy = kFrameCenter + rng.uniform(-opt.max_offset, opt.max_offset);
    const double r = rng.uniform(opt.min_radius, opt.max_radius);
    draw_face(f, cx, cy, r, labels[i], rng);
    f.truth.push_back({face_bbox(cx, cy, r), labels[i], -1});
  }
  return frames;
}

inline std::vector<nn::LabeledImage> to_labeled(std::span<const Frame> frames) {
  std::vector<nn::LabeledImage> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.truth.empty()) throw InvalidArgument("frame has no ground truth");
    out.push_back({to_tensor(f), static_cast<int>(f.truth.front().label)});
  }
  return out;
}

}  // namespace tinyedge::mission
