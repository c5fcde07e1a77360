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

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/nn/graph.hpp"

namespace tinyedge::nn {

// One inverted-residual bottleneck: 1x1 expand, 3x3 depthwise, 1x1 linear
// projection, plus a skip connection when shapes allow it.
struct BlockSpec {
  int expansion = 6;
  int out_channels = 16;
  int stride = 1;
};

struct StageSpec {
  int expansion;
  int channels;
  int repeats;
  int stride;
};

inline constexpr std::array<StageSpec, 7> kMobileNetV2Stages{{
    {1, 16, 1, 1},
    {6, 24, 2, 2},
    {6, 32, 3, 2},
    {6, 64, 4, 2},
    {6, 96, 3, 1},
    {6, 160, 3, 2},
    {6, 320, 1, 1},
}};

inline constexpr int kStemChannels = 32;
inline constexpr int kLastChannels = 1280;

// Rounds to the nearest multiple of `divisor` (at least `min_value`), bumping
// up one step if rounding lost more than 10%.
inline int make_divisible(double value, int divisor = 8, int min_value = 8) {
  int v = static_cast<int>(value + divisor / 2.0) / divisor * divisor;
  v = std::max(min_value, v);
  if (v < 0.9 * value) v += divisor;
  return v;
}

inline bool has_residual(int in_channels, const BlockSpec& spec) {
  return spec.stride == 1 && in_channels == spec.out_channels;
}

// Appends one block to the builder and returns its output tensor id.
inline int append_inverted_residual(GraphBuilder& b, int input,
                                    const BlockSpec& spec) {
  if (spec.expansion < 1 || spec.out_channels < 1 ||
      (spec.stride != 1 && spec.stride != 2)) {
    throw InvalidArgument("invalid block spec");
  }
  const int in_channels = b.shape(input).at(3);
  int x = input;
  if (spec.expansion != 1) {
    x = b.conv2d(x, in_channels * spec.expansion, 1, 1);
    x = b.relu6(x);
  }
  x = b.depthwise_conv2d(x, 3, spec.stride);
  x = b.relu6(x);
  x = b.conv2d(x, spec.out_channels, 1, 1);
  if (has_residual(in_channels, spec)) x = b.residual_add(input, x);
  return x;
}

// Runs a single block on `input`.
inline Tensor inverted_residual_block(const Tensor& input, const BlockSpec& spec,
                                      WeightInit init = WeightInit::Zero,
                                      std::uint64_t seed = 0) {
  GraphBuilder b(input.shape());
  append_inverted_residual(b, b.input(), spec);
  ModelGraph g = b.finish();
  initialize_weights(g, seed, init);
  return execute(g, input);
}

struct ChannelPlan {
  int stem = 0;
  std::vector<int> stages;
  int last = 0;
};

inline ChannelPlan mobilenet_v2_channels(double width_multiplier) {
  ChannelPlan plan;
  plan.stem = make_divisible(kStemChannels * width_multiplier);
  for (const auto& s : kMobileNetV2Stages) {
    plan.stages.push_back(make_divisible(s.channels * width_multiplier));
  }
  plan.last = width_multiplier > 1.0
                  ? make_divisible(kLastChannels * width_multiplier)
                  : kLastChannels;
  return plan;
}

// Width-scaled MobileNetV2 classifier. Weights are left uninitialized.
inline ModelGraph build_mobilenet_v2(double width_multiplier = 0.35,
                                     int input_res = 96, int classes = 2) {
  if (!(width_multiplier > 0.0) || !std::isfinite(width_multiplier)) {
    throw InvalidArgument("width multiplier must be positive");
  }
  if (input_res <= 0 || input_res % 32 != 0) {
    throw InvalidArgument("input resolution must be a positive multiple of 32");
  }
  if (classes < 1) throw InvalidArgument("need at least one class");
  const ChannelPlan plan = mobilenet_v2_channels(width_multiplier);

  GraphBuilder b({1, input_res, input_res, 3});
  int x = b.conv2d(b.input(), plan.stem, 3, 2);
  x = b.relu6(x);
  for (std::size_t si = 0; si < kMobileNetV2Stages.size(); ++si) {
    const StageSpec& s = kMobileNetV2Stages[si];
    for (int r = 0; r < s.repeats; ++r) {
      x = append_inverted_residual(
          b, x, {s.expansion, plan.stages[si], r == 0 ? s.stride : 1});
    }
  }
  x = b.conv2d(x, plan.last, 1, 1);
  x = b.relu6(x);
  x = b.global_avg_pool(x);
  x = b.fully_connected(x, classes);
  b.softmax(x);
  return b.finish();
}

}  // namespace tinyedge::nn
