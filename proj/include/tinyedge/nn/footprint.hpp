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

#include <algorithm>
#include <cstddef>
#include <vector>

#include "tinyedge/nn/graph.hpp"
#include "tinyedge/nn/model_io.hpp"

namespace tinyedge::nn {

struct MemoryFootprint {
  std::size_t flash_bytes = 0;     // serialized container size
  std::size_t ram_peak_bytes = 0;  // peak live activation bytes
};

inline std::size_t activation_bytes(const ModelGraph& g, int id) {
  const TensorInfo& t = g.tensors.at(id);
  return element_count(t.shape) * element_bytes(t.dtype);
}

// Live activation bytes while each layer executes. A buffer is live from the
// step that produces it (the input from step 0) through its last consumer.
inline std::vector<std::size_t> live_bytes_per_step(const ModelGraph& g) {
  const int steps = static_cast<int>(g.layers.size());
  std::vector<int> first(g.tensors.size(), -1);
  std::vector<int> last(g.tensors.size(), -1);
  first[g.input_id] = 0;
  last[g.input_id] = 0;
  for (int i = 0; i < steps; ++i) {
    const Layer& l = g.layers[i];
    first[l.output] = i;
    last[l.output] = std::max(last[l.output], i);
    for (int in : l.inputs) last[in] = std::max(last[in], i);
  }
  std::vector<std::size_t> live(steps, 0);
  for (std::size_t t = 0; t < g.tensors.size(); ++t) {
    if (first[t] < 0) continue;
    const std::size_t bytes = activation_bytes(g, static_cast<int>(t));
    for (int i = first[t]; i <= last[t]; ++i) live[i] += bytes;
  }
  return live;
}

inline std::size_t peak_activation_bytes(const ModelGraph& g) {
  const auto live = live_bytes_per_step(g);
  return live.empty() ? activation_bytes(g, g.input_id)
                      : *std::max_element(live.begin(), live.end());
}

inline MemoryFootprint memory_footprint(const ModelGraph& g) {
  return {serialize(g).size(), peak_activation_bytes(g)};
}

// Multiply-accumulates of one inference, counted over weight layers.
inline std::size_t multiply_accumulates(const ModelGraph& g) {
  std::size_t n = 0;
  for (const auto& l : g.layers) {
    const Shape& out = g.tensors.at(l.output).shape;
    switch (l.op) {
      case OpCode::Conv2D:
        n += element_count(out) * l.weights.dim(1) * l.weights.dim(2) * l.weights.dim(3);
        break;
      case OpCode::DepthwiseConv2D:
        n += element_count(out) * l.weights.dim(1) * l.weights.dim(2);
        break;
      case OpCode::FullyConnected:
        n += l.weights.size() * static_cast<std::size_t>(out.at(0));
        break;
      default:
        break;
    }
  }
  return n;
}

// Bytes taken by weight elements alone (biases excluded).
inline std::size_t weight_payload_bytes(const ModelGraph& g) {
  std::size_t n = 0;
  for (const auto& l : g.layers) n += l.weights.byte_size();
  return n;
}

}  // namespace tinyedge::nn
