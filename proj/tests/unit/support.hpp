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

// Helpers shared by the unit tests: seeded tensor generators, reference
// implementations written independently of the library kernels, and golden
// file access.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tinyedge/mission/scene.hpp"
#include "tinyedge/nn/graph.hpp"
#include "tinyedge/nn/mobilenet.hpp"
#include "tinyedge/nn/train.hpp"
#include "tinyedge/rng.hpp"
#include "tinyedge/tensor.hpp"

namespace tinyedge::testing {

inline std::string golden_path(const std::string& name) {
  return std::string(TINYEDGE_GOLDEN_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops '#' comment lines.
inline std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    out += line + '\n';
  }
  return out;
}

// "key v1 v2 ..." lines of an oracle output file.
inline std::map<std::string, std::vector<long long>> read_oracle(const std::string& name) {
  std::istringstream in(strip_comments(read_file(golden_path(name))));
  std::map<std::string, std::vector<long long>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    long long v = 0;
    while (ls >> v) out[key].push_back(v);
  }
  return out;
}

inline Tensor random_real(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> data(element_count(shape));
  for (float& v : data) v = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::real(std::move(shape), std::move(data));
}

inline std::vector<float> random_vector(std::size_t n, Rng& rng, double lo = -1.0,
                                        double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

// Direct grouped convolution over NHWC input. Weights are
// [out_c, k, k, in_c / groups]; output channel o reads input group
// o / (out_c / groups). Same padding splits the excess evenly with the odd
// pixel at the end. Products are summed in Acc in kernel raster order and
// the bias is added last.
template <typename Acc = double>
std::vector<Acc> grouped_conv_reference(const Tensor& input,
                                                  const std::vector<float>& weights,
                                                  int out_c, int k, int groups,
                                                  const std::vector<float>& bias, int stride,
                                                  bool same, int& out_h, int& out_w) {
  const int h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const int cin_g = c / groups;
  const int cout_g = out_c / groups;
  int pad_t = 0, pad_l = 0;
  if (same) {
    out_h = (h + stride - 1) / stride;
    out_w = (w + stride - 1) / stride;
    const int ph = std::max(0, (out_h - 1) * stride + k - h);
    const int pw = std::max(0, (out_w - 1) * stride + k - w);
    pad_t = ph / 2;
    pad_l = pw / 2;
  } else {
    out_h = (h - k) / stride + 1;
    out_w = (w - k) / stride + 1;
  }
  const auto x = input.real_data();
  std::vector<Acc> out(static_cast<std::size_t>(out_h) * out_w * out_c, Acc{0});
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      for (int o = 0; o < out_c; ++o) {
        const int g = o / cout_g;
        Acc acc{0};
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int iy = oy * stride + ky - pad_t;
            const int ix = ox * stride + kx - pad_l;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            for (int ci = 0; ci < cin_g; ++ci) {
              const Acc xv = x[(static_cast<std::size_t>(iy) * w + ix) * c + g * cin_g + ci];
              const Acc wv =
                  weights[((static_cast<std::size_t>(o) * k + ky) * k + kx) * cin_g + ci];
              acc += xv * wv;
            }
          }
        }
        if (!bias.empty()) acc += static_cast<Acc>(bias[o]);
        out[(static_cast<std::size_t>(oy) * out_w + ox) * out_c + o] = acc;
      }
    }
  }
  return out;
}

// Backbone with a seeded fan-in-scaled init, head trained on a small
// synthetic set. Shared by the slower integration tests.
struct TrainedModel {
  nn::ModelGraph model;
  double train_accuracy = 0.0;
};

inline const TrainedModel& trained_model() {
  static const TrainedModel cached = [] {
    nn::ModelGraph m = nn::build_mobilenet_v2();
    nn::initialize_weights(m, 7);
    mission::DatasetOptions o;
    o.count = 200;
    o.seed = 3;
    const auto frames = mission::make_dataset(o);
    const auto data = mission::to_labeled(frames);
    nn::TrainResult r = nn::train_head(m, data, {});
    return TrainedModel{std::move(r.model), r.train_accuracy};
  }();
  return cached;
}

inline void mark_int8(nn::ModelGraph& g) {
  for (auto& t : g.tensors) t.dtype = DType::Int8;
}

// Materializes every buffer at every step: a tensor is resident at step i
// when it exists by then and is produced at i or read at some step >= i.
inline std::size_t brute_force_peak(const nn::ModelGraph& g) {
  const int steps = static_cast<int>(g.layers.size());
  auto produced_at = [&](int t) {
    if (t == g.input_id) return 0;
    for (int i = 0; i < steps; ++i) {
      if (g.layers[i].output == t) return i;
    }
    return steps;
  };
  auto read_at_or_after = [&](int t, int i) {
    for (int j = i; j < steps; ++j) {
      for (int in : g.layers[j].inputs) {
        if (in == t) return true;
      }
    }
    return false;
  };
  std::size_t peak = 0;
  for (int i = 0; i < steps; ++i) {
    std::size_t resident = 0;
    for (int t = 0; t < static_cast<int>(g.tensors.size()); ++t) {
      const int p = produced_at(t);
      if (p > i) continue;
      if (p == i || read_at_or_after(t, i)) {
        std::size_t bytes = g.tensors[t].dtype == DType::Int8 ? 1 : 4;
        for (int d : g.tensors[t].shape) bytes *= static_cast<std::size_t>(d);
        resident += bytes;
      }
    }
    peak = std::max(peak, resident);
  }
  return peak;
}

inline nn::ModelGraph random_graph(Rng& rng) {
  const int side = 4 + static_cast<int>(rng.below(13));
  const int channels = 1 + static_cast<int>(rng.below(8));
  nn::GraphBuilder b({1, side, side, channels});
  const int layers = 1 + static_cast<int>(rng.below(10));
  std::vector<int> available{b.input()};
  int x = b.input();
  for (int i = 0; i < layers; ++i) {
    const bool flat = b.shape(x).size() == 2;
    const auto pick = rng.below(flat ? 2 : 7);
    if (flat) {
      x = pick == 0 ? b.fully_connected(x, 1 + static_cast<int>(rng.below(6))) : b.softmax(x);
    } else if (pick == 0) {
      x = b.conv2d(x, 1 + static_cast<int>(rng.below(12)), 1 + 2 * static_cast<int>(rng.below(2)),
                   1 + static_cast<int>(rng.below(2)));
    } else if (pick == 1) {
      x = b.depthwise_conv2d(x, 3, 1 + static_cast<int>(rng.below(2)));
    } else if (pick == 2) {
      x = b.relu6(x);
    } else if (pick == 3) {
      // Skip edge to any earlier tensor of the same shape.
      std::vector<int> same;
      for (int t : available) {
        if (t != x && b.shape(t) == b.shape(x)) same.push_back(t);
      }
      x = same.empty() ? b.relu6(x) : b.residual_add(same[rng.below(same.size())], x);
    } else if (pick == 4) {
      x = b.global_avg_pool(x);
    } else if (pick == 5) {
      x = b.fully_connected(x, 1 + static_cast<int>(rng.below(6)));
    } else {
      x = b.conv2d(x, b.shape(x)[3], 1, 1);
    }
    available.push_back(x);
  }
  nn::ModelGraph g = b.finish();
  if (rng.bernoulli(0.5)) mark_int8(g);
  return g;
}

}  // namespace tinyedge::testing
