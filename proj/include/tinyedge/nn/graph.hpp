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
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/nn/kernels.hpp"
#include "tinyedge/quantization.hpp"
#include "tinyedge/rng.hpp"
#include "tinyedge/tensor.hpp"

namespace tinyedge::nn {

enum class OpCode : std::uint8_t {
  Conv2D = 0,
  DepthwiseConv2D = 1,
  ReLU6 = 2,
  GlobalAvgPool = 3,
  FullyConnected = 4,
  Softmax = 5,
  ResidualAdd = 6,
};

inline constexpr int kOpCodeCount = 7;

inline const char* op_name(OpCode op) {
  switch (op) {
    case OpCode::Conv2D: return "conv2d";
    case OpCode::DepthwiseConv2D: return "depthwise_conv2d";
    case OpCode::ReLU6: return "relu6";
    case OpCode::GlobalAvgPool: return "global_avg_pool";
    case OpCode::FullyConnected: return "fully_connected";
    case OpCode::Softmax: return "softmax";
    case OpCode::ResidualAdd: return "residual_add";
  }
  return "unknown";
}

inline bool has_weights(OpCode op) {
  return op == OpCode::Conv2D || op == OpCode::DepthwiseConv2D ||
         op == OpCode::FullyConnected;
}

struct Layer {
  OpCode op = OpCode::ReLU6;
  int stride = 1;
  Padding padding = Padding::Same;
  std::vector<int> inputs;
  int output = -1;
  Tensor weights;                    // empty for weightless ops
  std::vector<float> bias;           // Real32 graphs
  std::vector<std::int32_t> qbias;   // Int8 graphs, scale s_in * s_w

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct TensorInfo {
  Shape shape;
  DType dtype = DType::Real32;
  std::optional<QuantParams> qparams;

  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

// Ordered layer list over numbered activation tensors. Tensor 0 is the
// graph input; each layer produces exactly one new tensor.
struct ModelGraph {
  DType dtype = DType::Real32;
  int input_resolution = 0;
  int classes = 0;
  int input_id = 0;
  int output_id = -1;
  bool weights_initialized = false;
  std::vector<TensorInfo> tensors;
  std::vector<Layer> layers;

  friend bool operator==(const ModelGraph&, const ModelGraph&) = default;

  const TensorInfo& tensor(int id) const { return tensors.at(id); }

  // Index of the last FullyConnected layer, the trainable head.
  int head_layer() const {
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
      if (layers[i].op == OpCode::FullyConnected) return i;
    }
    throw InvalidState("model has no fully connected head");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
      n += l.weights.size() + std::max(l.bias.size(), l.qbias.size());
    }
    return n;
  }
};

// Throws ShapeError / InvalidState when the graph breaks a structural rule.
inline void validate(const ModelGraph& g) {
  const int n = static_cast<int>(g.tensors.size());
  if (n == 0) throw InvalidState("graph has no tensors");
  if (g.input_id != 0) throw InvalidState("graph input must be tensor 0");
  std::vector<bool> produced(n, false);
  produced[0] = true;
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const Layer& l = g.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" +
                              op_name(l.op) + ")";
    for (int in : l.inputs) {
      if (in < 0 || in >= n || !produced[in]) {
        throw InvalidState(where + " consumes tensor " + std::to_string(in) +
                           " before it is produced");
      }
    }
    if (l.output < 0 || l.output >= n || produced[l.output]) {
      throw InvalidState(where + " has an invalid output id");
    }
    produced[l.output] = true;
    const std::size_t arity = l.op == OpCode::ResidualAdd ? 2 : 1;
    if (l.inputs.size() != arity) throw InvalidState(where + " has wrong arity");
    if (l.stride != 1 && l.stride != 2) throw InvalidState(where + " stride");
    if (has_weights(l.op) && l.weights.empty()) {
      throw InvalidState(where + " is missing weights");
    }
    const Shape& in_shape = g.tensors[l.inputs[0]].shape;
    switch (l.op) {
      case OpCode::Conv2D:
        if (l.weights.rank() != 4 || l.weights.dim(3) != in_shape.at(3)) {
          throw ShapeError(where + " weights inconsistent with input channels");
        }
        break;
      case OpCode::DepthwiseConv2D:
        if (l.weights.rank() != 4 || l.weights.dim(0) != 1 ||
            l.weights.dim(3) != in_shape.at(3)) {
          throw ShapeError(where + " needs one filter per input channel");
        }
        break;
      case OpCode::ResidualAdd:
        if (l.stride != 1 ||
            g.tensors[l.inputs[0]].shape != g.tensors[l.inputs[1]].shape) {
          throw ShapeError(where + " needs stride 1 and matching shapes");
        }
        break;
      default:
        break;
    }
  }
  if (g.output_id < 0 || g.output_id >= n || !produced[g.output_id]) {
    throw InvalidState("graph output is never produced");
  }
}

class GraphBuilder {
 public:
  explicit GraphBuilder(Shape input_shape) {
    graph_.tensors.push_back({std::move(input_shape), DType::Real32, {}});
  }

  int input() const { return 0; }
  const Shape& shape(int id) const { return graph_.tensors.at(id).shape; }
  int last() const { return static_cast<int>(graph_.tensors.size()) - 1; }

  int conv2d(int in, int out_channels, int kernel, int stride,
             Padding padding = Padding::Same) {
    const Shape& s = shape(in);
    const auto rows = detail::output_window(s[1], kernel, stride, padding);
    const auto cols = detail::output_window(s[2], kernel, stride, padding);
    Layer l;
    l.op = OpCode::Conv2D;
    l.stride = stride;
    l.padding = padding;
    l.weights = Tensor::real({out_channels, kernel, kernel, s[3]});
    l.bias.assign(out_channels, 0.0f);
    return emit(std::move(l), in, {s[0], rows.out, cols.out, out_channels});
  }

  int depthwise_conv2d(int in, int kernel, int stride,
                       Padding padding = Padding::Same) {
    const Shape& s = shape(in);
    const auto rows = detail::output_window(s[1], kernel, stride, padding);
    const auto cols = detail::output_window(s[2], kernel, stride, padding);
    Layer l;
    l.op = OpCode::DepthwiseConv2D;
    l.stride = stride;
    l.padding = padding;
    l.weights = Tensor::real({1, kernel, kernel, s[3]});
    l.bias.assign(s[3], 0.0f);
    return emit(std::move(l), in, {s[0], rows.out, cols.out, s[3]});
  }

  int relu6(int in) {
    Layer l;
    l.op = OpCode::ReLU6;
    return emit(std::move(l), in, shape(in));
  }

  int global_avg_pool(int in) {
    const Shape& s = shape(in);
    Layer l;
    l.op = OpCode::GlobalAvgPool;
    return emit(std::move(l), in, {s[0], 1, 1, s[3]});
  }

  int fully_connected(int in, int out_features) {
    const Shape& s = shape(in);
    const int batch = s[0];
    const int features = static_cast<int>(element_count(s) / batch);
    Layer l;
    l.op = OpCode::FullyConnected;
    l.weights = Tensor::real({out_features, features});
    l.bias.assign(out_features, 0.0f);
    return emit(std::move(l), in, {batch, out_features});
  }

  int softmax(int in) {
    Layer l;
    l.op = OpCode::Softmax;
    return emit(std::move(l), in, shape(in));
  }

  int residual_add(int a, int b) {
    if (shape(a) != shape(b)) {
      throw ShapeError("residual add shapes differ: " + shape_string(shape(a)) +
                       " vs " + shape_string(shape(b)));
    }
    Layer l;
    l.op = OpCode::ResidualAdd;
    l.inputs = {a, b};
    l.output = add_tensor(shape(a));
    graph_.layers.push_back(std::move(l));
    return graph_.layers.back().output;
  }

  // Finalizes the graph with the most recent tensor as output.
  ModelGraph finish() {
    ModelGraph g = graph_;
    g.output_id = last();
    const Shape& in = g.tensors[0].shape;
    g.input_resolution = in.size() > 1 ? in[1] : 0;
    g.classes = g.tensors[g.output_id].shape.back();
    validate(g);
    return g;
  }

 private:
  int add_tensor(Shape s) {
    graph_.tensors.push_back({std::move(s), DType::Real32, {}});
    return last();
  }

  int emit(Layer l, int in, Shape out_shape) {
    if (in < 0 || in > last()) throw InvalidState("unknown tensor id");
    l.inputs = {in};
    l.output = add_tensor(std::move(out_shape));
    graph_.layers.push_back(std::move(l));
    return graph_.layers.back().output;
  }

  ModelGraph graph_;
};

enum class WeightInit {
  // Uniform in +/- sqrt(6 / fan_in) ahead of ReLU6, +/- sqrt(3 / fan_in) for
  // linear outputs. Keeps activation variance roughly constant with depth.
  FanInScaled,
  // Uniform in [-0.1, 0.1] regardless of layer size.
  FixedUniform,
  Zero,
};

inline std::size_t fan_in(const Layer& l) {
  switch (l.op) {
    case OpCode::Conv2D:
      return static_cast<std::size_t>(l.weights.dim(1)) * l.weights.dim(2) *
             l.weights.dim(3);
    case OpCode::DepthwiseConv2D:
      return static_cast<std::size_t>(l.weights.dim(1)) * l.weights.dim(2);
    case OpCode::FullyConnected:
      return static_cast<std::size_t>(l.weights.dim(1));
    default:
      return 0;
  }
}

// Fills every weight tensor of a Real32 graph from the seeded generator.
// Biases are zeroed.
inline void initialize_weights(ModelGraph& g, std::uint64_t seed,
                               WeightInit init = WeightInit::FanInScaled) {
  if (g.dtype != DType::Real32) {
    throw InvalidState("only Real32 graphs can be initialized");
  }
  std::vector<bool> feeds_relu(g.tensors.size(), false);
  for (const auto& l : g.layers) {
    if (l.op == OpCode::ReLU6) feeds_relu[l.inputs[0]] = true;
  }
  Rng rng(seed);
  for (auto& l : g.layers) {
    if (!has_weights(l.op)) continue;
    double bound = 0.0;
    if (init == WeightInit::FixedUniform) {
      bound = 0.1;
    } else if (init == WeightInit::FanInScaled) {
      const double gain = feeds_relu[l.output] ? 6.0 : 3.0;
      bound = std::sqrt(gain / static_cast<double>(fan_in(l)));
    }
    for (float& w : l.weights.real_data()) {
      w = init == WeightInit::Zero ? 0.0f
                                   : static_cast<float>(rng.uniform(-bound, bound));
    }
    std::fill(l.bias.begin(), l.bias.end(), 0.0f);
  }
  g.weights_initialized = true;
}

// Called with every activation tensor as it is produced, input included.
using TensorObserver = std::function<void(int id, const Tensor&)>;

namespace detail {

inline Tensor run_layer(const ModelGraph& g, const Layer& l,
                        const std::vector<Tensor>& acts) {
  const Tensor& in = acts[l.inputs[0]];
  const Conv2DOptions opt{l.stride, l.padding};
  if (g.dtype == DType::Real32) {
    switch (l.op) {
      case OpCode::Conv2D: return conv2d(in, l.weights, l.bias, opt);
      case OpCode::DepthwiseConv2D:
        return depthwise_conv2d(in, l.weights, l.bias, opt);
      case OpCode::ReLU6: return relu6(in);
      case OpCode::GlobalAvgPool: return global_avg_pool(in);
      case OpCode::FullyConnected: return fully_connected(in, l.weights, l.bias);
      case OpCode::Softmax: return softmax(in);
      case OpCode::ResidualAdd: return residual_add(in, acts[l.inputs[1]]);
    }
  } else {
    const TensorInfo& out = g.tensors[l.output];
    auto out_qp = [&]() -> const QuantParams& {
      if (!out.qparams) {
        throw QuantizationError("tensor " + std::to_string(l.output) +
                                " has no quantization parameters");
      }
      return *out.qparams;
    };
    switch (l.op) {
      case OpCode::Conv2D: return conv2d(in, l.weights, l.qbias, opt, out_qp());
      case OpCode::DepthwiseConv2D:
        return depthwise_conv2d(in, l.weights, l.qbias, opt, out_qp());
      case OpCode::ReLU6: return relu6(in, out_qp());
      case OpCode::GlobalAvgPool: return global_avg_pool(in, out_qp());
      case OpCode::FullyConnected:
        return fully_connected(in, l.weights, l.qbias, out_qp());
      case OpCode::Softmax: return softmax(in);
      case OpCode::ResidualAdd:
        return residual_add(in, acts[l.inputs[1]], out_qp());
    }
  }
  throw InvalidState("unknown op code");
}

// Step index of the last layer reading each tensor; -1 if never read.
inline std::vector<int> last_use(const ModelGraph& g) {
  std::vector<int> last(g.tensors.size(), -1);
  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i) {
    for (int in : g.layers[i].inputs) last[in] = i;
  }
  return last;
}

}  // namespace detail

// Runs the graph on one input and returns the output tensor. Real32 inputs
// to an Int8 graph are quantized with the input tensor's parameters.
inline Tensor execute(const ModelGraph& g, const Tensor& input,
                      const TensorObserver& observer = {}) {
  if (!g.weights_initialized) throw InvalidState("model weights not loaded");
  const TensorInfo& in_info = g.tensors.at(g.input_id);
  if (input.shape() != in_info.shape) {
    throw ShapeError("input shape " + shape_string(input.shape()) +
                     " does not match model input " +
                     shape_string(in_info.shape));
  }
  std::vector<Tensor> acts(g.tensors.size());
  if (g.dtype == DType::Int8 && input.dtype() == DType::Real32) {
    if (!in_info.qparams) throw QuantizationError("input has no qparams");
    acts[g.input_id] = quantize(input, *in_info.qparams);
  } else {
    acts[g.input_id] = input;
  }
  if (observer) observer(g.input_id, acts[g.input_id]);
  const auto last = detail::last_use(g);
  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i) {
    const Layer& l = g.layers[i];
    acts[l.output] = detail::run_layer(g, l, acts);
    if (observer) observer(l.output, acts[l.output]);
    for (int in : l.inputs) {
      if (last[in] == i && in != g.output_id) acts[in] = Tensor();
    }
  }
  return std::move(acts[g.output_id]);
}

// Class probabilities for a single image.
inline std::vector<float> run_inference(const ModelGraph& g,
                                        const Tensor& image) {
  const Tensor out = execute(g, image);
  const Tensor probs = out.dtype() == DType::Real32 ? out : dequantize(out);
  const auto p = probs.real_data();
  return {p.begin(), p.end()};
}

inline int argmax(std::span<const float> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Plain-text listing, one layer per line.
inline std::string dump_graph(const ModelGraph& g) {
  std::ostringstream os;
  os << "graph dtype=" << to_string(g.dtype) << " input=t" << g.input_id << ':'
     << shape_string(g.tensors[g.input_id].shape) << " output=t" << g.output_id
     << " layers=" << g.layers.size() << '\n';
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const Layer& l = g.layers[i];
    os << i << ' ' << op_name(l.op) << " in=";
    for (std::size_t k = 0; k < l.inputs.size(); ++k) {
      if (k) os << ',';
      os << 't' << l.inputs[k] << ':' << shape_string(g.tensors[l.inputs[k]].shape);
    }
    os << " out=t" << l.output << ':' << shape_string(g.tensors[l.output].shape);
    if (has_weights(l.op)) {
      os << " w=" << shape_string(l.weights.shape());
    }
    if (l.op == OpCode::Conv2D || l.op == OpCode::DepthwiseConv2D) {
      os << " stride=" << l.stride
         << " pad=" << (l.padding == Padding::Same ? "same" : "valid");
    }
    os << '\n';
  }
  return os.str();
}

// FNV-1a over everything structural: ops, wiring, strides and shapes.
inline std::uint64_t topology_hash(const ModelGraph& g) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>(v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<std::int64_t>(g.tensors.size()));
  for (const auto& t : g.tensors) {
    mix(static_cast<std::int64_t>(t.shape.size()));
    for (int d : t.shape) mix(d);
  }
  for (const auto& l : g.layers) {
    mix(static_cast<int>(l.op));
    mix(l.stride);
    mix(static_cast<int>(l.padding));
    for (int in : l.inputs) mix(in);
    mix(l.output);
    for (int d : l.weights.shape()) mix(d);
  }
  return h;
}

}  // namespace tinyedge::nn
