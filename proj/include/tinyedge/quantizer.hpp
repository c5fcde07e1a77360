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

// Post-training quantization: min/max calibration, Real32 -> Int8 model
// conversion and classification evaluation.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/nn/graph.hpp"
#include "tinyedge/nn/kernels.hpp"
#include "tinyedge/nn/train.hpp"
#include "tinyedge/parallel.hpp"
#include "tinyedge/quantization.hpp"

namespace tinyedge::quant {

using nn::LabeledImage;
using nn::ModelGraph;

struct Range {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void include(double v) {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  void merge(const Range& o) {
    min = std::min(min, o.min);
    max = std::max(max, o.max);
  }
  bool valid() const { return min <= max; }
  friend bool operator==(const Range&, const Range&) = default;
};

// Observed real range per activation tensor id.
struct CalibrationProfile {
  std::map<int, Range> ranges;

  void merge(const CalibrationProfile& o) {
    for (const auto& [id, r] : o.ranges) ranges[id].merge(r);
  }
  friend bool operator==(const CalibrationProfile&,
                         const CalibrationProfile&) = default;
};

inline CalibrationProfile observe(const ModelGraph& model, const Tensor& image) {
  CalibrationProfile p;
  nn::execute(model, image, [&p](int id, const Tensor& t) {
    Range& r = p.ranges[id];
    for (float v : t.real_data()) r.include(v);
  });
  return p;
}

// Runs Real32 inference over the set and records running min/max of every
// activation. Frames may be processed in any order: merging is min/max.
inline CalibrationProfile calibrate(const ModelGraph& model,
                                   std::span<const Tensor> images) {
  if (model.dtype != DType::Real32) {
    throw InvalidState("calibration needs a Real32 model");
  }
  if (images.empty()) throw InvalidArgument("calibration set is empty");
  std::vector<CalibrationProfile> partial(images.size());
  parallel_for(images.size(),
               [&](std::size_t i) { partial[i] = observe(model, images[i]); });
  CalibrationProfile out;
  for (const auto& p : partial) out.merge(p);
  return out;
}

inline QuantParams activation_qparams(const Range& r) {
  const auto [lo, hi] = nudge_range(r.min, r.max);
  return compute_quant_params(lo, hi, QuantScheme::Asymmetric);
}

inline QuantParams weight_qparams(std::span<const float> w) {
  double bound = 0.0;
  for (float v : w) bound = std::max(bound, static_cast<double>(std::fabs(v)));
  if (bound < kMinRangeWidth) bound = kMinRangeWidth;
  return compute_quant_params(-bound, bound, QuantScheme::Symmetric);
}

// Symmetric per-tensor weights, asymmetric activations from the profile,
// int32 biases at s_in * s_w. The softmax output stays Real32.
inline ModelGraph quantize_model(const ModelGraph& model,
                                 const CalibrationProfile& profile) {
  if (model.dtype != DType::Real32) {
    throw InvalidState("quantize_model needs a Real32 model");
  }
  if (!model.weights_initialized) throw InvalidState("model weights not loaded");
  ModelGraph q = model;
  q.dtype = DType::Int8;

  std::vector<bool> real_output(q.tensors.size(), false);
  for (const auto& l : q.layers) {
    if (l.op == nn::OpCode::Softmax) real_output[l.output] = true;
  }
  for (std::size_t id = 0; id < q.tensors.size(); ++id) {
    auto& t = q.tensors[id];
    if (real_output[id]) {
      t.dtype = DType::Real32;
      t.qparams.reset();
      continue;
    }
    const auto it = profile.ranges.find(static_cast<int>(id));
    if (it == profile.ranges.end() || !it->second.valid()) {
      throw QuantizationError("calibration profile has no range for tensor " +
                              std::to_string(id));
    }
    t.dtype = DType::Int8;
    t.qparams = activation_qparams(it->second);
  }
  for (auto& l : q.layers) {
    if (!nn::has_weights(l.op)) continue;
    const QuantParams wq = weight_qparams(l.weights.real_data());
    const double in_scale = q.tensors[l.inputs[0]].qparams->scale;
    l.qbias = nn::quantize_bias(l.bias, in_scale, wq.scale);
    l.bias.clear();
    l.weights = quantize(l.weights, wq);
  }
  return q;
}

// Real32 graph whose weights are the dequantized Int8 weights and whose
// biases are the dequantized int32 biases.
inline ModelGraph dequantize_model(const ModelGraph& model) {
  if (model.dtype != DType::Int8) throw InvalidState("model is not Int8");
  ModelGraph r = model;
  r.dtype = DType::Real32;
  for (auto& t : r.tensors) {
    t.dtype = DType::Real32;
    t.qparams.reset();
  }
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    auto& l = r.layers[i];
    if (!nn::has_weights(l.op)) continue;
    const double s_in = model.tensors[l.inputs[0]].qparams->scale;
    const double s_w = l.weights.qparams()->scale;
    l.weights = dequantize(l.weights);
    l.bias.resize(l.qbias.size());
    for (std::size_t k = 0; k < l.qbias.size(); ++k) {
      l.bias[k] = static_cast<float>(s_in * s_w * l.qbias[k]);
    }
    l.qbias.clear();
  }
  return r;
}

enum class Label : int { Mask = 0, NoMask = 1 };

inline constexpr int kClassCount = 2;

inline const char* label_name(int label) {
  return label == 0 ? "mask" : "no_mask";
}

struct EvalResult {
  double accuracy = 0.0;
  // rows: truth {mask, no-mask}; cols: prediction.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::optional<double> agreement;
  std::vector<int> predictions;

  std::size_t total() const {
    return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
  }
  std::size_t tp() const { return confusion[0][0]; }
  std::size_t fn() const { return confusion[0][1]; }
  std::size_t fp() const { return confusion[1][0]; }
  std::size_t tn() const { return confusion[1][1]; }
};

inline std::vector<int> predict_all(const ModelGraph& model,
                                    std::span<const LabeledImage> data) {
  std::vector<int> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    out[i] = nn::argmax(nn::run_inference(model, data[i].image));
  });
  return out;
}

inline EvalResult evaluate(const ModelGraph& model,
                           std::span<const LabeledImage> data,
                           const ModelGraph* reference = nullptr) {
  if (data.empty()) throw InvalidArgument("test set is empty");
  for (const auto& d : data) {
    if (d.label != 0 && d.label != 1) {
      throw InvalidArgument("label outside {mask, no-mask}");
    }
  }
  EvalResult r;
  r.predictions = predict_all(model, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int truth = data[i].label;
    const int pred = std::clamp(r.predictions[i], 0, 1);
    ++r.confusion[truth][pred];
    if (pred == truth) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  if (reference) {
    const auto ref = reference == &model ? r.predictions : predict_all(*reference, data);
    std::size_t same = 0;
    for (std::size_t i = 0; i < data.size(); ++i) same += ref[i] == r.predictions[i];
    r.agreement = static_cast<double>(same) / static_cast<double>(data.size());
  }
  return r;
}

inline constexpr const char* kEvalCsvHeader =
    "model,dtype,accuracy,tp,fn,fp,tn,agreement";

inline std::string eval_csv_row(const std::string& model_name, DType dtype,
                                const EvalResult& r) {
  std::ostringstream os;
  os << model_name << ',' << to_string(dtype) << ',' << std::fixed
     << std::setprecision(4) << r.accuracy << ',' << r.tp() << ',' << r.fn()
     << ',' << r.fp() << ',' << r.tn() << ',';
  if (r.agreement) os << *r.agreement;
  return os.str();
}

}  // namespace tinyedge::quant
