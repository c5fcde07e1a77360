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

// Head-only training: the backbone is a frozen feature extractor and only the
// final fully connected layer is fitted, by minibatch gradient descent on
// softmax cross-entropy.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/nn/graph.hpp"
#include "tinyedge/parallel.hpp"
#include "tinyedge/rng.hpp"

namespace tinyedge::nn {

struct LabeledImage {
  Tensor image;
  int label = 0;
};

using FeatureMatrix = std::vector<std::vector<double>>;

// Linear softmax classifier parameters, row-major classes x features.
struct HeadParams {
  int classes = 0;
  int features = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

struct HeadGradient {
  double loss = 0.0;
  std::vector<double> weights;
  std::vector<double> bias;
};

namespace detail {

inline void head_logits(const HeadParams& p, std::span<const double> x,
                        std::vector<double>& z) {
  z.assign(p.classes, 0.0);
  for (int c = 0; c < p.classes; ++c) {
    const double* w = &p.weights[static_cast<std::size_t>(c) * p.features];
    double acc = p.bias[c];
    for (int f = 0; f < p.features; ++f) acc += w[f] * x[f];
    z[c] = acc;
  }
}

// In-place log-softmax; returns nothing, z holds log-probabilities.
inline void log_softmax(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : z) v -= lse;
}

inline void check_batch(const HeadParams& p, const FeatureMatrix& x,
                        std::span<const int> labels) {
  if (x.empty()) throw InvalidArgument("empty batch");
  if (x.size() != labels.size()) throw InvalidArgument("label count mismatch");
  for (const auto& row : x) {
    if (row.size() != static_cast<std::size_t>(p.features)) {
      throw ShapeError("feature vector length mismatch");
    }
  }
  for (int y : labels) {
    if (y < 0 || y >= p.classes) throw InvalidArgument("label out of range");
  }
}

}  // namespace detail

// Mean cross-entropy over the batch.
inline double head_loss(const HeadParams& p, const FeatureMatrix& x,
                        std::span<const int> labels) {
  detail::check_batch(p, x, labels);
  std::vector<double> z;
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::head_logits(p, x[i], z);
    detail::log_softmax(z);
    loss -= z[labels[i]];
  }
  return loss / static_cast<double>(x.size());
}

// Mean cross-entropy and its analytic gradient: dL/dz = softmax(z) - onehot.
inline HeadGradient head_gradient(const HeadParams& p, const FeatureMatrix& x,
                                  std::span<const int> labels) {
  detail::check_batch(p, x, labels);
  HeadGradient g;
  g.weights.assign(p.weights.size(), 0.0);
  g.bias.assign(p.classes, 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  std::vector<double> z;
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::head_logits(p, x[i], z);
    detail::log_softmax(z);
    g.loss -= z[labels[i]] * inv_n;
    for (int c = 0; c < p.classes; ++c) {
      const double dz = (std::exp(z[c]) - (c == labels[i] ? 1.0 : 0.0)) * inv_n;
      g.bias[c] += dz;
      double* gw = &g.weights[static_cast<std::size_t>(c) * p.features];
      for (int f = 0; f < p.features; ++f) gw[f] += dz * x[i][f];
    }
  }
  return g;
}

inline HeadParams head_params(const ModelGraph& g) {
  const Layer& head = g.layers.at(g.head_layer());
  if (g.dtype != DType::Real32) throw InvalidState("head must be Real32");
  HeadParams p;
  p.classes = head.weights.dim(0);
  p.features = head.weights.dim(1);
  const auto w = head.weights.real_data();
  p.weights.assign(w.begin(), w.end());
  p.bias.assign(head.bias.begin(), head.bias.end());
  return p;
}

inline void set_head_params(ModelGraph& g, const HeadParams& p) {
  Layer& head = g.layers.at(g.head_layer());
  auto w = head.weights.real_data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(p.weights[i]);
  for (std::size_t i = 0; i < head.bias.size(); ++i) {
    head.bias[i] = static_cast<float>(p.bias[i]);
  }
}

// Activations feeding the head layer, one row per image.
inline FeatureMatrix extract_features(const ModelGraph& g,
                                      std::span<const LabeledImage> data) {
  const int feature_id = g.layers.at(g.head_layer()).inputs[0];
  FeatureMatrix out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    execute(g, data[i].image, [&](int id, const Tensor& t) {
      if (id != feature_id) return;
      const Tensor real = t.dtype() == DType::Real32 ? t : dequantize(t);
      const auto v = real.real_data();
      out[i].assign(v.begin(), v.end());
    });
  });
  return out;
}

inline double head_accuracy(const HeadParams& p, const FeatureMatrix& x,
                            std::span<const int> labels) {
  std::vector<double> z;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::head_logits(p, x[i], z);
    const int pred =
        static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (pred == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.size());
}

struct TrainOptions {
  double learning_rate = 0.1;
  int epochs = 50;
  std::uint64_t seed = 0;
  int batch_size = 32;
};

struct TrainResult {
  ModelGraph model;
  double train_accuracy = 0.0;
  std::vector<double> epoch_loss;
};

// Fits the head on precomputed features. Features are centered and rescaled
// for the optimization and the affine map is folded back into the layer
// afterwards, so the stored model consumes raw features.
inline TrainResult train_head_on_features(const ModelGraph& model,
                                          const FeatureMatrix& features,
                                          std::span<const int> labels,
                                          const TrainOptions& opt) {
  if (features.empty()) throw InvalidArgument("training set is empty");
  if (!(opt.learning_rate >= 0.0) || !std::isfinite(opt.learning_rate)) {
    throw InvalidArgument("learning rate must be non-negative");
  }
  if (opt.epochs < 0 || opt.batch_size < 1) {
    throw InvalidArgument("epochs and batch size must be positive");
  }
  const HeadParams initial = head_params(model);
  detail::check_batch(initial, features, labels);
  const int nf = initial.features;
  const std::size_t n = features.size();

  // Per-feature centering with one shared scale. A per-feature scale would
  // blow up weights on near-constant features once folded back, and a single
  // large weight ruins the per-tensor Int8 scale of the head.
  std::vector<double> mean(nf, 0.0);
  for (const auto& row : features) {
    for (int f = 0; f < nf; ++f) mean[f] += row[f];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& row : features) {
    for (int f = 0; f < nf; ++f) var += (row[f] - mean[f]) * (row[f] - mean[f]);
  }
  const double rms = std::sqrt(var / (static_cast<double>(n) * nf));
  const std::vector<double> stdev(nf, rms > 1e-12 ? rms : 1.0);

  FeatureMatrix z(n, std::vector<double>(nf));
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < nf; ++f) z[i][f] = (features[i][f] - mean[f]) / stdev[f];
  }

  // Same classifier expressed over standardized features.
  HeadParams p = initial;
  for (int c = 0; c < p.classes; ++c) {
    double shift = 0.0;
    for (int f = 0; f < nf; ++f) {
      double& w = p.weights[static_cast<std::size_t>(c) * nf + f];
      shift += w * mean[f];
      w *= stdev[f];
    }
    p.bias[c] += shift;
  }

  TrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(opt.seed);
  FeatureMatrix batch;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss = 0.0;
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t end = std::min(n, start + opt.batch_size);
      batch.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(z[order[k]]);
        batch_labels.push_back(labels[order[k]]);
      }
      const HeadGradient g = head_gradient(p, batch, batch_labels);
      loss += g.loss * static_cast<double>(end - start);
      for (std::size_t k = 0; k < p.weights.size(); ++k) {
        p.weights[k] -= opt.learning_rate * g.weights[k];
      }
      for (int c = 0; c < p.classes; ++c) p.bias[c] -= opt.learning_rate * g.bias[c];
    }
    result.epoch_loss.push_back(loss / static_cast<double>(n));
  }
  result.train_accuracy = head_accuracy(p, z, labels);

  result.model = model;
  if (opt.learning_rate > 0.0 && opt.epochs > 0) {
    HeadParams folded = p;
    for (int c = 0; c < p.classes; ++c) {
      double shift = 0.0;
      for (int f = 0; f < nf; ++f) {
        double& w = folded.weights[static_cast<std::size_t>(c) * nf + f];
        w /= stdev[f];
        shift += w * mean[f];
      }
      folded.bias[c] -= shift;
    }
    set_head_params(result.model, folded);
  }
  return result;
}

inline TrainResult train_head(const ModelGraph& model,
                              std::span<const LabeledImage> data,
                              const TrainOptions& opt) {
  if (data.empty()) throw InvalidArgument("training set is empty");
  if (model.dtype != DType::Real32) throw InvalidState("head training needs Real32");
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& d : data) labels.push_back(d.label);
  return train_head_on_features(model, extract_features(model, data), labels, opt);
}

}  // namespace tinyedge::nn
