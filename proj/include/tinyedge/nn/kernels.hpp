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

// Reference layer kernels. Every op has a Real32 overload and an Int8
// overload; the Int8 overloads accumulate in int32 and requantize to the
// caller-supplied output parameters.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/quantization.hpp"
#include "tinyedge/tensor.hpp"

namespace tinyedge::nn {

enum class Padding : std::uint8_t { Same = 0, Valid = 1 };

struct Conv2DOptions {
  int stride = 1;
  Padding padding = Padding::Same;
};

namespace detail {

// Round-half-even via the 2^52 + 2^51 trick; exact for |x| < 2^51 under the
// default round-to-nearest mode, which the library never changes.
inline double fast_round(double x) {
  constexpr double kMagic = 6755399441055744.0;
  if (std::fabs(x) >= 2251799813685248.0) return x;
  return (x + kMagic) - kMagic;
}

inline std::int8_t requantize(double value, std::int32_t zero_point) {
  return static_cast<std::int8_t>(saturate_int8(fast_round(value) + zero_point));
}

struct Window {
  int out = 0;
  int pad_before = 0;
};

inline Window output_window(int in, int kernel, int stride, Padding padding) {
  if (stride < 1) throw InvalidArgument("stride must be positive");
  if (padding == Padding::Same) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    return {out, total / 2};
  }
  if (in < kernel) {
    throw ShapeError("valid padding needs input extent >= kernel extent");
  }
  return {(in - kernel) / stride + 1, 0};
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " +
                     std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

inline const QuantParams& require_qparams(const Tensor& t, const char* what) {
  if (t.dtype() != DType::Int8 || !t.qparams()) {
    throw QuantizationError(std::string(what) +
                            " must be an Int8 tensor with qparams");
  }
  return *t.qparams();
}

struct ConvGeometry {
  int batch, in_h, in_w, in_c;
  int kernel_h, kernel_w, out_c;
  Window rows, cols;
};

inline ConvGeometry conv_geometry(const Tensor& input, const Tensor& weights,
                                  const Conv2DOptions& opt, bool depthwise) {
  require_rank(input, 4, "conv input");
  require_rank(weights, 4, "conv weights");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_h = input.dim(1);
  g.in_w = input.dim(2);
  g.in_c = input.dim(3);
  g.kernel_h = weights.dim(1);
  g.kernel_w = weights.dim(2);
  if (depthwise) {
    if (weights.dim(0) != 1 || weights.dim(3) != g.in_c) {
      throw ShapeError("depthwise weights " + shape_string(weights.shape()) +
                       " do not match " + std::to_string(g.in_c) +
                       " input channels");
    }
    g.out_c = g.in_c;
  } else {
    if (weights.dim(3) != g.in_c) {
      throw ShapeError("conv weights " + shape_string(weights.shape()) +
                       " do not match " + std::to_string(g.in_c) +
                       " input channels");
    }
    g.out_c = weights.dim(0);
  }
  g.rows = output_window(g.in_h, g.kernel_h, opt.stride, opt.padding);
  g.cols = output_window(g.in_w, g.kernel_w, opt.stride, opt.padding);
  return g;
}

template <typename T>
void check_bias(std::span<const T> bias, int channels) {
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(channels)) {
    throw ShapeError("bias has " + std::to_string(bias.size()) +
                     " entries, expected " + std::to_string(channels));
  }
}

// OHWI -> HWIO so that the innermost loop runs over output channels.
template <typename T, typename U>
std::vector<U> transpose_ohwi(std::span<const T> w, int o, int hwi) {
  std::vector<U> out(w.size());
  for (int oc = 0; oc < o; ++oc) {
    for (int k = 0; k < hwi; ++k) {
      out[static_cast<std::size_t>(k) * o + oc] =
          static_cast<U>(w[static_cast<std::size_t>(oc) * hwi + k]);
    }
  }
  return out;
}

}  // namespace detail

// Converts real biases to int32 at scale input_scale * weight_scale.
inline std::vector<std::int32_t> quantize_bias(std::span<const float> bias,
                                               double input_scale,
                                               double weight_scale) {
  const double scale = input_scale * weight_scale;
  std::vector<std::int32_t> out(bias.size());
  for (std::size_t i = 0; i < bias.size(); ++i) {
    const double q = round_half_even(bias[i] / scale);
    out[i] = static_cast<std::int32_t>(
        std::clamp(q, -2147483648.0, 2147483647.0));
  }
  return out;
}

inline Tensor conv2d(const Tensor& input, const Tensor& weights,
                     std::span<const float> bias, Conv2DOptions opt = {}) {
  const auto g = detail::conv_geometry(input, weights, opt, false);
  detail::check_bias(bias, g.out_c);
  const auto x = input.real_data();
  const int hwi = g.kernel_h * g.kernel_w * g.in_c;
  const auto wt =
      detail::transpose_ohwi<float, float>(weights.real_data(), g.out_c, hwi);

  Tensor out = Tensor::real({g.batch, g.rows.out, g.cols.out, g.out_c});
  auto y = out.real_data();
  std::vector<float> acc(g.out_c);
  std::size_t yi = 0;
  for (int n = 0; n < g.batch; ++n) {
    for (int oy = 0; oy < g.rows.out; ++oy) {
      for (int ox = 0; ox < g.cols.out; ++ox) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int ky = 0; ky < g.kernel_h; ++ky) {
          const int iy = oy * opt.stride - g.rows.pad_before + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kernel_w; ++kx) {
            const int ix = ox * opt.stride - g.cols.pad_before + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const float* xp =
                &x[((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) *
                   g.in_c];
            const float* wp =
                &wt[static_cast<std::size_t>((ky * g.kernel_w + kx) * g.in_c) *
                    g.out_c];
            for (int ic = 0; ic < g.in_c; ++ic) {
              const float xv = xp[ic];
              const float* wrow = wp + static_cast<std::size_t>(ic) * g.out_c;
              for (int oc = 0; oc < g.out_c; ++oc) acc[oc] += xv * wrow[oc];
            }
          }
        }
        for (int oc = 0; oc < g.out_c; ++oc) {
          y[yi++] = bias.empty() ? acc[oc] : acc[oc] + bias[oc];
        }
      }
    }
  }
  return out;
}

inline Tensor conv2d(const Tensor& input, const Tensor& weights,
                     std::span<const std::int32_t> bias, Conv2DOptions opt,
                     const QuantParams& output_qparams) {
  const auto& in_qp = detail::require_qparams(input, "conv input");
  const auto& w_qp = detail::require_qparams(weights, "conv weights");
  const auto g = detail::conv_geometry(input, weights, opt, false);
  detail::check_bias(bias, g.out_c);
  const auto x = input.int8_data();
  const int hwi = g.kernel_h * g.kernel_w * g.in_c;
  // int16 weights let the compiler use widening 16-bit multiplies.
  const auto wt = detail::transpose_ohwi<std::int8_t, std::int16_t>(
      weights.int8_data(), g.out_c, hwi);
  const double multiplier = in_qp.scale * w_qp.scale / output_qparams.scale;
  const std::int32_t zp_in = in_qp.zero_point;

  Tensor out = Tensor::quantized_zeros({g.batch, g.rows.out, g.cols.out, g.out_c},
                                       output_qparams);
  auto y = out.int8_data();
  std::vector<std::int32_t> acc(g.out_c);
  std::size_t yi = 0;
  for (int n = 0; n < g.batch; ++n) {
    for (int oy = 0; oy < g.rows.out; ++oy) {
      for (int ox = 0; ox < g.cols.out; ++ox) {
        if (bias.empty()) {
          std::fill(acc.begin(), acc.end(), 0);
        } else {
          std::copy(bias.begin(), bias.end(), acc.begin());
        }
        for (int ky = 0; ky < g.kernel_h; ++ky) {
          const int iy = oy * opt.stride - g.rows.pad_before + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kernel_w; ++kx) {
            const int ix = ox * opt.stride - g.cols.pad_before + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const std::int8_t* xp =
                &x[((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) *
                   g.in_c];
            const std::int16_t* wp =
                &wt[static_cast<std::size_t>((ky * g.kernel_w + kx) * g.in_c) *
                    g.out_c];
            for (int ic = 0; ic < g.in_c; ++ic) {
              const auto xv = static_cast<std::int16_t>(xp[ic] - zp_in);
              if (xv == 0) continue;
              const std::int16_t* wrow =
                  wp + static_cast<std::size_t>(ic) * g.out_c;
              for (int oc = 0; oc < g.out_c; ++oc) acc[oc] += xv * wrow[oc];
            }
          }
        }
        for (int oc = 0; oc < g.out_c; ++oc) {
          y[yi++] = detail::requantize(acc[oc] * multiplier,
                                       output_qparams.zero_point);
        }
      }
    }
  }
  return out;
}

// Weights are laid out 1 x KH x KW x C (channel multiplier 1).
inline Tensor depthwise_conv2d(const Tensor& input, const Tensor& weights,
                               std::span<const float> bias,
                               Conv2DOptions opt = {}) {
  const auto g = detail::conv_geometry(input, weights, opt, true);
  detail::check_bias(bias, g.out_c);
  const auto x = input.real_data();
  const auto w = weights.real_data();
  const int c = g.in_c;

  Tensor out = Tensor::real({g.batch, g.rows.out, g.cols.out, c});
  auto y = out.real_data();
  std::vector<float> acc(c);
  std::size_t yi = 0;
  for (int n = 0; n < g.batch; ++n) {
    for (int oy = 0; oy < g.rows.out; ++oy) {
      for (int ox = 0; ox < g.cols.out; ++ox) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int ky = 0; ky < g.kernel_h; ++ky) {
          const int iy = oy * opt.stride - g.rows.pad_before + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kernel_w; ++kx) {
            const int ix = ox * opt.stride - g.cols.pad_before + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const float* xp =
                &x[((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) *
                   c];
            const float* wp =
                &w[static_cast<std::size_t>(ky * g.kernel_w + kx) * c];
            for (int ch = 0; ch < c; ++ch) acc[ch] += xp[ch] * wp[ch];
          }
        }
        for (int ch = 0; ch < c; ++ch) {
          y[yi++] = bias.empty() ? acc[ch] : acc[ch] + bias[ch];
        }
      }
    }
  }
  return out;
}

inline Tensor depthwise_conv2d(const Tensor& input, const Tensor& weights,
                               std::span<const std::int32_t> bias,
                               Conv2DOptions opt,
                               const QuantParams& output_qparams) {
  const auto& in_qp = detail::require_qparams(input, "depthwise input");
  const auto& w_qp = detail::require_qparams(weights, "depthwise weights");
  const auto g = detail::conv_geometry(input, weights, opt, true);
  detail::check_bias(bias, g.out_c);
  const auto x = input.int8_data();
  const auto w8 = weights.int8_data();
  const std::vector<std::int16_t> w(w8.begin(), w8.end());
  const int c = g.in_c;
  const double multiplier = in_qp.scale * w_qp.scale / output_qparams.scale;
  const std::int32_t zp_in = in_qp.zero_point;

  Tensor out = Tensor::quantized_zeros({g.batch, g.rows.out, g.cols.out, c},
                                       output_qparams);
  auto y = out.int8_data();
  std::vector<std::int32_t> acc(c);
  std::size_t yi = 0;
  for (int n = 0; n < g.batch; ++n) {
    for (int oy = 0; oy < g.rows.out; ++oy) {
      for (int ox = 0; ox < g.cols.out; ++ox) {
        if (bias.empty()) {
          std::fill(acc.begin(), acc.end(), 0);
        } else {
          std::copy(bias.begin(), bias.end(), acc.begin());
        }
        for (int ky = 0; ky < g.kernel_h; ++ky) {
          const int iy = oy * opt.stride - g.rows.pad_before + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kernel_w; ++kx) {
            const int ix = ox * opt.stride - g.cols.pad_before + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const std::int8_t* xp =
                &x[((static_cast<std::size_t>(n) * g.in_h + iy) * g.in_w + ix) *
                   c];
            const std::int16_t* wp =
                &w[static_cast<std::size_t>(ky * g.kernel_w + kx) * c];
            for (int ch = 0; ch < c; ++ch) {
              acc[ch] += static_cast<std::int16_t>(xp[ch] - zp_in) * wp[ch];
            }
          }
        }
        for (int ch = 0; ch < c; ++ch) {
          y[yi++] = detail::requantize(acc[ch] * multiplier,
                                       output_qparams.zero_point);
        }
      }
    }
  }
  return out;
}

inline Tensor relu6(const Tensor& input) {
  Tensor out = Tensor::real(input.shape());
  const auto x = input.real_data();
  auto y = out.real_data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::min(std::max(x[i], 0.0f), 6.0f);
  }
  return out;
}

inline Tensor relu6(const Tensor& input, const QuantParams& output_qparams) {
  const auto& in_qp = detail::require_qparams(input, "relu6 input");
  const double ratio = in_qp.scale / output_qparams.scale;
  const std::int32_t lo =
      std::clamp(output_qparams.zero_point, kInt8Min, kInt8Max);
  const std::int32_t hi = quantize_value(6.0, output_qparams);
  // Only 256 inputs exist, so the mapping is tabulated once.
  std::array<std::int8_t, 256> table{};
  for (int v = kInt8Min; v <= kInt8Max; ++v) {
    const std::int32_t q =
        detail::requantize((v - in_qp.zero_point) * ratio, output_qparams.zero_point);
    table[v - kInt8Min] = static_cast<std::int8_t>(std::clamp(q, lo, hi));
  }
  Tensor out = Tensor::quantized_zeros(input.shape(), output_qparams);
  const auto x = input.int8_data();
  auto y = out.int8_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = table[x[i] - kInt8Min];
  return out;
}

inline Tensor global_avg_pool(const Tensor& input) {
  detail::require_rank(input, 4, "pool input");
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2),
            c = input.dim(3);
  if (h < 1 || w < 1) throw ShapeError("pool input has empty spatial extent");
  const auto x = input.real_data();
  Tensor out = Tensor::real({n, 1, 1, c});
  auto y = out.real_data();
  std::vector<double> acc(c);
  for (int b = 0; b < n; ++b) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const float* base = &x[static_cast<std::size_t>(b) * h * w * c];
    for (int p = 0; p < h * w; ++p) {
      for (int ch = 0; ch < c; ++ch) acc[ch] += base[p * c + ch];
    }
    for (int ch = 0; ch < c; ++ch) {
      y[static_cast<std::size_t>(b) * c + ch] =
          static_cast<float>(acc[ch] / (h * w));
    }
  }
  return out;
}

inline Tensor global_avg_pool(const Tensor& input,
                              const QuantParams& output_qparams) {
  const auto& in_qp = detail::require_qparams(input, "pool input");
  detail::require_rank(input, 4, "pool input");
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2),
            c = input.dim(3);
  if (h < 1 || w < 1) throw ShapeError("pool input has empty spatial extent");
  const auto x = input.int8_data();
  Tensor out = Tensor::quantized_zeros({n, 1, 1, c}, output_qparams);
  auto y = out.int8_data();
  const double multiplier =
      in_qp.scale / (static_cast<double>(h * w) * output_qparams.scale);
  std::vector<std::int32_t> acc(c);
  for (int b = 0; b < n; ++b) {
    std::fill(acc.begin(), acc.end(), 0);
    const std::int8_t* base = &x[static_cast<std::size_t>(b) * h * w * c];
    for (int p = 0; p < h * w; ++p) {
      for (int ch = 0; ch < c; ++ch) acc[ch] += base[p * c + ch] - in_qp.zero_point;
    }
    for (int ch = 0; ch < c; ++ch) {
      y[static_cast<std::size_t>(b) * c + ch] =
          detail::requantize(acc[ch] * multiplier, output_qparams.zero_point);
    }
  }
  return out;
}

namespace detail {

struct FcGeometry {
  int batch, in_features, out_features;
};

inline FcGeometry fc_geometry(const Tensor& input, const Tensor& weights) {
  require_rank(weights, 2, "fully connected weights");
  if (input.rank() < 1) throw ShapeError("fully connected input is empty");
  FcGeometry g{input.dim(0), 0, weights.dim(0)};
  if (g.batch < 1) throw ShapeError("fully connected input has no batch");
  g.in_features = static_cast<int>(input.size() / g.batch);
  if (g.in_features != weights.dim(1)) {
    throw ShapeError("fully connected input has " +
                     std::to_string(g.in_features) + " features, weights " +
                     shape_string(weights.shape()));
  }
  return g;
}

}  // namespace detail

// Weights are laid out O x I. The input is flattened per batch entry.
inline Tensor fully_connected(const Tensor& input, const Tensor& weights,
                              std::span<const float> bias) {
  const auto g = detail::fc_geometry(input, weights);
  detail::check_bias(bias, g.out_features);
  const auto x = input.real_data();
  const auto w = weights.real_data();
  Tensor out = Tensor::real({g.batch, g.out_features});
  auto y = out.real_data();
  for (int b = 0; b < g.batch; ++b) {
    const float* xp = &x[static_cast<std::size_t>(b) * g.in_features];
    for (int o = 0; o < g.out_features; ++o) {
      const float* wp = &w[static_cast<std::size_t>(o) * g.in_features];
      float acc = 0.0f;
      for (int i = 0; i < g.in_features; ++i) acc += xp[i] * wp[i];
      y[static_cast<std::size_t>(b) * g.out_features + o] =
          bias.empty() ? acc : acc + bias[o];
    }
  }
  return out;
}

inline Tensor fully_connected(const Tensor& input, const Tensor& weights,
                              std::span<const std::int32_t> bias,
                              const QuantParams& output_qparams) {
  const auto& in_qp = detail::require_qparams(input, "fully connected input");
  const auto& w_qp = detail::require_qparams(weights, "fully connected weights");
  const auto g = detail::fc_geometry(input, weights);
  detail::check_bias(bias, g.out_features);
  const auto x = input.int8_data();
  const auto w = weights.int8_data();
  const double multiplier = in_qp.scale * w_qp.scale / output_qparams.scale;
  Tensor out = Tensor::quantized_zeros({g.batch, g.out_features}, output_qparams);
  auto y = out.int8_data();
  for (int b = 0; b < g.batch; ++b) {
    const std::int8_t* xp = &x[static_cast<std::size_t>(b) * g.in_features];
    for (int o = 0; o < g.out_features; ++o) {
      const std::int8_t* wp = &w[static_cast<std::size_t>(o) * g.in_features];
      std::int32_t acc = bias.empty() ? 0 : bias[o];
      for (int i = 0; i < g.in_features; ++i) {
        acc += (xp[i] - in_qp.zero_point) * static_cast<std::int32_t>(wp[i]);
      }
      y[static_cast<std::size_t>(b) * g.out_features + o] =
          detail::requantize(acc * multiplier, output_qparams.zero_point);
    }
  }
  return out;
}

// Softmax over the last axis. Int8 logits are dequantized first; the result
// is always Real32.
inline Tensor softmax(const Tensor& logits) {
  const Tensor real = logits.dtype() == DType::Int8 ? dequantize(logits) : logits;
  if (real.rank() < 1 || real.shape().back() < 1) {
    throw ShapeError("softmax needs at least one class");
  }
  const int classes = real.shape().back();
  const auto x = real.real_data();
  Tensor out = Tensor::real(real.shape());
  auto y = out.real_data();
  for (std::size_t base = 0; base < x.size(); base += classes) {
    double mx = x[base];
    for (int k = 1; k < classes; ++k) mx = std::max<double>(mx, x[base + k]);
    double sum = 0.0;
    std::vector<double> e(classes);
    for (int k = 0; k < classes; ++k) {
      e[k] = std::exp(static_cast<double>(x[base + k]) - mx);
      sum += e[k];
    }
    for (int k = 0; k < classes; ++k) {
      y[base + k] = static_cast<float>(e[k] / sum);
    }
  }
  return out;
}

inline Tensor residual_add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("residual add shapes differ: " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
  Tensor out = Tensor::real(a.shape());
  const auto x = a.real_data();
  const auto z = b.real_data();
  auto y = out.real_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + z[i];
  return out;
}

inline Tensor residual_add(const Tensor& a, const Tensor& b,
                           const QuantParams& output_qparams) {
  const auto& qa = detail::require_qparams(a, "residual input");
  const auto& qb = detail::require_qparams(b, "residual input");
  if (a.shape() != b.shape()) {
    throw ShapeError("residual add shapes differ: " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
  Tensor out = Tensor::quantized_zeros(a.shape(), output_qparams);
  const auto x = a.int8_data();
  const auto z = b.int8_data();
  auto y = out.int8_data();
  const double ra = qa.scale / output_qparams.scale;
  const double rb = qb.scale / output_qparams.scale;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = detail::requantize(
        (x[i] - qa.zero_point) * ra + (z[i] - qb.zero_point) * rb,
        output_qparams.zero_point);
  }
  return out;
}

}  // namespace tinyedge::nn
