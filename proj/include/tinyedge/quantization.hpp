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
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/tensor.hpp"

namespace tinyedge {

enum class QuantScheme { Symmetric, Asymmetric };

inline constexpr std::int32_t kInt8Min = -128;
inline constexpr std::int32_t kInt8Max = 127;

// Smallest range width handed to compute_quant_params by nudge_range.
inline constexpr double kMinRangeWidth = 1e-6;

// Round to nearest, ties to even. Independent of the floating-point
// environment's rounding mode.
inline double round_half_even(double x) {
  const double lower = std::floor(x);
  const double diff = x - lower;
  if (diff > 0.5) return lower + 1.0;
  if (diff < 0.5) return lower;
  return std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
}

inline std::int32_t saturate_int8(double v) {
  if (v <= kInt8Min) return kInt8Min;
  if (v >= kInt8Max) return kInt8Max;
  return static_cast<std::int32_t>(v);
}

inline QuantParams compute_quant_params(double min, double max,
                                        QuantScheme scheme) {
  if (!std::isfinite(min) || !std::isfinite(max)) {
    throw QuantizationError("range bounds must be finite");
  }
  if (min > max) throw QuantizationError("range min exceeds max");
  if (min == 0.0 && max == 0.0) {
    throw QuantizationError("degenerate range [0, 0]");
  }
  if (scheme == QuantScheme::Symmetric) {
    const double bound = std::max(std::fabs(min), std::fabs(max));
    return QuantParams{bound / 127.0, 0};
  }
  const double lo = std::min(min, 0.0);
  const double hi = std::max(max, 0.0);
  const double scale = (hi - lo) / 255.0;
  const double zp = round_half_even(-128.0 - lo / scale);
  return QuantParams{scale, std::clamp(static_cast<std::int32_t>(zp),
                                       kInt8Min, kInt8Max)};
}

// Widens a calibrated range so that it contains zero and is at least
// kMinRangeWidth wide.
inline std::pair<double, double> nudge_range(double min, double max) {
  double lo = std::min(min, 0.0);
  double hi = std::max(max, 0.0);
  if (hi - lo < kMinRangeWidth) hi = lo + kMinRangeWidth;
  return {lo, hi};
}

inline std::int8_t quantize_value(double x, const QuantParams& qp) {
  const double q = round_half_even(x / qp.scale) + qp.zero_point;
  return static_cast<std::int8_t>(saturate_int8(q));
}

inline float dequantize_value(std::int32_t q, const QuantParams& qp) {
  return static_cast<float>(qp.scale * static_cast<double>(q - qp.zero_point));
}

inline Tensor quantize(const Tensor& t, const QuantParams& qp) {
  if (!(qp.scale > 0.0)) throw QuantizationError("scale must be positive");
  const auto src = t.real_data();
  std::vector<std::int8_t> out(src.size());
  std::transform(src.begin(), src.end(), out.begin(),
                 [&qp](float x) { return quantize_value(x, qp); });
  return Tensor::quantized(t.shape(), std::move(out), qp);
}

inline Tensor dequantize(const Tensor& t) {
  if (!t.qparams()) {
    throw QuantizationError("dequantize requires quantization parameters");
  }
  const QuantParams qp = *t.qparams();
  const auto src = t.int8_data();
  std::vector<float> out(src.size());
  std::transform(src.begin(), src.end(), out.begin(),
                 [&qp](std::int8_t q) { return dequantize_value(q, qp); });
  return Tensor::real(t.shape(), std::move(out));
}

}  // namespace tinyedge
