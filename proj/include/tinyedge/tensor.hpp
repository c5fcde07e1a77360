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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tinyedge/error.hpp"

namespace tinyedge {

enum class DType : std::uint8_t { Real32 = 0, Int8 = 1 };

inline const char* to_string(DType d) {
  return d == DType::Real32 ? "real32" : "int8";
}

inline std::size_t element_bytes(DType d) { return d == DType::Real32 ? 4 : 1; }

// Affine mapping between reals and int8: real = scale * (q - zero_point).
struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

// Extents in NHWC order for activations and OHWI for convolution weights.
using Shape = std::vector<int>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, int d) {
                           return acc * static_cast<std::size_t>(d);
                         });
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

// Dense tensor holding either Real32 or Int8 elements. Int8 tensors always
// carry quantization parameters.
class Tensor {
 public:
  Tensor() = default;

  static Tensor real(Shape shape, std::vector<float> data = {}) {
    const std::size_t n = element_count(shape);
    if (data.empty()) data.assign(n, 0.0f);
    if (data.size() != n) {
      throw ShapeError("tensor data has " + std::to_string(data.size()) +
                       " elements, shape " + shape_string(shape) +
                       " requires " + std::to_string(n));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = DType::Real32;
    t.real_ = std::move(data);
    return t;
  }

  static Tensor quantized(Shape shape, std::vector<std::int8_t> data,
                          QuantParams qparams) {
    const std::size_t n = element_count(shape);
    if (data.empty()) data.assign(n, static_cast<std::int8_t>(0));
    if (data.size() != n) {
      throw ShapeError("tensor data has " + std::to_string(data.size()) +
                       " elements, shape " + shape_string(shape) +
                       " requires " + std::to_string(n));
    }
    if (!(qparams.scale > 0.0)) {
      throw QuantizationError("quantized tensor requires a positive scale");
    }
    if (qparams.zero_point < -128 || qparams.zero_point > 127) {
      throw QuantizationError("zero point outside [-128, 127]");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = DType::Int8;
    t.int8_ = std::move(data);
    t.qparams_ = qparams;
    return t;
  }

  // Int8 tensor filled with the zero point, i.e. real value 0.
  static Tensor quantized_zeros(Shape shape, QuantParams qparams) {
    std::vector<std::int8_t> data(element_count(shape),
                                  static_cast<std::int8_t>(qparams.zero_point));
    return quantized(std::move(shape), std::move(data), qparams);
  }

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept {
    return dtype_ == DType::Real32 ? real_.size() : int8_.size();
  }
  bool empty() const noexcept { return shape_.empty(); }
  std::size_t byte_size() const noexcept {
    return size() * element_bytes(dtype_);
  }

  const std::optional<QuantParams>& qparams() const noexcept {
    return qparams_;
  }

  std::span<const float> real_data() const {
    expect(DType::Real32);
    return real_;
  }
  std::span<float> real_data() {
    expect(DType::Real32);
    return real_;
  }
  std::span<const std::int8_t> int8_data() const {
    expect(DType::Int8);
    return int8_;
  }
  std::span<std::int8_t> int8_data() {
    expect(DType::Int8);
    return int8_;
  }

  // Same elements, new extents.
  Tensor reshaped(Shape shape) const {
    if (element_count(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(shape));
    }
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void expect(DType d) const {
    if (dtype_ != d) {
      throw InvalidArgument(std::string("tensor is ") + to_string(dtype_) +
                            ", expected " + to_string(d));
    }
  }

  Shape shape_;
  DType dtype_ = DType::Real32;
  std::vector<float> real_;
  std::vector<std::int8_t> int8_;
  std::optional<QuantParams> qparams_;
};

}  // namespace tinyedge
