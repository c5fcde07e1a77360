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

// "TWNG" model container.
//
// All integers little-endian.
//
//   header   magic "TWNG", u16 version, u8 dtype, u8 flags (bit 0: weights
//            initialized), u32 input_resolution, u32 classes, u32 input_id,
//            u32 output_id, u32 tensor_count, u32 layer_count, u64 blob_bytes
//   tensors  per tensor: u8 dtype, u8 rank, u32 dims[rank]
//   layers   per layer: u8 op, u8 stride, u8 padding, u8 input_count,
//            u32 inputs[input_count], u32 output, u8 weight_dtype,
//            u8 weight_rank, u32 weight_dims[weight_rank], u64 weight_offset,
//            u64 weight_bytes, u8 bias_kind (0 none, 1 f32, 2 i32),
//            u32 bias_count, u64 bias_offset
//   qparams  per tensor then per layer weight: u8 present, f64 scale,
//            i32 zero_point (scale and zero_point only when present)
//   blob     weight and bias payloads at the recorded offsets

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/nn/graph.hpp"

namespace tinyedge::nn {

inline constexpr char kModelMagic[4] = {'T', 'W', 'N', 'G'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

  void require(std::size_t n) const {
    if (remaining() < n) {
      throw ParseError(pos_, "truncated: need " + std::to_string(n) +
                                 " bytes, " + std::to_string(remaining()) +
                                 " left");
    }
  }

 private:
  std::uint64_t get(int n) {
    require(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void write_shape(ByteWriter& w, const Shape& s) {
  w.u8(static_cast<std::uint8_t>(s.size()));
  for (int d : s) w.u32(static_cast<std::uint32_t>(d));
}

inline Shape read_shape(ByteReader& r) {
  const std::size_t at = r.offset();
  const int rank = r.u8();
  if (rank > 8) throw ParseError(at, "rank " + std::to_string(rank) + " too large");
  Shape s(rank);
  for (int& d : s) {
    const std::size_t dim_at = r.offset();
    const std::uint32_t v = r.u32();
    if (v == 0 || v > (1u << 24)) throw ParseError(dim_at, "bad dimension");
    d = static_cast<int>(v);
  }
  return s;
}

inline void write_qparams(ByteWriter& w, const std::optional<QuantParams>& qp) {
  w.u8(qp ? 1 : 0);
  if (qp) {
    w.f64(qp->scale);
    w.i32(qp->zero_point);
  }
}

inline std::optional<QuantParams> read_qparams(ByteReader& r) {
  const std::size_t at = r.offset();
  const std::uint8_t present = r.u8();
  if (present > 1) throw ParseError(at, "bad qparams flag");
  if (!present) return std::nullopt;
  const std::size_t scale_at = r.offset();
  QuantParams qp;
  qp.scale = r.f64();
  qp.zero_point = r.i32();
  if (!(qp.scale > 0.0) || qp.zero_point < kInt8Min || qp.zero_point > kInt8Max) {
    throw ParseError(scale_at, "invalid quantization parameters");
  }
  return qp;
}

inline DType read_dtype(ByteReader& r) {
  const std::size_t at = r.offset();
  const std::uint8_t v = r.u8();
  if (v > 1) throw ParseError(at, "unknown dtype " + std::to_string(v));
  return static_cast<DType>(v);
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const ModelGraph& g) {
  validate(g);
  // Blob layout first, so offsets are known when the tables are written.
  detail::ByteWriter blob;
  struct Slots {
    std::uint64_t w_off = 0, w_bytes = 0, b_off = 0;
  };
  std::vector<Slots> slots(g.layers.size());
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const Layer& l = g.layers[i];
    slots[i].w_off = blob.size();
    if (!l.weights.empty()) {
      if (l.weights.dtype() == DType::Real32) {
        for (float v : l.weights.real_data()) blob.f32(v);
      } else {
        const auto d = l.weights.int8_data();
        blob.raw(d.data(), d.size());
      }
    }
    slots[i].w_bytes = blob.size() - slots[i].w_off;
    slots[i].b_off = blob.size();
    for (float v : l.bias) blob.f32(v);
    for (std::int32_t v : l.qbias) blob.i32(v);
  }

  detail::ByteWriter w;
  w.raw(kModelMagic, 4);
  w.u16(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(g.dtype));
  w.u8(g.weights_initialized ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(g.input_resolution));
  w.u32(static_cast<std::uint32_t>(g.classes));
  w.u32(static_cast<std::uint32_t>(g.input_id));
  w.u32(static_cast<std::uint32_t>(g.output_id));
  w.u32(static_cast<std::uint32_t>(g.tensors.size()));
  w.u32(static_cast<std::uint32_t>(g.layers.size()));
  w.u64(blob.size());
  for (const auto& t : g.tensors) {
    w.u8(static_cast<std::uint8_t>(t.dtype));
    detail::write_shape(w, t.shape);
  }
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const Layer& l = g.layers[i];
    w.u8(static_cast<std::uint8_t>(l.op));
    w.u8(static_cast<std::uint8_t>(l.stride));
    w.u8(static_cast<std::uint8_t>(l.padding));
    w.u8(static_cast<std::uint8_t>(l.inputs.size()));
    for (int in : l.inputs) w.u32(static_cast<std::uint32_t>(in));
    w.u32(static_cast<std::uint32_t>(l.output));
    w.u8(static_cast<std::uint8_t>(l.weights.dtype()));
    detail::write_shape(w, l.weights.shape());
    w.u64(slots[i].w_off);
    w.u64(slots[i].w_bytes);
    const std::uint8_t bias_kind = !l.qbias.empty() ? 2 : (!l.bias.empty() ? 1 : 0);
    w.u8(bias_kind);
    w.u32(static_cast<std::uint32_t>(std::max(l.bias.size(), l.qbias.size())));
    w.u64(slots[i].b_off);
  }
  for (const auto& t : g.tensors) detail::write_qparams(w, t.qparams);
  for (const auto& l : g.layers) detail::write_qparams(w, l.weights.qparams());
  auto payload = blob.take();
  w.raw(payload.data(), payload.size());
  return w.take();
}

inline ModelGraph deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.require(4);
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw ParseError(0, "bad magic");
  }
  r.u32();
  {
    const std::size_t at = r.offset();
    const std::uint16_t version = r.u16();
    if (version != kModelFormatVersion) {
      throw ParseError(at, "unsupported format version " + std::to_string(version));
    }
  }
  ModelGraph g;
  g.dtype = detail::read_dtype(r);
  {
    const std::size_t at = r.offset();
    const std::uint8_t flags = r.u8();
    if (flags > 1) throw ParseError(at, "unknown flags");
    g.weights_initialized = flags & 1;
  }
  g.input_resolution = static_cast<int>(r.u32());
  g.classes = static_cast<int>(r.u32());
  g.input_id = static_cast<int>(r.u32());
  g.output_id = static_cast<int>(r.u32());
  const std::size_t counts_at = r.offset();
  const std::uint32_t tensor_count = r.u32();
  const std::uint32_t layer_count = r.u32();
  if (tensor_count > (1u << 20) || layer_count > (1u << 20)) {
    throw ParseError(counts_at, "implausible table size");
  }
  const std::uint64_t blob_bytes = r.u64();

  g.tensors.resize(tensor_count);
  for (auto& t : g.tensors) {
    t.dtype = detail::read_dtype(r);
    t.shape = detail::read_shape(r);
  }

  struct Pending {
    DType w_dtype;
    Shape w_shape;
    std::uint64_t w_off, w_bytes;
    std::uint8_t bias_kind;
    std::uint32_t bias_count;
    std::uint64_t b_off;
  };
  std::vector<Pending> pending(layer_count);
  g.layers.resize(layer_count);
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    Layer& l = g.layers[i];
    const std::size_t op_at = r.offset();
    const std::uint8_t op = r.u8();
    if (op >= kOpCodeCount) throw ParseError(op_at, "unknown op code");
    l.op = static_cast<OpCode>(op);
    l.stride = r.u8();
    const std::size_t pad_at = r.offset();
    const std::uint8_t pad = r.u8();
    if (pad > 1) throw ParseError(pad_at, "unknown padding");
    l.padding = static_cast<Padding>(pad);
    const std::size_t arity_at = r.offset();
    const std::uint8_t arity = r.u8();
    if (arity < 1 || arity > 2) throw ParseError(arity_at, "bad input count");
    for (int k = 0; k < arity; ++k) {
      const std::size_t at = r.offset();
      const std::uint32_t id = r.u32();
      if (id >= tensor_count) throw ParseError(at, "tensor id out of range");
      l.inputs.push_back(static_cast<int>(id));
    }
    {
      const std::size_t at = r.offset();
      const std::uint32_t id = r.u32();
      if (id >= tensor_count) throw ParseError(at, "tensor id out of range");
      l.output = static_cast<int>(id);
    }
    Pending& p = pending[i];
    p.w_dtype = detail::read_dtype(r);
    p.w_shape = detail::read_shape(r);
    p.w_off = r.u64();
    p.w_bytes = r.u64();
    const std::size_t kind_at = r.offset();
    p.bias_kind = r.u8();
    if (p.bias_kind > 2) throw ParseError(kind_at, "unknown bias kind");
    p.bias_count = r.u32();
    p.b_off = r.u64();
  }
  for (auto& t : g.tensors) t.qparams = detail::read_qparams(r);
  std::vector<std::optional<QuantParams>> weight_qp(layer_count);
  for (auto& qp : weight_qp) qp = detail::read_qparams(r);

  const std::size_t blob_at = r.offset();
  if (r.remaining() != blob_bytes) {
    throw ParseError(blob_at, r.remaining() < blob_bytes
                                  ? "truncated weight blob"
                                  : "trailing bytes after weight blob");
  }
  const std::uint8_t* blob = bytes.data() + blob_at;
  auto le32 = [](const std::uint8_t* p) {
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
           std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
  };

  for (std::uint32_t i = 0; i < layer_count; ++i) {
    Layer& l = g.layers[i];
    const Pending& p = pending[i];
    const std::size_t n = p.w_shape.empty() ? 0 : element_count(p.w_shape);
    const std::size_t expect = n * element_bytes(p.w_dtype);
    if (p.w_bytes != expect || p.w_off > blob_bytes ||
        p.w_bytes > blob_bytes - p.w_off) {
      throw ParseError(blob_at + std::min<std::uint64_t>(p.w_off, blob_bytes),
                       "weight payload of layer " + std::to_string(i) +
                           " out of bounds");
    }
    if (n > 0) {
      const std::uint8_t* src = blob + p.w_off;
      if (p.w_dtype == DType::Real32) {
        std::vector<float> v(n);
        for (std::size_t k = 0; k < n; ++k) {
          v[k] = std::bit_cast<float>(le32(src + 4 * k));
        }
        l.weights = Tensor::real(p.w_shape, std::move(v));
      } else {
        if (!weight_qp[i]) {
          throw ParseError(blob_at + p.w_off, "int8 weights without qparams");
        }
        std::vector<std::int8_t> v(n);
        std::memcpy(v.data(), src, n);
        l.weights = Tensor::quantized(p.w_shape, std::move(v), *weight_qp[i]);
      }
    }
    const std::uint64_t bias_bytes = std::uint64_t{p.bias_count} * 4;
    if (p.b_off > blob_bytes || bias_bytes > blob_bytes - p.b_off) {
      throw ParseError(blob_at + std::min<std::uint64_t>(p.b_off, blob_bytes),
                       "bias payload of layer " + std::to_string(i) +
                           " out of bounds");
    }
    const std::uint8_t* src = blob + p.b_off;
    for (std::uint32_t k = 0; k < p.bias_count; ++k) {
      const std::uint32_t raw = le32(src + 4 * k);
      if (p.bias_kind == 1) l.bias.push_back(std::bit_cast<float>(raw));
      if (p.bias_kind == 2) l.qbias.push_back(static_cast<std::int32_t>(raw));
    }
  }
  try {
    validate(g);
  } catch (const Error& e) {
    throw ParseError(r.offset(), std::string("inconsistent graph: ") + e.what());
  }
  return g;
}

inline void save_model(const ModelGraph& g, const std::filesystem::path& path) {
  const auto bytes = serialize(g);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

inline ModelGraph load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize(bytes);
}

}  // namespace tinyedge::nn
