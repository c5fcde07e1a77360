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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "tinyedge/nn/kernels.hpp"
#include "tinyedge/quantization.hpp"

namespace tinyedge::nn {
namespace {

using testing::grouped_conv_reference;
using testing::random_real;
using testing::random_vector;

std::vector<float> values(const Tensor& t) {
  const Tensor r = t.dtype() == DType::Real32 ? t : dequantize(t);
  return {r.real_data().begin(), r.real_data().end()};
}

QuantParams range_qparams(std::span<const float> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const auto [a, b] = nudge_range(*lo, *hi);
  return compute_quant_params(a, b, QuantScheme::Asymmetric);
}

QuantParams weight_qparams(std::span<const float> w) {
  double bound = 0.0;
  for (float v : w) bound = std::max(bound, static_cast<double>(std::fabs(v)));
  return compute_quant_params(-bound, bound, QuantScheme::Symmetric);
}

// Per-element comparison of a dequantized Int8 result with the Real32
// reference, in units of the output scale.
struct ToleranceStats {
  std::size_t total = 0, within_one = 0;
  double worst = 0.0;

  void add(const std::vector<float>& got, const std::vector<float>& want, double scale) {
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double e = std::fabs(static_cast<double>(got[i]) - want[i]) / scale;
      worst = std::max(worst, e);
      within_one += e <= 1.0;
      ++total;
    }
  }
  double share_within_one() const { return static_cast<double>(within_one) / total; }
};

TEST(Conv2D, OneByOneIdentity) {
  Rng rng(1);
  const Tensor x = random_real({1, 5, 4, 3}, rng);
  std::vector<float> w(9, 0.0f);
  for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
  const Tensor y = conv2d(x, Tensor::real({3, 1, 1, 3}, w), std::vector<float>(3, 0.0f));
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(values(y), values(x));
}

TEST(Conv2D, AllOnesValidKernel) {
  const Tensor x = Tensor::real({1, 3, 3, 1}, std::vector<float>(9, 2.0f));
  const Tensor w = Tensor::real({1, 3, 3, 1}, std::vector<float>(9, 1.0f));
  const Tensor y = conv2d(x, w, std::vector<float>{0.0f}, {1, Padding::Valid});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.real_data()[0], 18.0f);
}

TEST(Conv2D, MatchesDirectReference) {
  Rng rng(2);
  for (int stride : {1, 2}) {
    for (bool same : {true, false}) {
      const Tensor x = random_real({1, 7, 6, 4}, rng);
      const auto w = random_vector(5 * 3 * 3 * 4, rng);
      const auto b = random_vector(5, rng);
      const Tensor y = conv2d(x, Tensor::real({5, 3, 3, 4}, w), b,
                              {stride, same ? Padding::Same : Padding::Valid});
      int oh = 0, ow = 0;
      const auto ref = grouped_conv_reference(x, w, 5, 3, 1, b, stride, same, oh, ow);
      ASSERT_EQ(y.shape(), (Shape{1, oh, ow, 5}));
      for (std::size_t i = 0; i < ref.size(); ++i) {
        EXPECT_NEAR(y.real_data()[i], ref[i], 1e-5);
      }
    }
  }
}

TEST(Conv2D, ShapeAndQuantErrors) {
  const Tensor x = Tensor::real({1, 4, 4, 3});
  EXPECT_THROW(conv2d(x, Tensor::real({2, 1, 1, 4}), {}), ShapeError);
  EXPECT_THROW(conv2d(x, Tensor::real({2, 1, 1, 3}), std::vector<float>(3)), ShapeError);
  EXPECT_THROW(conv2d(x, Tensor::real({2, 5, 5, 3}), {}, {1, Padding::Valid}), ShapeError);
  const QuantParams qp{0.1, 0};
  const Tensor qx = quantize(x, qp);
  const Tensor qw = quantize(Tensor::real({2, 1, 1, 3}), qp);
  EXPECT_THROW(conv2d(x, qw, std::vector<std::int32_t>{}, {}, qp), QuantizationError);
  EXPECT_THROW(conv2d(qx, Tensor::real({2, 1, 1, 3}), std::vector<std::int32_t>{}, {}, qp),
               QuantizationError);
}

TEST(DepthwiseConv2D, UnitWeightIdentity) {
  Rng rng(3);
  const Tensor x = random_real({1, 4, 4, 3}, rng);
  const Tensor y = depthwise_conv2d(x, Tensor::real({1, 1, 1, 3}, {1.0f, 1.0f, 1.0f}), {});
  EXPECT_EQ(values(y), values(x));
}

// Library layout is 1 x K x K x C; the reference wants C x K x K x 1.
std::vector<float> depthwise_to_grouped(const std::vector<float>& w, int k, int c) {
  std::vector<float> out(w.size());
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < k * k; ++i) out[ch * k * k + i] = w[i * c + ch];
  }
  return out;
}

TEST(DepthwiseConv2D, EqualsGroupedConvolutionExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int stride = seed % 2 ? 2 : 1;
    const Tensor x = random_real({1, 6, 6, 3}, rng);
    const auto w = random_vector(3 * 3 * 3, rng);
    const auto b = random_vector(3, rng);
    const Tensor y = depthwise_conv2d(x, Tensor::real({1, 3, 3, 3}, w), b, {stride});
    int oh = 0, ow = 0;
    const auto ref = grouped_conv_reference<float>(x, depthwise_to_grouped(w, 3, 3), 3, 3, 3, b,
                                                   stride, true, oh, ow);
    ASSERT_EQ(y.shape(), (Shape{1, oh, ow, 3}));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(y.real_data()[i], ref[i]) << "seed " << seed << " i " << i;
    }
  }
}

TEST(ReLU6, Examples) {
  const Tensor y = relu6(Tensor::real({3}, {-1.5f, 3.0f, 7.2f}));
  EXPECT_EQ(values(y), (std::vector<float>{0.0f, 3.0f, 6.0f}));
}

TEST(ReLU6, Int8ClampsInQuantizedDomain) {
  Rng rng(4);
  const Tensor x = random_real({1, 4, 4, 8}, rng, -8.0, 8.0);
  const QuantParams in_qp = range_qparams(x.real_data());
  const QuantParams out_qp = compute_quant_params(0.0, 6.0, QuantScheme::Asymmetric);
  const Tensor y = relu6(quantize(x, in_qp), out_qp);
  ASSERT_EQ(*y.qparams(), out_qp);
  const auto ref = values(relu6(x));
  const auto got = values(y);
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_GE(got[i], 0.0f);
    EXPECT_LE(got[i], 6.0f + 1e-6f);
    EXPECT_LE(std::fabs(got[i] - ref[i]), in_qp.scale / 2 + out_qp.scale / 2 + 1e-6);
  }
}

TEST(GlobalAvgPool, Examples) {
  const Tensor c = global_avg_pool(Tensor::real({1, 3, 2, 2}, std::vector<float>(12, 1.25f)));
  EXPECT_EQ(c.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_FLOAT_EQ(c.real_data()[0], 1.25f);
  EXPECT_FLOAT_EQ(c.real_data()[1], 1.25f);
  const Tensor m = global_avg_pool(Tensor::real({1, 2, 2, 1}, {1.0f, 2.0f, 3.0f, 4.0f}));
  EXPECT_FLOAT_EQ(m.real_data()[0], 2.5f);
}

// Against the pool of the dequantized input only the output rounding is
// left; against the original input the mean input rounding error adds at
// most half an input step.
TEST(GlobalAvgPool, Int8WithinRoundingBounds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Tensor x = random_real({1, 5, 5, 6}, rng, -2.0, 3.0);
    const QuantParams in_qp = range_qparams(x.real_data());
    const Tensor qx = quantize(x, in_qp);
    const auto ref = values(global_avg_pool(x));
    const auto ref_q = values(global_avg_pool(dequantize(qx)));
    const QuantParams out_qp = range_qparams(ref);
    const auto got = values(global_avg_pool(qx, out_qp));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_LE(std::fabs(got[i] - ref_q[i]), out_qp.scale) << "seed " << seed;
      EXPECT_LE(std::fabs(got[i] - ref[i]), 0.5 * (in_qp.scale + out_qp.scale) + 1e-6)
          << "seed " << seed;
    }
  }
}

TEST(FullyConnected, Examples) {
  const Tensor x = Tensor::real({1, 3}, {0.5f, -2.0f, 4.0f});
  const Tensor eye = Tensor::real({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(values(fully_connected(x, eye, std::vector<float>(3, 0.0f))), values(x));
  const Tensor w = Tensor::real({2, 2}, {1, 2, 3, 4});
  const Tensor y = fully_connected(Tensor::real({1, 2}, {1, 1}), w, std::vector<float>{0, 0});
  EXPECT_EQ(values(y), (std::vector<float>{3.0f, 7.0f}));
  EXPECT_THROW(fully_connected(Tensor::real({1, 3}), w, {}), ShapeError);
}

TEST(Softmax, Examples) {
  EXPECT_EQ(values(softmax(Tensor::real({1, 2}, {0.0f, 0.0f}))),
            (std::vector<float>{0.5f, 0.5f}));
  const auto p = values(softmax(Tensor::real({1, 2}, {static_cast<float>(std::log(2.0)), 0.0f})));
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-6);
}

TEST(Softmax, NormalizedAndShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int classes = 1 + static_cast<int>(rng.below(10));
    // Multiples of 2^-10 with an integer shift keep the shifted logits exact.
    auto logits = random_vector(classes, rng, -30.0, 30.0);
    for (float& v : logits) v = std::round(v * 1024.0f) / 1024.0f;
    const auto p = values(softmax(Tensor::real({1, classes}, logits)));
    double sum = 0.0;
    for (float v : p) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
    const float shift = static_cast<float>(rng.uniform_int(-50, 50));
    for (float& v : logits) v += shift;
    const auto q = values(softmax(Tensor::real({1, classes}, logits)));
    for (int i = 0; i < classes; ++i) EXPECT_NEAR(p[i], q[i], 1e-6);
  }
}

TEST(ResidualAdd, RealAndInt8) {
  Rng rng(6);
  const Tensor a = random_real({1, 3, 3, 4}, rng);
  const Tensor b = random_real({1, 3, 3, 4}, rng);
  const auto ref = values(residual_add(a, b));
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_FLOAT_EQ(ref[i], a.real_data()[i] + b.real_data()[i]);
  }
  const QuantParams qa = range_qparams(a.real_data()), qb = range_qparams(b.real_data());
  const QuantParams out_qp = range_qparams(ref);
  const auto got = values(residual_add(quantize(a, qa), quantize(b, qb), out_qp));
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_LE(std::fabs(got[i] - ref[i]), 2 * out_qp.scale);
  }
  EXPECT_THROW(residual_add(a, Tensor::real({1, 3, 3, 3})), ShapeError);
}

// Int8 kernels on seeded random operands. The Real32 reference runs the same
// kernel on the dequantized operands (input, weights and the int32 bias at
// s_in * s_w), so the comparison isolates the integer arithmetic and the
// requantization. `original` also collects the error against the Real32
// kernel on the unrounded operands, checked against a per-element bound.
enum class Kind { Conv, Depthwise, Fc };

struct Int8Comparison {
  ToleranceStats dequantized;
  ToleranceStats original;
  std::size_t bound_violations = 0;
};

// |x^w^ - xw| <= |w||dx| + |x||dw| + |dx||dw| with |dx| <= s_in/2 and
// |dw| <= s_w/2, summed over the receptive field; the bias contributes at
// most s_in*s_w/2 and the output rounding s_out/2.
std::vector<double> propagation_bound(Kind kind, const Tensor& x, const Tensor& w,
                                      const Tensor& ref, double s_in, double s_w,
                                      double s_out, int stride) {
  const Tensor ax = Tensor::real(x.shape(), [&] {
    std::vector<float> v(x.real_data().begin(), x.real_data().end());
    for (float& e : v) e = std::fabs(e) + static_cast<float>(s_in / 2);
    return v;
  }());
  const Tensor aw = Tensor::real(w.shape(), [&] {
    std::vector<float> v(w.real_data().begin(), w.real_data().end());
    for (float& e : v) e = std::fabs(e);
    return v;
  }());
  const Tensor ones_x = Tensor::real(x.shape(), std::vector<float>(element_count(x.shape()), 1.0f));
  const Tensor ones_w = Tensor::real(w.shape(), std::vector<float>(element_count(w.shape()), 1.0f));
  auto apply = [&](const Tensor& a, const Tensor& b) {
    if (kind == Kind::Conv) return conv2d(a, b, std::span<const float>{}, {stride});
    if (kind == Kind::Depthwise) return depthwise_conv2d(a, b, std::span<const float>{}, {stride});
    return fully_connected(a, b, std::span<const float>{});
  };
  // sum |w| (s_in/2) + sum (|x| + s_in/2)(s_w/2) over each receptive field.
  const auto wx = values(apply(ones_x, aw));
  const auto xw = values(apply(ax, ones_w));
  std::vector<double> bound(element_count(ref.shape()));
  for (std::size_t i = 0; i < bound.size(); ++i) {
    bound[i] = wx[i] * s_in / 2 + xw[i] * s_w / 2 + s_in * s_w / 2 + s_out / 2 + 1e-5;
  }
  return bound;
}

Int8Comparison int8_vs_real(Kind kind, int tensors) {
  Int8Comparison cmp;
  for (int seed = 0; seed < tensors; ++seed) {
    Rng rng(1000 + seed);
    const Tensor x = random_real(kind == Kind::Fc ? Shape{1, 64} : Shape{1, 8, 8, 4}, rng);
    Shape wshape;
    if (kind == Kind::Conv) wshape = {6, 3, 3, 4};
    if (kind == Kind::Depthwise) wshape = {1, 3, 3, 4};
    if (kind == Kind::Fc) wshape = {10, 64};
    const Tensor w = random_real(wshape, rng, -0.5, 0.5);
    const auto b = random_vector(static_cast<std::size_t>(kind == Kind::Conv ? 6 : kind == Kind::Fc ? 10 : 4), rng, -0.2, 0.2);
    const int stride = seed % 2 ? 2 : 1;
    Tensor ref;
    if (kind == Kind::Conv) ref = conv2d(x, w, b, {stride});
    if (kind == Kind::Depthwise) ref = depthwise_conv2d(x, w, b, {stride});
    if (kind == Kind::Fc) ref = fully_connected(x, w, b);
    const auto want = values(ref);
    const QuantParams in_qp = range_qparams(x.real_data());
    const QuantParams w_qp = weight_qparams(w.real_data());
    const QuantParams out_qp = range_qparams(want);
    const Tensor qx = quantize(x, in_qp);
    const Tensor qw = quantize(w, w_qp);
    const auto qb = quantize_bias(b, in_qp.scale, w_qp.scale);
    Tensor got;
    if (kind == Kind::Conv) got = conv2d(qx, qw, qb, {stride}, out_qp);
    if (kind == Kind::Depthwise) got = depthwise_conv2d(qx, qw, qb, {stride}, out_qp);
    if (kind == Kind::Fc) got = fully_connected(qx, qw, qb, out_qp);
    EXPECT_EQ(got.shape(), ref.shape());
    std::vector<float> bq(qb.size());
    for (std::size_t i = 0; i < qb.size(); ++i) {
      bq[i] = static_cast<float>(qb[i] * in_qp.scale * w_qp.scale);
    }
    const Tensor dx = dequantize(qx), dw = dequantize(qw);
    Tensor ref_q;
    if (kind == Kind::Conv) ref_q = conv2d(dx, dw, bq, {stride});
    if (kind == Kind::Depthwise) ref_q = depthwise_conv2d(dx, dw, bq, {stride});
    if (kind == Kind::Fc) ref_q = fully_connected(dx, dw, bq);
    const auto g = values(got);
    cmp.dequantized.add(g, values(ref_q), out_qp.scale);
    cmp.original.add(g, want, out_qp.scale);
    const auto bound =
        propagation_bound(kind, x, w, ref, in_qp.scale, w_qp.scale, out_qp.scale, stride);
    for (std::size_t i = 0; i < g.size(); ++i) {
      cmp.bound_violations += std::fabs(static_cast<double>(g[i]) - want[i]) > bound[i];
    }
  }
  return cmp;
}

class Int8Kernels : public ::testing::TestWithParam<Kind> {};

TEST_P(Int8Kernels, WithinTwoOutputScalesOfDequantizedReference) {
  const auto c = int8_vs_real(GetParam(), 100);
  EXPECT_LE(c.dequantized.worst, 2.0);
  EXPECT_GE(c.dequantized.share_within_one(), 0.99);
}

TEST_P(Int8Kernels, OriginalOperandErrorWithinPropagationBound) {
  const auto c = int8_vs_real(GetParam(), 100);
  EXPECT_EQ(c.bound_violations, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllKernels, Int8Kernels,
                         ::testing::Values(Kind::Conv, Kind::Depthwise, Kind::Fc),
                         [](const auto& info) {
                           switch (info.param) {
                             case Kind::Conv: return std::string("Conv");
                             case Kind::Depthwise: return std::string("Depthwise");
                             default: return std::string("FullyConnected");
                           }
                         });

// The spatial kernels have enough outputs that their output scale also
// absorbs the operand rounding.
TEST(Int8KernelsOriginal, SpatialKernelsWithinTwoOutputScales) {
  for (Kind k : {Kind::Conv, Kind::Depthwise}) {
    const auto c = int8_vs_real(k, 100);
    EXPECT_LE(c.original.worst, 2.0);
    EXPECT_GE(c.original.share_within_one(), 0.99);
  }
}

TEST(Int8Bias, StoredAtProductScale) {
  const auto q = quantize_bias(std::vector<float>{0.5f, -0.25f}, 0.1, 0.05);
  EXPECT_EQ(q, (std::vector<std::int32_t>{100, -50}));
}

}  // namespace
}  // namespace tinyedge::nn
