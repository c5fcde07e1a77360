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

#include <algorithm>
#include <filesystem>
#include <set>

#include "support.hpp"
#include "tinyedge/nn/footprint.hpp"
#include "tinyedge/nn/mobilenet.hpp"
#include "tinyedge/nn/model_io.hpp"

namespace tinyedge::nn {
namespace {

using testing::golden_path;
using testing::read_file;
using testing::read_oracle;
using testing::strip_comments;
using testing::brute_force_peak;
using testing::mark_int8;
using testing::random_graph;

std::size_t count_ops(const ModelGraph& g, OpCode op) {
  return std::count_if(g.layers.begin(), g.layers.end(),
                       [op](const Layer& l) { return l.op == op; });
}

// Shape and parameter totals checked against the per-layer summation oracle.
void expect_matches_oracle(double width, int res, int classes, const std::string& file) {
  SCOPED_TRACE(file);
  const auto oracle = read_oracle(file);
  const ModelGraph g = build_mobilenet_v2(width, res, classes);
  const ChannelPlan plan = mobilenet_v2_channels(width);
  std::vector<long long> got{plan.stem};
  got.insert(got.end(), plan.stages.begin(), plan.stages.end());
  got.push_back(plan.last);
  EXPECT_EQ(got, oracle.at("channel_plan"));
  EXPECT_EQ(static_cast<long long>(count_ops(g, OpCode::DepthwiseConv2D)),
            oracle.at("blocks").at(0));
  EXPECT_EQ(static_cast<long long>(count_ops(g, OpCode::ResidualAdd)),
            oracle.at("residuals").at(0));
  const int pool = static_cast<int>(std::find_if(g.layers.begin(), g.layers.end(),
                                                 [](const Layer& l) {
                                                   return l.op == OpCode::GlobalAvgPool;
                                                 }) -
                                    g.layers.begin());
  EXPECT_EQ(g.tensor(g.layers[pool].inputs[0]).shape[1], oracle.at("final_spatial").at(0));
  EXPECT_EQ(static_cast<long long>(g.parameter_count()), oracle.at("params").at(0));
  EXPECT_EQ(static_cast<long long>(multiply_accumulates(g)), oracle.at("macs").at(0));
}

TEST(MobileNet, DefaultMatchesOracle) {
  expect_matches_oracle(0.35, 96, 2, "mobilenet_plan_0.35_96_2.txt");
}

TEST(MobileNet, FullWidthMatchesOracle) {
  expect_matches_oracle(1.0, 224, 1000, "mobilenet_plan_1.0_224_1000.txt");
}

TEST(MobileNet, HalfWidthMatchesOracle) {
  expect_matches_oracle(0.5, 128, 2, "mobilenet_plan_0.5_128_2.txt");
}

TEST(MobileNet, CanonicalFirstStageAtUnitWidth) {
  EXPECT_EQ(mobilenet_v2_channels(1.0).stages.front(), 16);
  EXPECT_EQ(mobilenet_v2_channels(0.35).stem, 16);
}

TEST(MobileNet, MakeDivisible) {
  EXPECT_EQ(make_divisible(11.2), 16);  // 32 * 0.35
  EXPECT_EQ(make_divisible(5.6), 8);    // 16 * 0.35, floor of 8
  EXPECT_EQ(make_divisible(8.4), 8);
  EXPECT_EQ(make_divisible(19.6), 24);  // 56 * 0.35
  EXPECT_EQ(make_divisible(22.4), 24);
  EXPECT_EQ(make_divisible(33.6), 32);
  EXPECT_EQ(make_divisible(56.0), 56);
  EXPECT_EQ(make_divisible(112.0), 112);
}

TEST(MobileNet, GoldenGraphDump) {
  const std::string want = strip_comments(read_file(golden_path("mobilenet_0.35_96_2.dump")));
  ASSERT_FALSE(want.empty());
  EXPECT_EQ(dump_graph(build_mobilenet_v2()), want);
}

TEST(MobileNet, DefaultShapeAndOutput) {
  const ModelGraph g = build_mobilenet_v2();
  EXPECT_EQ(g.tensor(g.input_id).shape, (Shape{1, 96, 96, 3}));
  EXPECT_EQ(g.tensor(g.output_id).shape, (Shape{1, 2}));
  EXPECT_EQ(g.layers.back().op, OpCode::Softmax);
  EXPECT_EQ(g.layers[g.head_layer()].op, OpCode::FullyConnected);
  // Stem conv, then the t = 1 block starts directly with its depthwise conv.
  EXPECT_EQ(g.layers[0].op, OpCode::Conv2D);
  EXPECT_EQ(g.layers[1].op, OpCode::ReLU6);
  EXPECT_EQ(g.layers[2].op, OpCode::DepthwiseConv2D);
}

TEST(MobileNet, RejectsInvalidArguments) {
  EXPECT_THROW(build_mobilenet_v2(0.0), InvalidArgument);
  EXPECT_THROW(build_mobilenet_v2(-1.0), InvalidArgument);
  EXPECT_THROW(build_mobilenet_v2(0.35, 100), InvalidArgument);
  EXPECT_THROW(build_mobilenet_v2(0.35, 96, 0), InvalidArgument);
}

// Every ResidualAdd closes a stride-1 block with equal channel counts, and
// every such block has one.
TEST(MobileNet, ResidualIffStrideOneAndEqualChannels) {
  for (double width : {0.35, 0.5, 0.75, 1.0, 1.4}) {
    const ModelGraph g = build_mobilenet_v2(width, 96, 2);
    std::set<int> residual_inputs;
    for (const auto& l : g.layers) {
      if (l.op == OpCode::ResidualAdd) residual_inputs.insert(l.inputs[0]);
    }
    // Block inputs are the tensors feeding each block's first layer.
    int block_input = -1;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
      const Layer& l = g.layers[i];
      if (l.op != OpCode::DepthwiseConv2D) continue;
      const Layer& prev = g.layers[i - 1];
      // With expansion the depthwise input comes from conv + relu6.
      const bool expanded = prev.op == OpCode::ReLU6 && g.layers[i - 2].op == OpCode::Conv2D &&
                            g.layers[i - 2].weights.dim(1) == 1;
      block_input = expanded ? g.layers[i - 2].inputs[0] : l.inputs[0];
      std::size_t j = i + 1;
      while (g.layers[j].op != OpCode::Conv2D) ++j;  // projection
      const int out_c = g.layers[j].weights.dim(0);
      const int in_c = g.tensor(block_input).shape[3];
      const bool want = l.stride == 1 && in_c == out_c;
      EXPECT_EQ(residual_inputs.count(block_input) == 1, want) << "width " << width << " layer " << i;
    }
  }
}

TEST(InvertedResidual, StrideTwoHasNoSkip) {
  GraphBuilder b({1, 8, 8, 8});
  append_inverted_residual(b, b.input(), {6, 8, 2});
  EXPECT_EQ(count_ops(b.finish(), OpCode::ResidualAdd), 0u);
}

TEST(InvertedResidual, ZeroWeightsPassInputThrough) {
  Rng rng(9);
  const Tensor x = testing::random_real({1, 6, 6, 8}, rng);
  const Tensor y = inverted_residual_block(x, {6, 8, 1}, WeightInit::Zero);
  EXPECT_EQ(y, x);
}

TEST(InvertedResidual, UnitExpansionSkipsExpandConv) {
  GraphBuilder b({1, 8, 8, 8});
  append_inverted_residual(b, b.input(), {1, 8, 1});
  const ModelGraph g = b.finish();
  ASSERT_FALSE(g.layers.empty());
  EXPECT_EQ(g.layers[0].op, OpCode::DepthwiseConv2D);
  EXPECT_EQ(count_ops(g, OpCode::Conv2D), 1u);
  GraphBuilder e({1, 8, 8, 8});
  append_inverted_residual(e, e.input(), {6, 8, 1});
  const ModelGraph ge = e.finish();
  EXPECT_EQ(ge.layers[0].op, OpCode::Conv2D);
  EXPECT_EQ(ge.layers[0].weights.dim(0), 48);
}

TEST(RunInference, ZeroModelIsUniform) {
  ModelGraph g = build_mobilenet_v2();
  initialize_weights(g, 0, WeightInit::Zero);
  const auto p = run_inference(g, Tensor::real({1, 96, 96, 3}));
  EXPECT_EQ(p, (std::vector<float>{0.5f, 0.5f}));
}

TEST(RunInference, BitIdenticalAcrossRuns) {
  ModelGraph g = build_mobilenet_v2();
  initialize_weights(g, 11);
  Rng rng(12);
  const Tensor x = testing::random_real({1, 96, 96, 3}, rng);
  const auto a = run_inference(g, x);
  const auto b = run_inference(g, x);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a[0] + a[1], 1.0, 1e-6);
}

TEST(RunInference, Errors) {
  ModelGraph g = build_mobilenet_v2();
  EXPECT_THROW(run_inference(g, Tensor::real({1, 96, 96, 3})), InvalidState);
  initialize_weights(g, 1);
  EXPECT_THROW(run_inference(g, Tensor::real({1, 64, 64, 3})), ShapeError);
}

TEST(InitializeWeights, SeededAndBounded) {
  ModelGraph a = build_mobilenet_v2(), b = build_mobilenet_v2(), c = build_mobilenet_v2();
  initialize_weights(a, 5, WeightInit::FixedUniform);
  initialize_weights(b, 5, WeightInit::FixedUniform);
  initialize_weights(c, 6, WeightInit::FixedUniform);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (const auto& l : a.layers) {
    for (float w : l.weights.real_data()) EXPECT_LE(std::fabs(w), 0.1f);
    for (float v : l.bias) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Footprint, SingleIdentityLayer) {
  GraphBuilder b({1, 96, 96, 3});
  b.relu6(b.input());
  ModelGraph g = b.finish();
  mark_int8(g);
  EXPECT_EQ(peak_activation_bytes(g), 55296u);
  EXPECT_EQ(peak_activation_bytes(g), 2u * 27648u);
}

TEST(Footprint, PeakAtFirstStepWhenOutputsShrink) {
  GraphBuilder b({1, 32, 32, 8});
  int x = b.conv2d(b.input(), 4, 1, 2);  // A -> B, B is smaller
  b.conv2d(x, 2, 1, 2);                  // B -> C
  const ModelGraph g = b.finish();
  const auto live = live_bytes_per_step(g);
  ASSERT_EQ(live.size(), 2u);
  EXPECT_GT(live[0], live[1]);
  EXPECT_EQ(peak_activation_bytes(g), live[0]);
}

TEST(Footprint, MatchesBruteForceLivenessOnRandomGraphs) {
  Rng rng(2026);
  for (int i = 0; i < 50; ++i) {
    const ModelGraph g = random_graph(rng);
    ASSERT_LE(g.layers.size(), 10u);
    EXPECT_EQ(peak_activation_bytes(g), brute_force_peak(g)) << dump_graph(g);
  }
}

TEST(Footprint, DefaultModelSizes) {
  ModelGraph g = build_mobilenet_v2();
  initialize_weights(g, 1);
  const MemoryFootprint f = memory_footprint(g);
  EXPECT_GT(f.ram_peak_bytes, 0u);
  const double params = static_cast<double>(g.parameter_count());
  EXPECT_GE(f.flash_bytes, 4 * params);
  EXPECT_LE(f.flash_bytes, 4 * params * 1.02);
  EXPECT_EQ(weight_payload_bytes(g), 4 * (g.parameter_count() - [&] {
                                          std::size_t n = 0;
                                          for (const auto& l : g.layers) n += l.bias.size();
                                          return n;
                                        }()));
  EXPECT_EQ(peak_activation_bytes(g), brute_force_peak(g));
}

TEST(ModelIo, RoundTripIsBitExact) {
  ModelGraph g = build_mobilenet_v2();
  initialize_weights(g, 21);
  const auto bytes = serialize(g);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TWNG");
  const ModelGraph back = deserialize(bytes);
  EXPECT_EQ(back, g);
  EXPECT_EQ(serialize(back), bytes);
  const MemoryFootprint a = memory_footprint(g), b = memory_footprint(back);
  EXPECT_EQ(a.flash_bytes, b.flash_bytes);
  EXPECT_EQ(a.ram_peak_bytes, b.ram_peak_bytes);
}

TEST(ModelIo, SaveAndLoadFile) {
  ModelGraph g = build_mobilenet_v2();
  initialize_weights(g, 22);
  const auto path = std::filesystem::temp_directory_path() / "tinyedge_model_io_test.twng";
  save_model(g, path);
  EXPECT_EQ(load_model(path), g);
  EXPECT_EQ(std::filesystem::file_size(path), serialize(g).size());
  std::filesystem::remove(path);
  EXPECT_THROW(load_model(path), Error);
}

TEST(ModelIo, TruncationIsAParseError) {
  GraphBuilder b({1, 8, 8, 3});
  b.fully_connected(b.conv2d(b.input(), 4, 3, 2), 2);
  ModelGraph g = b.finish();
  initialize_weights(g, 3);
  const auto bytes = serialize(g);
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    const std::span<const std::uint8_t> cut(bytes.data(), n);
    EXPECT_THROW((void)deserialize(cut), ParseError) << "length " << n;
  }
}

TEST(ModelIo, BadMagicAndVersionReportOffsets) {
  ModelGraph g = build_mobilenet_v2();
  initialize_weights(g, 4);
  auto bytes = serialize(g);
  auto bad = bytes;
  bad[0] = 'X';
  try {
    (void)deserialize(bad);
    FAIL() << "bad magic accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  bad = bytes;
  bad[4] = 99;
  try {
    (void)deserialize(bad);
    FAIL() << "bad version accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(ModelIo, CorruptedBytesNeverCrash) {
  GraphBuilder b({1, 8, 8, 3});
  int x = b.relu6(b.conv2d(b.input(), 4, 3, 1));
  x = b.residual_add(x, b.depthwise_conv2d(x, 3, 1));
  b.softmax(b.fully_connected(b.global_avg_pool(x), 2));
  ModelGraph g = b.finish();
  initialize_weights(g, 5);
  const auto bytes = serialize(g);
  Rng rng(6);
  for (int trial = 0; trial < 2000; ++trial) {
    auto mutated = bytes;
    const int flips = 1 + static_cast<int>(rng.below(4));
    for (int k = 0; k < flips; ++k) {
      mutated[rng.below(mutated.size())] = static_cast<std::uint8_t>(rng.below(256));
    }
    try {
      const ModelGraph m = deserialize(mutated);
      validate(m);
    } catch (const ParseError&) {
    }
  }
}

}  // namespace
}  // namespace tinyedge::nn
