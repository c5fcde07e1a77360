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
#include <limits>

#include "tinyedge/control/pid.hpp"
#include "tinyedge/rng.hpp"

namespace tinyedge::control {
namespace {

TEST(Pid, Defaults) {
  const PidController c = pid_new();
  EXPECT_EQ(c.gains(), (PidGains{0.5, 0.05, 0.5}));
  EXPECT_EQ(c.out_min(), -100.0);
  EXPECT_EQ(c.out_max(), 100.0);
  EXPECT_TRUE(c.first_step());
  EXPECT_EQ(c.integral(), 0.0);
}

TEST(Pid, FreshControllerZeroErrorGivesZero) {
  PidController c = pid_new();
  EXPECT_EQ(c.step(0.0), 0.0);
}

TEST(Pid, HandTraceProportionalPlusDerivative) {
  PidController c = pid_new(0.5, 0.0, 0.5);
  EXPECT_EQ(c.step(0.0), 0.0);
  EXPECT_EQ(c.step(10.0), 10.0);  // 0.5 * 10 + 0.5 * (10 - 0)
  EXPECT_EQ(c.step(10.0), 5.0);   // derivative gone
  EXPECT_EQ(c.step(4.0), -1.0);   // 2 + 0.5 * (4 - 10)
}

TEST(Pid, FirstStepHasNoDerivative) {
  PidController c = pid_new(0.5, 0.0, 0.5);
  EXPECT_EQ(c.step(10.0), 5.0);
}

TEST(Pid, ClampsLargeErrors) {
  PidController c = pid_new();
  EXPECT_EQ(c.step(10000.0), 100.0);
  PidController d = pid_new();
  EXPECT_EQ(d.step(-10000.0), -100.0);
}

TEST(Pid, IntegralRamp) {
  PidController c = pid_new(0.0, 0.05, 0.0);
  for (int k = 1; k <= 20; ++k) {
    EXPECT_NEAR(c.step(2.0), 0.1 * k, 1e-12) << "step " << k;
  }
}

TEST(Pid, SameSequenceSameOutputs) {
  PidController a = pid_new(), b = pid_new();
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double e = rng.uniform(-300.0, 300.0);
    ASSERT_EQ(a.step(e), b.step(e));
  }
}

TEST(Pid, ResetErasesState) {
  PidController c = pid_new();
  c.step(5.0);
  c.step(-3.0);
  c.reset();
  EXPECT_EQ(c.integral(), 0.0);
  EXPECT_EQ(c.prev_error(), 0.0);
  EXPECT_TRUE(c.first_step());
  EXPECT_EQ(c.step(0.0), 0.0);

  PidController fresh = pid_new(), used = pid_new();
  used.step(5.0);
  used.reset();
  used.reset();
  EXPECT_EQ(used.step(5.0), fresh.step(5.0));
}

TEST(Pid, NonFiniteErrorRejectedWithoutStateChange) {
  PidController c = pid_new();
  c.step(3.0);
  const double integral = c.integral(), prev = c.prev_error();
  EXPECT_THROW(c.step(std::numeric_limits<double>::quiet_NaN()), InvalidArgument);
  EXPECT_THROW(c.step(std::numeric_limits<double>::infinity()), InvalidArgument);
  EXPECT_EQ(c.integral(), integral);
  EXPECT_EQ(c.prev_error(), prev);
  EXPECT_FALSE(c.first_step());
}

TEST(Pid, RejectsBadBounds) {
  EXPECT_THROW(PidController(PidGains{}, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(PidController(PidGains{}, 5.0, -5.0), InvalidArgument);
  EXPECT_THROW(PidController(PidGains{std::numeric_limits<double>::infinity(), 0, 0}),
               InvalidArgument);
}

TEST(Pid, OutputNeverLeavesClampUnderFuzz) {
  Rng rng(2026);
  PidController c = pid_new();
  PidController narrow(PidGains{2.0, 0.3, 1.5}, -7.5, 30.0);
  for (int i = 0; i < 1000000; ++i) {
    double e = 0.0;
    switch (rng.below(4)) {
      case 0: e = rng.uniform(-1.0, 1.0); break;
      case 1: e = rng.uniform(-1e4, 1e4); break;
      case 2: e = rng.uniform(-1e300, 1e300); break;
      default: e = rng.bernoulli(0.5) ? std::numeric_limits<double>::max()
                                      : -std::numeric_limits<double>::max(); break;
    }
    const double u = c.step(e);
    ASSERT_GE(u, -100.0);
    ASSERT_LE(u, 100.0);
    const double v = narrow.step(e);
    ASSERT_GE(v, -7.5);
    ASSERT_LE(v, 30.0);
    if (rng.below(1000) == 0) c.reset();
  }
}

TEST(Pid, ProportionalOnlyIsLinearWhenUnclamped) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double e = rng.uniform(-50.0, 50.0);
    const double alpha = rng.uniform(-4.0, 4.0);
    if (std::fabs(alpha * e) * 0.5 > 100.0) continue;
    PidController a = pid_new(0.5, 0.0, 0.0), b = pid_new(0.5, 0.0, 0.0);
    EXPECT_NEAR(a.step(alpha * e), alpha * b.step(e), 1e-12);
  }
}

TEST(Pid, ProportionalSignFollowsError) {
  Rng rng(6);
  PidController c = pid_new(0.5, 0.0, 0.0);
  for (int i = 0; i < 10000; ++i) {
    const double e = rng.uniform(-1000.0, 1000.0);
    const double u = c.step(e);
    EXPECT_EQ(std::signbit(u), std::signbit(e));
    EXPECT_EQ(u == 0.0, e == 0.0);
  }
}

TEST(Pid, AntiWindupFreezesIntegralDuringSaturation) {
  PidController c = pid_new();
  // Ramp gently so the integral builds while unsaturated.
  double u = 0.0;
  for (int i = 0; i < 10; ++i) u = c.step(10.0);
  ASSERT_LT(u, 100.0);
  c.step(1000.0);  // enters saturation
  const double at_entry = c.integral();
  for (int i = 0; i < 500; ++i) {
    ASSERT_EQ(c.step(1000.0), 100.0);
    ASSERT_LE(std::fabs(c.integral()), std::fabs(at_entry));
  }
  const double frozen = c.integral();
  EXPECT_EQ(frozen, at_entry);
  const double back = c.step(0.0);
  const double bound = 0.5 * 0.0 + 0.5 * std::fabs(0.0 - 1000.0) + 0.05 * std::fabs(frozen);
  EXPECT_LE(std::fabs(back), bound);
  EXPECT_LE(std::fabs(c.integral()), std::fabs(frozen));
}

}  // namespace
}  // namespace tinyedge::control
