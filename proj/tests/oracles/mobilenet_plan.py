#!/usr/bin/env python3
# Copyright 2026 The TinyEdge Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Independent channel-plan / parameter-count oracle for the width-scaled
MobileNetV2 topology. Prints the plan, parameter totals and MAC count.

Usage: mobilenet_plan.py [width] [resolution] [classes]
"""
import sys


def make_divisible(v, divisor=8, min_value=8):
    new_v = max(min_value, int(v + divisor / 2) // divisor * divisor)
    if new_v < 0.9 * v:
        new_v += divisor
    return new_v


def same_out(n, s):
    return -(-n // s)


def main():
    alpha = float(sys.argv[1]) if len(sys.argv) > 1 else 0.35
    res = int(sys.argv[2]) if len(sys.argv) > 2 else 96
    classes = int(sys.argv[3]) if len(sys.argv) > 3 else 2
    table = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
             (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    weights = biases = macs = 0
    h = res
    stem = make_divisible(32 * alpha)
    h = same_out(h, 2)
    weights += stem * 3 * 3 * 3
    biases += stem
    macs += h * h * stem * 27
    cin = stem
    plan = [stem]
    blocks = residuals = 0
    for t, c, n, s in table:
        cout = make_divisible(c * alpha)
        plan.append(cout)
        for i in range(n):
            stride = s if i == 0 else 1
            hidden = cin * t
            if t != 1:
                weights += hidden * cin
                biases += hidden
                macs += h * h * hidden * cin
            h = same_out(h, stride)
            weights += hidden * 9
            biases += hidden
            macs += h * h * hidden * 9
            weights += cout * hidden
            biases += cout
            macs += h * h * cout * hidden
            if stride == 1 and cin == cout:
                residuals += 1
            blocks += 1
            cin = cout
    last = make_divisible(1280 * alpha) if alpha > 1.0 else 1280
    plan.append(last)
    weights += last * cin
    biases += last
    macs += h * h * last * cin
    weights += classes * last
    biases += classes
    macs += classes * last
    print("channel_plan", " ".join(map(str, plan)))
    print("blocks", blocks)
    print("residuals", residuals)
    print("final_spatial", h)
    print("weights", weights)
    print("biases", biases)
    print("params", weights + biases)
    print("macs", macs)


if __name__ == "__main__":
    main()
