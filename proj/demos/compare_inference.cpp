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

// Flies the same two-target scene with onboard OpenMV inference and with
// distributed inference, then prints both summaries side by side.

#include <cstdio>
#include <string>

#include "tinyedge/mission/config.hpp"
#include "tinyedge/mission/mission.hpp"
#include "tinyedge/mission/report.hpp"
#include "tinyedge/nn/mobilenet.hpp"
#include "tinyedge/nn/train.hpp"

using namespace tinyedge;

int main(int argc, char** argv) {
  mission::MissionConfig base;
  if (argc > 1) {
    try {
      base = mission::load_config(argv[1]);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  } else {
    base.sim.takeoff_altitude = 1.6;
    base.scene.targets = {{0.5, 5.0, mission::MaskLabel::Mask},
                          {-4.0, -3.0, mission::MaskLabel::NoMask}};
  }

  nn::ModelGraph backbone = nn::build_mobilenet_v2();
  nn::initialize_weights(backbone, base.seed);
  mission::DatasetOptions data;
  data.count = 200;
  data.seed = base.seed;
  const auto trained =
      nn::train_head(backbone, mission::to_labeled(mission::make_dataset(data)), {});
  std::printf("head train accuracy %.3f\n\n", trained.train_accuracy);

  std::printf("%s,decision_period_s\n", mission::kSummaryCsvHeader);
  for (auto mode : {mission::InferenceMode::Onboard, mission::InferenceMode::Distributed}) {
    mission::MissionConfig cfg = base;
    cfg.mode = mode;
    const auto r = mission::run_mission(cfg, trained.model);
    std::printf("%s,%.3f\n",
                mission::format_summary_row(mission::summary_row(to_string(mode), r)).c_str(),
                r.decision_period);
  }
  return 0;
}
