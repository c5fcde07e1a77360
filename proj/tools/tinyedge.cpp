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

// Command-line front end: train, quantize, infer, simulate, mission, report,
// plus dataset/graph/serve helpers.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "tinyedge/link/udp.hpp"
#include "tinyedge/mission/config.hpp"
#include "tinyedge/mission/mission.hpp"
#include "tinyedge/mission/report.hpp"
#include "tinyedge/mission/scene.hpp"
#include "tinyedge/nn/footprint.hpp"
#include "tinyedge/nn/mobilenet.hpp"
#include "tinyedge/nn/model_io.hpp"
#include "tinyedge/nn/train.hpp"
#include "tinyedge/quantizer.hpp"
#include "tinyedge/sim/drone.hpp"

namespace fs = std::filesystem;
using namespace tinyedge;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::optional<double> dt;
  std::string out;
};

// ---------------------------------------------------------------- frames

// Binary PPM (P6, maxval 255) of exactly kFrameSize x kFrameSize.
void write_ppm(const fs::path& path, const mission::Frame& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << "P6\n" << mission::kFrameSize << ' ' << mission::kFrameSize << "\n255\n";
  os.write(reinterpret_cast<const char*>(f.pixels.data()),
           static_cast<std::streamsize>(f.pixels.size()));
}

mission::Frame read_ppm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read frame '" + path.string() + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || w != mission::kFrameSize || h != mission::kFrameSize || maxval != 255) {
    throw ParseError(0, path.string() + ": expected a 96x96 binary PPM");
  }
  is.get();
  mission::Frame f;
  is.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
  if (is.gcount() != static_cast<std::streamsize>(f.pixels.size())) {
    throw ParseError(static_cast<std::size_t>(is.gcount()), path.string() + ": truncated pixels");
  }
  return f;
}

// ---------------------------------------------------------------- models

struct TrainSettings {
  std::size_t frames = 200;
  int epochs = 50;
  double lr = 0.1;
};

nn::ModelGraph default_backbone(std::uint64_t seed) {
  nn::ModelGraph m = nn::build_mobilenet_v2();
  nn::initialize_weights(m, seed);
  return m;
}

nn::TrainResult train_default(std::uint64_t seed, const TrainSettings& s) {
  mission::DatasetOptions o;
  o.count = s.frames;
  o.seed = derive_seed(seed, 0xda7a);
  const auto data = mission::to_labeled(mission::make_dataset(o));
  nn::TrainOptions t;
  t.learning_rate = s.lr;
  t.epochs = s.epochs;
  t.seed = seed;
  return nn::train_head(default_backbone(seed), data, t);
}

std::vector<Tensor> calibration_images(std::uint64_t seed, std::size_t n) {
  mission::DatasetOptions o;
  o.count = n;
  o.seed = derive_seed(seed, 0xca1);
  std::vector<Tensor> out;
  for (const auto& f : mission::make_dataset(o)) out.push_back(mission::to_tensor(f));
  return out;
}

fs::path out_dir(const Globals& g, const char* fallback) {
  return g.out.empty() ? fs::path(fallback) : fs::path(g.out);
}

// ------------------------------------------------------------- subcommands

int cmd_train(const Globals& g, const TrainSettings& s) {
  const nn::TrainResult r = train_default(g.seed, s);
  const fs::path path = g.out.empty() ? fs::path("model.twng") : fs::path(g.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  nn::save_model(r.model, path);
  std::printf("model=%s train_accuracy=%.4f final_loss=%.6f\n", path.string().c_str(),
              r.train_accuracy, r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back());
  return 0;
}

int cmd_quantize(const Globals& g, const std::string& model_path, std::size_t calib) {
  const nn::ModelGraph real =
      model_path.empty() ? default_backbone(g.seed) : nn::load_model(model_path);
  const auto images = calibration_images(g.seed, calib);
  const auto profile = quant::calibrate(real, images);
  const nn::ModelGraph q = quant::quantize_model(real, profile);
  const auto fr = nn::memory_footprint(real);
  const auto fq = nn::memory_footprint(q);
  std::printf("real32 flash_bytes=%zu ram_peak_bytes=%zu\n", fr.flash_bytes, fr.ram_peak_bytes);
  std::printf("int8 flash_bytes=%zu ram_peak_bytes=%zu\n", fq.flash_bytes, fq.ram_peak_bytes);
  std::printf("flash_ratio=%.4f weight_payload_ratio=%.4f\n",
              static_cast<double>(fq.flash_bytes) / static_cast<double>(fr.flash_bytes),
              static_cast<double>(nn::weight_payload_bytes(q)) /
                  static_cast<double>(nn::weight_payload_bytes(real)));
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    const fs::path path = fs::path(g.out) / "model_int8.twng";
    nn::save_model(q, path);
    std::printf("model=%s\n", path.string().c_str());
  }
  return 0;
}

int cmd_infer(const std::string& model_path, const std::string& frame_path) {
  const nn::ModelGraph m = nn::load_model(model_path);
  const mission::Frame f = read_ppm(frame_path);
  const auto probs = nn::run_inference(m, mission::to_tensor(f));
  const int k = nn::argmax(probs);
  std::printf("label=%s confidence=%.4f\n", quant::label_name(k), probs[k]);
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& payload, const std::string& state) {
  const auto p = sim::parse_payload(payload);
  const auto s = sim::parse_flight_state(state);
  const auto r = sim::endurance_run(p, s, g.dt.value_or(0.05));
  std::printf("payload=%s state=%s endurance_s=%.0f energy_j=%.1f ticks=%zu\n",
              sim::to_string(p), sim::to_string(s), r.endurance_s, r.energy_j,
              static_cast<std::size_t>(r.ticks));
  return 0;
}

int cmd_mission(const Globals& g, const std::string& config_path, const std::string& model_path,
                int repeat, bool plots, const TrainSettings& ts) {
  mission::MissionConfig cfg = mission::load_config(config_path);
  if (g.dt) {
    cfg.dt = *g.dt;
    cfg.validate();
  }
  if (g.seed != 1) cfg.seed = g.seed;
  const std::string path = model_path.empty() ? cfg.model_path : model_path;
  const nn::ModelGraph model = path.empty() ? train_default(cfg.seed, ts).model : nn::load_model(path);
  const fs::path dir = out_dir(g, "mission_out");
  const mission::ExportOptions opt{plots};
  if (repeat > 1) {
    const auto b = mission::run_repeated(cfg, model, repeat, dir, opt);
    std::printf("%s\n%s\n", mission::kSummaryCsvHeader,
                mission::format_summary_row(b.mean, false).c_str());
  } else {
    const auto r = mission::run_mission(cfg, model);
    mission::export_report(r, dir, "0", opt);
    std::printf("%s\n%s\nend_reason=%s\n", mission::kSummaryCsvHeader,
                mission::format_summary_row(mission::summary_row("0", r)).c_str(),
                r.end_reason.c_str());
  }
  return 0;
}

int cmd_report(const std::string& dir) {
  std::fputs(mission::aggregate_reports(dir).c_str(), stdout);
  return 0;
}

int cmd_dataset(const Globals& g, std::size_t count) {
  mission::DatasetOptions o;
  o.count = count;
  o.seed = g.seed;
  const fs::path dir = out_dir(g, "frames");
  fs::create_directories(dir);
  std::ofstream labels(dir / "labels.csv");
  labels << "file,label\n";
  const auto frames = mission::make_dataset(o);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.ppm", i);
    write_ppm(dir / name, frames[i]);
    labels << name << ',' << mission::to_string(frames[i].truth[0].label) << '\n';
  }
  std::printf("frames=%zu dir=%s\n", frames.size(), dir.string().c_str());
  return 0;
}

int cmd_graph(const std::string& model_path) {
  const nn::ModelGraph m = model_path.empty() ? nn::build_mobilenet_v2() : nn::load_model(model_path);
  std::fputs(nn::dump_graph(m).c_str(), stdout);
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;

int cmd_serve(const Globals& g, const std::string& payload, int port, double seconds) {
  sim::Drone drone(sim::parse_payload(payload));
  link::LinkConfig cfg;
  cfg.control_port = port;
  link::UdpServer server(drone, cfg, g.seed, /*realtime=*/true, "0.0.0.0");
  std::signal(SIGINT, [](int) { g_stop = 1; });
  server.start();
  std::printf("listening control_port=%d state_port=%d\n", server.control_port(), cfg.state_port);
  std::fflush(stdout);
  const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
  while (!g_stop && (seconds <= 0 || std::chrono::steady_clock::now() < until)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TinyEdge: int8 inference and drone mission simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--dt", g.dt, "simulation step in seconds")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output file or directory");

  TrainSettings ts;
  auto* train = app.add_subcommand("train", "build, head-train and save the default model");
  train->add_option("--frames", ts.frames, "training frames")->capture_default_str();
  train->add_option("--epochs", ts.epochs, "head epochs")->capture_default_str();
  train->add_option("--lr", ts.lr, "head learning rate")->capture_default_str();

  std::string model_path;
  std::size_t calib = 20;
  auto* quantize = app.add_subcommand("quantize", "calibrate, convert to int8 and report footprint");
  quantize->add_option("model", model_path, "Real32 model (default: seeded backbone)");
  quantize->add_option("--calibration-frames", calib, "calibration frames")->capture_default_str();

  std::string frame_path;
  auto* infer = app.add_subcommand("infer", "classify one 96x96 PPM frame");
  infer->add_option("model", model_path, "model file")->required();
  infer->add_option("frame", frame_path, "frame (binary PPM)")->required();

  std::string payload = "openmv", state = "hover";
  auto* simulate = app.add_subcommand("simulate", "fly until depletion in one state");
  simulate->add_option("--payload", payload, "none|arduino|openmv|distributed")->capture_default_str();
  simulate->add_option("--state", state, "idle|hover|maneuver")->capture_default_str();

  std::string config_path;
  int repeat = 1;
  bool plots = false;
  auto* mission_cmd = app.add_subcommand("mission", "run the full detect/track/classify loop");
  mission_cmd->add_option("--config", config_path, "key=value config file")->required();
  mission_cmd->add_option("--model", model_path, "model file (default: train one)");
  mission_cmd->add_option("--repeat", repeat, "independent runs")->check(CLI::PositiveNumber);
  mission_cmd->add_flag("--plots", plots, "write SVG plots");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "aggregate summary.csv files under a directory");
  report->add_option("dir", report_dir, "directory")->required();

  std::size_t count = 100;
  auto* dataset = app.add_subcommand("dataset", "write synthetic frames as PPM files");
  dataset->add_option("--count", count, "frames")->capture_default_str();

  auto* graph = app.add_subcommand("graph", "print the layer table of a model");
  graph->add_option("model", model_path, "model file (default: untrained backbone)");

  int port = 8889;
  double seconds = 0.0;
  auto* serve = app.add_subcommand("serve", "serve the text protocol over UDP in real time");
  serve->add_option("--payload", payload, "payload")->capture_default_str();
  serve->add_option("--port", port, "control port")->capture_default_str();
  serve->add_option("--seconds", seconds, "stop after this long (0: until interrupted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n' << "Usage: see '" << app.get_name()
              << " --help'\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(g, ts);
    if (*quantize) return cmd_quantize(g, model_path, calib);
    if (*infer) return cmd_infer(model_path, frame_path);
    if (*simulate) return cmd_simulate(g, payload, state);
    if (*mission_cmd) return cmd_mission(g, config_path, model_path, repeat, plots, ts);
    if (*report) return cmd_report(report_dir);
    if (*dataset) return cmd_dataset(g, count);
    if (*graph) return cmd_graph(model_path);
    if (*serve) return cmd_serve(g, payload, port, seconds);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: parse offset=%zu: %s\n", e.offset(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
