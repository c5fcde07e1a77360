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

// CSV and SVG export of mission reports, the seeded repeat runner and the
// aggregation behind the report subcommand.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tinyedge/error.hpp"
#include "tinyedge/mission/mission.hpp"
#include "tinyedge/rng.hpp"

namespace tinyedge::mission {

namespace fs = std::filesystem;

inline constexpr const char* kSummaryCsvHeader =
    "run_id,payload,mode,flight_time_s,energy_j,targets,correct,accuracy";
inline constexpr const char* kTimelineCsvHeader = "t,x,y,z,state,energy_j,event";
inline constexpr const char* kConfusionCsvHeader = "truth,pred_mask,pred_no_mask";

struct SummaryRow {
  std::string run_id;
  std::string payload;
  std::string mode;
  double flight_time_s = 0.0;
  double energy_j = 0.0;
  double targets = 0.0;
  double correct = 0.0;
  double accuracy = 0.0;
};

inline SummaryRow summary_row(const std::string& run_id, const MissionReport& r) {
  return {run_id,
          r.payload,
          r.mode,
          r.flight_time,
          r.energy_used,
          static_cast<double>(r.targets()),
          static_cast<double>(r.correct()),
          r.accuracy()};
}

inline std::string format_summary_row(const SummaryRow& s, bool integral_counts = true) {
  char buf[256];
  if (integral_counts) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.2f,%.1f,%.0f,%.0f,%.4f", s.run_id.c_str(),
                  s.payload.c_str(), s.mode.c_str(), s.flight_time_s, s.energy_j, s.targets,
                  s.correct, s.accuracy);
  } else {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.2f,%.1f,%.2f,%.2f,%.4f", s.run_id.c_str(),
                  s.payload.c_str(), s.mode.c_str(), s.flight_time_s, s.energy_j, s.targets,
                  s.correct, s.accuracy);
  }
  return buf;
}

inline SummaryRow mean_row(const std::vector<SummaryRow>& rows) {
  if (rows.empty()) throw InvalidArgument("no rows to average");
  SummaryRow m;
  m.run_id = "mean";
  m.payload = rows.front().payload;
  m.mode = rows.front().mode;
  for (const auto& r : rows) {
    if (r.payload != m.payload) m.payload = "mixed";
    if (r.mode != m.mode) m.mode = "mixed";
    m.flight_time_s += r.flight_time_s;
    m.energy_j += r.energy_j;
    m.targets += r.targets;
    m.correct += r.correct;
    m.accuracy += r.accuracy;
  }
  const double n = static_cast<double>(rows.size());
  m.flight_time_s /= n;
  m.energy_j /= n;
  m.targets /= n;
  m.correct /= n;
  m.accuracy /= n;
  return m;
}

inline std::string timeline_csv(const MissionReport& r) {
  std::ostringstream os;
  os << kTimelineCsvHeader << '\n';
  char buf[320];
  for (const auto& t : r.timeline) {
    std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.3f,%.3f,%s,%.3f,%s\n", t.t, t.position.x,
                  t.position.y, t.position.z, sim::to_string(t.state), t.energy_j,
                  t.event.c_str());
    os << buf;
  }
  return os.str();
}

inline std::string confusion_csv(const std::array<std::array<std::size_t, 2>, 2>& m) {
  std::ostringstream os;
  os << kConfusionCsvHeader << '\n'
     << "mask," << m[0][0] << ',' << m[0][1] << '\n'
     << "no_mask," << m[1][0] << ',' << m[1][1] << '\n';
  return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create directory '" + dir.string() + "'");
}

// Simple polyline plot, one series.
inline std::string svg_polyline(const std::vector<std::pair<double, double>>& pts,
                                const std::string& title, const std::string& xlabel,
                                const std::string& ylabel) {
  constexpr double W = 640, H = 400, M = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    y0 = y1 = pts[0].second;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y1 = y0 + 1;
  std::ostringstream os;
  char buf[96];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\">\n"
     << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n"
     << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n"
     << "<text x=\"320\" y=\"390\" text-anchor=\"middle\" font-size=\"12\">" << xlabel
     << "</text>\n"
     << "<text x=\"14\" y=\"200\" font-size=\"12\" transform=\"rotate(-90 14 200)\" "
        "text-anchor=\"middle\">"
     << ylabel << "</text>\n"
     << "<rect x=\"50\" y=\"50\" width=\"540\" height=\"300\" fill=\"none\" stroke=\"black\"/>\n"
     << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) {
    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", M + (x - x0) / (x1 - x0) * (W - 2 * M),
                  H - M - (y - y0) / (y1 - y0) * (H - 2 * M));
    os << buf;
  }
  os << "\"/>\n</svg>\n";
  return os.str();
}

struct ExportOptions {
  bool plots = false;
};

// Writes summary.csv (one row), timeline.csv and confusion.csv into dir.
inline void export_report(const MissionReport& r, const fs::path& dir,
                          const std::string& run_id = "0", const ExportOptions& opt = {}) {
  ensure_directory(dir);
  write_text(dir / "summary.csv", std::string(kSummaryCsvHeader) + "\n" +
                                      format_summary_row(summary_row(run_id, r)) + "\n");
  write_text(dir / "timeline.csv", timeline_csv(r));
  write_text(dir / "confusion.csv", confusion_csv(r.confusion));
  if (opt.plots) {
    std::vector<std::pair<double, double>> energy, path;
    for (const auto& t : r.timeline) {
      energy.emplace_back(t.t, t.energy_j / 1000.0);
      path.emplace_back(t.position.x, t.position.y);
    }
    write_text(dir / "energy.svg", svg_polyline(energy, "Remaining energy", "time (s)", "kJ"));
    write_text(dir / "trajectory.svg", svg_polyline(path, "Ground track", "x (m)", "y (m)"));
  }
}

struct BatchResult {
  std::vector<MissionReport> reports;
  std::vector<SummaryRow> rows;
  SummaryRow mean;
};

// Runs n missions with seeds derived from cfg.seed. Writes summary.csv with
// n rows plus a mean row, timeline_<i>.csv per run and the pooled
// confusion.csv.
inline BatchResult run_repeated(const MissionConfig& cfg, const nn::ModelGraph& model, int n,
                                const fs::path& dir, const ExportOptions& opt = {}) {
  if (n < 1) throw InvalidArgument("repeat count must be >= 1");
  ensure_directory(dir);
  BatchResult b;
  std::array<std::array<std::size_t, 2>, 2> pooled{};
  std::string summary = std::string(kSummaryCsvHeader) + "\n";
  for (int i = 0; i < n; ++i) {
    MissionConfig c = cfg;
    c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    MissionReport r = run_mission(c, model);
    const SummaryRow row = summary_row(std::to_string(i), r);
    summary += format_summary_row(row) + "\n";
    write_text(dir / ("timeline_" + std::to_string(i) + ".csv"), timeline_csv(r));
    for (int t = 0; t < 2; ++t) {
      for (int p = 0; p < 2; ++p) pooled[t][p] += r.confusion[t][p];
    }
    if (opt.plots && i == 0) export_report(r, dir / "run_0", "0", opt);
    b.rows.push_back(row);
    b.reports.push_back(std::move(r));
  }
  b.mean = mean_row(b.rows);
  summary += format_summary_row(b.mean, false) + "\n";
  write_text(dir / "summary.csv", summary);
  write_text(dir / "confusion.csv", confusion_csv(pooled));
  return b;
}

// Reads the data rows of a summary CSV, skipping mean rows.
inline std::vector<SummaryRow> read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line != kSummaryCsvHeader) throw ParseError(0, path.string() + ": unexpected header");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw ParseError(0, path.string() + ": expected 8 columns");
    if (f[0] == "mean") continue;
    try {
      rows.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                      std::stod(f[6]), std::stod(f[7])});
    } catch (const std::exception&) {
      throw ParseError(0, path.string() + ": bad number in row '" + f[0] + "'");
    }
  }
  return rows;
}

// Every summary.csv below dir, pooled into one table with a mean row.
inline std::string aggregate_reports(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory '" + dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "summary.csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SummaryRow> rows;
  for (const auto& f : files) {
    auto r = read_summary(f);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (rows.empty()) throw Error("no summary rows under '" + dir.string() + "'");
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& r : rows) out += format_summary_row(r) + "\n";
  out += format_summary_row(mean_row(rows), false) + "\n";
  return out;
}

}  // namespace tinyedge::mission
