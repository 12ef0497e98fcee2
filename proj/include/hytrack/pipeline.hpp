#pragma once

// Batch plumbing shared by the command-line tool and the integration tests:
// running a session over a sequence, trajectory CSV files, and directory-level
// evaluation reports.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hytrack/config.hpp"
#include "hytrack/detector.hpp"
#include "hytrack/error.hpp"
#include "hytrack/eval.hpp"
#include "hytrack/sequence.hpp"
#include "hytrack/tracker.hpp"

namespace hytrack {

inline constexpr const char* kTrajectoryHeader = "frame,x,y,w,h,score,source";

inline std::string format_state(const TargetState& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f,%.4f,%.6f,%s", s.frame, s.box.x, s.box.y,
                s.box.w, s.box.h, s.score, to_string(s.source));
  return buf;
}

inline void write_trajectory(const fs::path& path, const std::vector<TargetState>& states) {
  std::ofstream out(path);
  if (!out) throw DataError("tracker", "cannot write " + path.string());
  out << kTrajectoryHeader << '\n';
  for (const auto& s : states) out << format_state(s) << '\n';
}

inline Source parse_source(const std::string& s) {
  if (s == "detection") return Source::detection;
  if (s == "proposal") return Source::proposal;
  if (s == "kalman") return Source::kalman;
  if (s == "groundtruth") return Source::groundtruth;
  throw FormatError("eval", "unknown source tag '" + s + "'");
}

inline std::vector<TargetState> read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("eval", "cannot open " + path.string());
  std::vector<TargetState> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("frame", 0) == 0)) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() < 5)
      throw FormatError("eval", path.string() + ":" + std::to_string(lineno) + ": too few fields");
    try {
      TargetState s;
      s.frame = std::stoul(f[0]);
      s.box = {std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
      if (f.size() > 5) s.score = std::stod(f[5]);
      if (f.size() > 6) s.source = parse_source(f[6]);
      out.push_back(s);
    } catch (const std::logic_error&) {
      throw FormatError("eval", path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

struct TrackResult {
  std::string name;
  std::vector<TargetState> states;
  double seconds = 0.0;  // tracking wall clock, sequence loading excluded
};

// One-pass run: initialize from frame-0 ground truth, then step every frame.
// Frame 0 is reported as the ground-truth box.
inline TrackResult track_sequence(const Sequence& seq, DetectionSource& detector,
                                  const TrackerConfig& cfg,
                                  const std::function<void(const TargetState&)>& on_state = {}) {
  if (seq.groundtruth.empty())
    throw DataError("tracker", seq.name + ": initial ground truth is required");
  std::vector<HSCube> frames;
  frames.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) frames.push_back(seq.frame(i));

  TrackResult result;
  result.name = seq.name;
  const auto t0 = std::chrono::steady_clock::now();
  TrackerSession session(frames.front(), seq.groundtruth.front(), cfg);
  const std::size_t groups = session.ranking().groups.size();
  result.states.push_back(session.previous());
  if (on_state) on_state(result.states.back());
  for (std::size_t i = 1; i < frames.size(); ++i) {
    result.states.push_back(session.step(frames[i], detector.detect(i, groups)));
    if (on_state) on_state(result.states.back());
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Detection source selected on the command line.
inline std::unique_ptr<DetectionSource> make_detector(const Sequence& seq, const RunConfig& cfg,
                                                      const std::string& detections_path,
                                                      bool oracle) {
  if (oracle) {
    if (seq.groundtruth.size() < seq.size())
      throw DataError("detector", seq.name + ": oracle needs ground truth for every frame");
    const auto first = seq.frame(0);
    return std::make_unique<OracleDetector>(seq.groundtruth, cfg.oracle(), double(first.width()),
                                            double(first.height()), cfg.blackout());
  }
  if (!detections_path.empty()) return std::make_unique<JsonlDetections>(fs::path(detections_path));
  throw ConfigError("detector", "select a detection source (--detections FILE or --oracle)");
}

struct EvalInput {
  std::string name;
  std::vector<BBox> predicted;
  std::vector<BBox> groundtruth;
  double seconds = 0.0;
};

struct Report {
  std::vector<eval::Row> rows;
  eval::Row total;
  eval::Curves total_curves;
};

// Per-sequence rows plus a total row computed on the concatenated traces.
inline Report evaluate(const std::vector<EvalInput>& inputs) {
  if (inputs.empty()) throw ArgumentError("eval", "nothing to evaluate");
  Report rep;
  eval::Trace all;
  double seconds = 0.0;
  bool timed = true;
  for (const auto& in : inputs) {
    const auto tr = eval::trace(in.predicted, in.groundtruth);
    rep.rows.push_back(eval::summarize(in.name, eval::curves(tr.ious, tr.cles), in.seconds));
    all.ious.insert(all.ious.end(), tr.ious.begin(), tr.ious.end());
    all.cles.insert(all.cles.end(), tr.cles.begin(), tr.cles.end());
    seconds += in.seconds;
    timed = timed && in.seconds > 0.0;
  }
  rep.total_curves = eval::curves(all.ious, all.cles);
  rep.total = eval::summarize("Total", rep.total_curves, timed ? seconds : 0.0);
  return rep;
}

inline void write_report(const fs::path& path, const Report& rep) {
  std::ofstream out(path);
  if (!out) throw DataError("eval", "cannot write " + path.string());
  out << eval::kReportHeader << '\n';
  for (const auto& r : rep.rows) out << eval::format_row(r) << '\n';
  out << eval::format_row(rep.total) << '\n';
}

// Columns kind,threshold,value for the total success (tau) and precision (eta) curves.
inline void write_curves(const fs::path& path, const eval::Curves& c) {
  std::ofstream out(path);
  if (!out) throw DataError("eval", "cannot write " + path.string());
  out << "kind,threshold,value\n";
  char buf[128];
  for (int i = 0; i <= eval::kSuccessSteps; ++i) {
    std::snprintf(buf, sizeof buf, "tau,%.2f,%.6f\n", eval::success_threshold(i), c.success[i]);
    out << buf;
  }
  for (int e = 0; e <= eval::kPrecisionMax; ++e) {
    std::snprintf(buf, sizeof buf, "eta,%d,%.6f\n", e, c.precision[e]);
    out << buf;
  }
}

// Ground truth for `name` under `gt_dir`: <name>/groundtruth_rect.txt or <name>.txt.
inline std::vector<BBox> find_groundtruth(const fs::path& gt_dir, const std::string& name) {
  for (const auto& p : {gt_dir / name / "groundtruth_rect.txt", gt_dir / (name + ".txt")})
    if (fs::exists(p)) return read_groundtruth(p);
  throw DataError("eval", "no ground truth for sequence '" + name + "' under " + gt_dir.string());
}

// Every <name>.csv in `results_dir` that starts with the trajectory header
// (report and curve CSVs may share the directory); timing comes from run.json
// when present.
inline std::vector<EvalInput> collect_results(const fs::path& results_dir, const fs::path& gt_dir) {
  if (!fs::is_directory(results_dir)) throw DataError("eval", results_dir.string() + " is not a directory");
  nlohmann::json timing = nlohmann::json::object();
  if (const auto manifest = results_dir / "run.json"; fs::exists(manifest)) {
    try {
      std::ifstream in(manifest);
      const auto j = nlohmann::json::parse(in);
      if (j.contains("timing")) timing = j["timing"];
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("eval", manifest.string() + ": " + e.what());
    }
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(results_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream in(e.path());
    std::string header;
    std::getline(in, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header == kTrajectoryHeader) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalInput> out;
  for (const auto& f : files) {
    EvalInput in;
    in.name = f.stem().string();
    for (const auto& s : read_trajectory(f)) in.predicted.push_back(s.box);
    in.groundtruth = find_groundtruth(gt_dir, in.name);
    if (in.groundtruth.size() > in.predicted.size()) in.groundtruth.resize(in.predicted.size());
    if (timing.contains(in.name)) in.seconds = timing[in.name].get<double>();
    out.push_back(std::move(in));
  }
  if (out.empty()) throw DataError("eval", "no trajectory files in " + results_dir.string());
  return out;
}

}  // namespace hytrack
