#pragma once

// Detection sources. The tracker only sees the DetectionSource interface; two
// implementations ship: a JSON-lines reader for precomputed detections and a
// noisy ground-truth oracle used as a test double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/rng.hpp"

namespace hytrack {

struct Detection {
  std::size_t frame = 0;
  std::size_t group = 0;
  BBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

class DetectionSource {
 public:
  virtual ~DetectionSource() = default;
  virtual std::vector<Detection> detect(std::size_t frame_index, std::size_t groups) = 0;
};

// ---------------------------------------------------------------------------
// JSON lines: first line {"sequence": name, "frames": N}, then one record per
// detection {"frame", "group", "x", "y", "w", "h", "conf"}.

inline nlohmann::json detection_to_json(const Detection& d) {
  return {{"frame", d.frame}, {"group", d.group}, {"x", d.box.x}, {"y", d.box.y},
          {"w", d.box.w},     {"h", d.box.h},     {"conf", d.confidence}};
}

inline void write_detections(std::ostream& out, const std::string& sequence, std::size_t frames,
                             const std::vector<Detection>& dets) {
  out << nlohmann::json{{"sequence", sequence}, {"frames", frames}}.dump() << '\n';
  for (const auto& d : dets) out << detection_to_json(d).dump() << '\n';
}

class JsonlDetections final : public DetectionSource {
 public:
  explicit JsonlDetections(std::istream& in) { parse(in); }

  explicit JsonlDetections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("detector", "cannot open " + path.string());
    parse(in);
  }

  const std::string& sequence() const { return sequence_; }
  std::size_t frames() const { return frames_; }

  // Frames inside the header range without records have no detections.
  std::vector<Detection> detect(std::size_t frame_index, std::size_t groups) override {
    if (frame_index >= frames_)
      throw DataError("detector", "frame " + std::to_string(frame_index) +
                                      " beyond detections file range (" +
                                      std::to_string(frames_) + " frames)");
    std::vector<Detection> out;
    auto it = index_.find(frame_index);
    if (it == index_.end()) return out;
    for (const auto& d : it->second)
      if (groups == 0 || d.group < groups) out.push_back(d);
    return out;
  }

 private:
  void parse(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("detector", "line " + std::to_string(lineno) + ": " + e.what());
      }
      if (!have_header) {
        if (!j.contains("frames"))
          throw FormatError("detector", "first line must be a header with \"frames\"");
        sequence_ = j.value("sequence", std::string{});
        frames_ = j["frames"].get<std::size_t>();
        have_header = true;
        continue;
      }
      try {
        Detection d;
        d.frame = j.at("frame").get<std::size_t>();
        d.group = j.value("group", std::size_t{0});
        d.box = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
                 j.at("h").get<double>()};
        d.confidence = j.value("conf", 1.0);
        if (!d.box.valid() || !(d.confidence >= 0.0 && d.confidence <= 1.0))
          throw FormatError("detector", "line " + std::to_string(lineno) +
                                            ": invalid box or confidence");
        index_[d.frame].push_back(d);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("detector", "line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    if (!have_header) throw FormatError("detector", "empty detections file");
  }

  std::string sequence_;
  std::size_t frames_ = 0;
  std::map<std::size_t, std::vector<Detection>> index_;
};

// ---------------------------------------------------------------------------
// Ground-truth oracle.

struct OracleNoise {
  double center_sigma = 2.0;     // px, per axis
  double size_sigma = 0.02;      // log-scale stddev of w and h
  double miss_prob = 0.1;
  double fp_rate = 0.0;          // expected false positives per call
  double confidence_base = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(center_sigma >= 0.0) || !(size_sigma >= 0.0))
      throw ArgumentError("detector", "oracle sigmas must be >= 0");
    if (!(miss_prob >= 0.0 && miss_prob <= 1.0) ||
        !(confidence_base >= 0.0 && confidence_base <= 1.0))
      throw ArgumentError("detector", "oracle probabilities must lie in [0, 1]");
    if (!(fp_rate >= 0.0)) throw ArgumentError("detector", "oracle fp_rate must be >= 0");
  }
};

// Confidence loses 0.01 per pixel of center jitter and 0.1 per unit of
// absolute log-size jitter.
inline std::vector<Detection> oracle_detect(const BBox& gt, const OracleNoise& noise, Rng& rng,
                                            double frame_width, double frame_height,
                                            std::size_t frame = 0, std::size_t group = 0) {
  std::vector<Detection> out;
  const bool hit = std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= noise.miss_prob;
  if (hit) {
    const double dx = normal(rng, 0.0, noise.center_sigma);
    const double dy = normal(rng, 0.0, noise.center_sigma);
    const double lw = normal(rng, 0.0, noise.size_sigma);
    const double lh = normal(rng, 0.0, noise.size_sigma);
    Detection d;
    d.frame = frame;
    d.group = group;
    d.box = BBox::from_center(gt.cx() + dx, gt.cy() + dy, gt.w * std::exp(lw), gt.h * std::exp(lh));
    const double penalty = 0.01 * std::hypot(dx, dy) + 0.1 * (std::abs(lw) + std::abs(lh));
    d.confidence = std::clamp(noise.confidence_base - penalty, 0.0, 1.0);
    out.push_back(d);
  }
  if (noise.fp_rate > 0.0) {
    const int n_fp = std::poisson_distribution<int>(noise.fp_rate)(rng);
    for (int i = 0; i < n_fp; ++i) {
      const double s = std::exp(normal(rng, 0.0, 0.3));
      Detection d;
      d.frame = frame;
      d.group = group;
      d.box = BBox::from_center(uniform(rng, 0.0, frame_width), uniform(rng, 0.0, frame_height),
                                gt.w * s, gt.h * s);
      d.confidence = uniform(rng, 0.0, noise.confidence_base);
      out.push_back(d);
    }
  }
  return out;
}

// Optional scripted detector outage: inside [blackout_first, blackout_last]
// the true detection is withheld and, if inject_scale > 0, replaced by a
// gt-centered box rescaled by inject_scale.
struct Blackout {
  long first = -1;
  long last = -1;
  double inject_scale = 0.0;

  bool covers(std::size_t frame) const {
    return first >= 0 && long(frame) >= first && long(frame) <= last;
  }
};

class OracleDetector final : public DetectionSource {
 public:
  OracleDetector(std::vector<BBox> groundtruth, OracleNoise noise, double frame_width,
                 double frame_height, Blackout blackout = {})
      : gt_(std::move(groundtruth)),
        noise_(noise),
        blackout_(blackout),
        fw_(frame_width),
        fh_(frame_height),
        rng_(make_rng(noise.seed, Stream::oracle)) {
    noise_.validate();
  }

  std::vector<Detection> detect(std::size_t frame_index, std::size_t groups) override {
    if (frame_index >= gt_.size())
      throw DataError("detector", "oracle has no ground truth for frame " +
                                      std::to_string(frame_index));
    std::vector<Detection> out;
    const BBox& gt = gt_[frame_index];
    for (std::size_t g = 0; g < std::max<std::size_t>(groups, 1); ++g) {
      auto dets = oracle_detect(gt, noise_, rng_, fw_, fh_, frame_index, g);
      if (blackout_.covers(frame_index)) {
        dets.clear();
        if (blackout_.inject_scale > 0.0)
          dets.push_back({frame_index, g,
                          BBox::from_center(gt.cx(), gt.cy(), gt.w * blackout_.inject_scale,
                                            gt.h * blackout_.inject_scale),
                          noise_.confidence_base});
      }
      out.insert(out.end(), dets.begin(), dets.end());
    }
    return out;
  }

 private:
  std::vector<BBox> gt_;
  OracleNoise noise_;
  Blackout blackout_;
  double fw_, fh_;
  Rng rng_;
};

}  // namespace hytrack
