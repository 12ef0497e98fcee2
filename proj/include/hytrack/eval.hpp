#pragma once

// One-pass evaluation: IoU / center-error traces, success and precision
// curves, AUC and DP@20.
//
// SR(t) counts frames with IoU > t (strict) on t = 0, 0.01, ..., 1.
// PR(e) counts frames with CLE < e (strict) on e = 0, 1, ..., 50 px.
// AUC is the trapezoidal integral of SR over [0, 1]. Because IoU > 1 never
// holds, the t = 1 node uses the left limit of SR (fraction with IoU >= 1);
// a perfect trajectory therefore scores AUC = 1.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"

namespace hytrack::eval {

inline constexpr int kSuccessSteps = 100;   // t step 0.01
inline constexpr int kPrecisionMax = 50;    // px
inline constexpr int kDpThreshold = 20;

inline double success_threshold(int i) { return double(i) / kSuccessSteps; }

struct Curves {
  std::vector<double> success;    // kSuccessSteps + 1 samples
  std::vector<double> precision;  // kPrecisionMax + 1 samples
  double success_left_limit_at_one = 0.0;
  std::size_t frames = 0;
};

inline Curves curves(std::span<const double> ious, std::span<const double> cles) {
  if (ious.empty() || ious.size() != cles.size())
    throw ArgumentError("eval", "curves need equal, non-empty IoU and CLE traces");
  const double n = double(ious.size());
  Curves c;
  c.frames = ious.size();
  c.success.resize(kSuccessSteps + 1);
  c.precision.resize(kPrecisionMax + 1);
  for (int i = 0; i <= kSuccessSteps; ++i) {
    const double t = success_threshold(i);
    c.success[i] = double(std::count_if(ious.begin(), ious.end(), [t](double v) { return v > t; })) / n;
  }
  c.success_left_limit_at_one =
      double(std::count_if(ious.begin(), ious.end(), [](double v) { return v >= 1.0; })) / n;
  for (int e = 0; e <= kPrecisionMax; ++e)
    c.precision[e] =
        double(std::count_if(cles.begin(), cles.end(), [e](double v) { return v < double(e); })) / n;
  return c;
}

inline double auc(const Curves& c) {
  double area = 0.0;
  for (int i = 0; i < kSuccessSteps; ++i) {
    const double right = (i + 1 == kSuccessSteps) ? c.success_left_limit_at_one : c.success[i + 1];
    area += 0.5 * (c.success[i] + right) / kSuccessSteps;
  }
  return std::clamp(area, 0.0, 1.0);
}

inline double dp20(const Curves& c) { return c.precision[kDpThreshold]; }

struct Row {
  std::string name;
  std::size_t frames = 0;
  double auc = 0.0;
  double dp20 = 0.0;
  double fps = 0.0;
};

// FPS = frames / tracking seconds; 0 when no timing is known.
inline Row summarize(const std::string& name, const Curves& c, double seconds) {
  return {name, c.frames, auc(c), dp20(c), seconds > 0.0 ? double(c.frames) / seconds : 0.0};
}

inline std::string format_row(const Row& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%zu,%.3f,%.3f,%.3f", r.name.c_str(), r.frames, r.auc, r.dp20,
                r.fps);
  return buf;
}

inline constexpr const char* kReportHeader = "name,frames,auc,dp20,fps";

struct Trace {
  std::vector<double> ious;
  std::vector<double> cles;
};

inline Trace trace(std::span<const BBox> predicted, std::span<const BBox> groundtruth) {
  if (predicted.size() != groundtruth.size())
    throw DataError("eval", "trajectory has " + std::to_string(predicted.size()) +
                                " frames, ground truth has " + std::to_string(groundtruth.size()));
  Trace t;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    t.ious.push_back(iou(predicted[i], groundtruth[i]));
    t.cles.push_back(cle(predicted[i], groundtruth[i]));
  }
  return t;
}

}  // namespace hytrack::eval
