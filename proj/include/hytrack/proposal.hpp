#pragma once

// Gaussian candidate boxes around the previous target state.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/rng.hpp"

namespace hytrack {

enum class Source { detection, proposal, kalman, groundtruth };

inline const char* to_string(Source s) {
  switch (s) {
    case Source::detection: return "detection";
    case Source::proposal: return "proposal";
    case Source::kalman: return "kalman";
    case Source::groundtruth: return "groundtruth";
  }
  return "?";
}

struct Candidate {
  BBox box;
  Source source = Source::proposal;
  double score = 0.0;
};

struct ProposalConfig {
  int count = 256;
  double cov_xy_coeff = 0.09;  // variance of dx, dy in units of r^2
  double cov_scale = 0.25;     // variance of the scale exponent
  double scale_base = 1.05;

  void validate() const {
    if (count < 0) throw ArgumentError("proposal", "count must be >= 0");
    if (!(cov_xy_coeff > 0.0) || !(cov_scale > 0.0) || !(scale_base > 0.0))
      throw ArgumentError("proposal", "covariance and scale coefficients must be > 0");
  }
};

// Shift the center by (dx, dy) and scale both sides by scale_base^sc.
inline BBox perturb_box(const BBox& prev, double dx, double dy, double sc, double scale_base) {
  const double s = std::pow(scale_base, sc);
  return BBox::from_center(prev.cx() + dx, prev.cy() + dy, prev.w * s, prev.h * s);
}

// (dx, dy, sc) ~ N(0, diag(c*r^2, c*r^2, cov_scale)) with r = (w + h) / 2.
inline std::vector<Candidate> sample_candidates(const BBox& prev, const ProposalConfig& cfg,
                                                Rng& rng) {
  if (!prev.valid()) throw ArgumentError("proposal", "previous box is not valid");
  cfg.validate();
  const double r = 0.5 * (prev.w + prev.h);
  const double sigma_xy = std::sqrt(cfg.cov_xy_coeff) * r;
  const double sigma_sc = std::sqrt(cfg.cov_scale);
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    const double dx = normal(rng, 0.0, sigma_xy);
    const double dy = normal(rng, 0.0, sigma_xy);
    const double sc = normal(rng, 0.0, sigma_sc);
    out.push_back({perturb_box(prev, dx, dy, sc, cfg.scale_base), Source::proposal, 0.0});
  }
  return out;
}

}  // namespace hytrack
