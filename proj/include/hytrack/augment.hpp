#pragma once

// Gaussian cut-paste augmentation: copies of the first frame with the target
// block pasted at positions drawn from an axis-aligned 2-D Gaussian.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/hsio.hpp"
#include "hytrack/rng.hpp"

namespace hytrack::augment {

struct AugmentParams {
  double mu_p = 0.0;     // paste-center mean, x
  double mu_q = 0.0;     // paste-center mean, y
  double sigma_p = 1.0;
  double sigma_q = 1.0;
  int count = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma_p > 0.0) || !(sigma_q > 0.0))
      throw ArgumentError("augment", "sigmas must be > 0");
    if (count < 1) throw ArgumentError("augment", "sample count must be >= 1");
  }
};

// Mean at the object center, sigma a quarter of the frame per axis.
inline AugmentParams default_params(std::size_t frame_width, std::size_t frame_height,
                                    const BBox& gt, int count = 500, std::uint64_t seed = 0) {
  return {gt.cx(), gt.cy(), double(frame_width) / 4.0, double(frame_height) / 4.0, count, seed};
}

inline double gaussian_pdf(double p, double q, const AugmentParams& a) {
  const double dp = (p - a.mu_p) / a.sigma_p;
  const double dq = (q - a.mu_q) / a.sigma_q;
  return std::exp(-0.5 * (dp * dp + dq * dq)) / (2.0 * std::numbers::pi * a.sigma_p * a.sigma_q);
}

struct Sample {
  HSCube image;
  BBox label;
  double center_p = 0.0;  // sampled paste center before clamping
  double center_q = 0.0;
};

namespace detail {

struct Block {
  long x, y, w, h;
};

inline Block object_block(const HSCube& frame, const BBox& gt) {
  if (!gt.valid()) throw ArgumentError("augment", "ground-truth box is not valid");
  const auto W = long(frame.width()), H = long(frame.height());
  const Block b{std::lround(gt.x), std::lround(gt.y), std::max(1L, std::lround(gt.w)),
                std::max(1L, std::lround(gt.h))};
  if (b.w > W || b.h > H) throw GeometryError("augment", "object is larger than the frame");
  if (b.x < 0 || b.y < 0 || b.x + b.w > W || b.y + b.h > H)
    throw ArgumentError("augment", "ground-truth box must lie inside the frame");
  return b;
}

}  // namespace detail

// Sample `index` of the set; each index owns a derived random stream so
// samples can be produced independently and in any order.
inline Sample synthesize_one(const HSCube& first, const BBox& gt, const AugmentParams& params,
                             std::size_t index) {
  params.validate();
  const auto src = detail::object_block(first, gt);
  Rng rng = make_rng(mix_seed(params.seed) + index, Stream::augment);
  Sample s;
  s.center_p = normal(rng, params.mu_p, params.sigma_p);
  s.center_q = normal(rng, params.mu_q, params.sigma_q);
  const long W = long(first.width()), H = long(first.height());
  const long tx = std::clamp(std::lround(s.center_p - 0.5 * double(src.w)), 0L, W - src.w);
  const long ty = std::clamp(std::lround(s.center_q - 0.5 * double(src.h)), 0L, H - src.h);
  s.image = first;
  for (std::size_t b = 0; b < first.bands(); ++b)
    for (long r = 0; r < src.h; ++r)
      for (long c = 0; c < src.w; ++c)
        s.image.at(b, std::size_t(ty + r), std::size_t(tx + c)) =
            first.at(b, std::size_t(src.y + r), std::size_t(src.x + c));
  s.label = {double(tx), double(ty), double(src.w), double(src.h)};
  return s;
}

inline std::vector<Sample> synthesize(const HSCube& first, const BBox& gt,
                                      const AugmentParams& params) {
  params.validate();
  std::vector<Sample> out;
  out.reserve(std::size_t(params.count));
  for (int i = 0; i < params.count; ++i) out.push_back(synthesize_one(first, gt, params, std::size_t(i)));
  return out;
}

}  // namespace hytrack::augment
