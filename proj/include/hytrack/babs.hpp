#pragma once

// Background-aware band selection: score every band by how differently the
// object and its surrounding ring correlate with the other bands, then
// regroup the ranked bands into pseudo-color triples.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/hsio.hpp"

namespace hytrack::babs {

struct RegionPair {
  std::vector<double> object_vec;
  std::vector<double> neighborhood_vec;
  std::size_t band = 0;
};

struct BandRanking {
  std::vector<double> scores;
  std::vector<std::size_t> order;
  std::vector<std::array<std::size_t, 3>> groups;
};

// Zero-norm input yields 0 rather than NaN.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw ArgumentError("babs", "cosine similarity needs equal, non-empty lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Default ring thickness: max(4, round(min(w, h) / 2)).
inline int default_pad(const BBox& gt) {
  return std::max(4, static_cast<int>(std::lround(0.5 * std::min(gt.w, gt.h))));
}

namespace detail {

struct PixelRect {
  long r0, r1, c0, c1;  // half-open
  bool contains(long r, long c) const { return r >= r0 && r < r1 && c >= c0 && c < c1; }
  bool empty() const { return r1 <= r0 || c1 <= c0; }
};

inline PixelRect clip_rect(const BBox& b, long inflate, long height, long width) {
  return {std::clamp(std::lround(b.y) - inflate, 0L, height),
          std::clamp(std::lround(b.y + b.h) + inflate, 0L, height),
          std::clamp(std::lround(b.x) - inflate, 0L, width),
          std::clamp(std::lround(b.x + b.w) + inflate, 0L, width)};
}

}  // namespace detail

// O = pixels of the (rounded, clipped) ground-truth box; L = pixels of the box
// inflated by `pad` on every side, clipped to the frame, minus O. Both are
// flattened in row-major order, identically for every band.
inline std::vector<RegionPair> extract_regions(const HSCube& cube, const BBox& gt, int pad) {
  if (pad < 1) throw ArgumentError("babs", "pad must be >= 1");
  if (!gt.valid()) throw ArgumentError("babs", "ground-truth box is not valid");
  const auto H = static_cast<long>(cube.height()), W = static_cast<long>(cube.width());
  const auto obj = detail::clip_rect(gt, 0, H, W);
  const auto outer = detail::clip_rect(gt, pad, H, W);
  if (obj.empty()) throw GeometryError("babs", "object region lies outside the frame");

  std::vector<std::size_t> obj_idx, ring_idx;
  for (long r = outer.r0; r < outer.r1; ++r)
    for (long c = outer.c0; c < outer.c1; ++c) {
      const auto idx = static_cast<std::size_t>(r * W + c);
      (obj.contains(r, c) ? obj_idx : ring_idx).push_back(idx);
    }
  if (ring_idx.empty())
    throw GeometryError("babs", "neighborhood region is empty (object fills the frame)");

  std::vector<RegionPair> pairs(cube.bands());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const auto band = cube.band(b);
    auto& p = pairs[b];
    p.band = b;
    p.object_vec.reserve(obj_idx.size());
    p.neighborhood_vec.reserve(ring_idx.size());
    for (auto i : obj_idx) p.object_vec.push_back(band[i]);
    for (auto i : ring_idx) p.neighborhood_vec.push_back(band[i]);
  }
  return pairs;
}

// D_n = sum_{j != n} |CS(O_n, O_j) - CS(L_n, L_j)|, summed in ascending j.
inline std::vector<double> dissimilarity_scores(const std::vector<RegionPair>& pairs) {
  const std::size_t m = pairs.size();
  if (m < 2) throw ArgumentError("babs", "dissimilarity needs at least 2 bands");
  std::vector<double> cs_obj(m * m, 1.0), cs_ring(m * m, 1.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      cs_obj[i * m + j] = cs_obj[j * m + i] =
          cosine_similarity(pairs[i].object_vec, pairs[j].object_vec);
      cs_ring[i * m + j] = cs_ring[j * m + i] =
          cosine_similarity(pairs[i].neighborhood_vec, pairs[j].neighborhood_vec);
    }
  std::vector<double> d(m, 0.0);
  for (std::size_t n = 0; n < m; ++n)
    for (std::size_t j = 0; j < m; ++j)
      if (j != n) d[n] += std::abs(cs_obj[n * m + j] - cs_ring[n * m + j]);
  return d;
}

// Descending score, ties by ascending band index; consecutive triples in rank
// order become groups and the (m mod 3) lowest-ranked bands are dropped.
inline BandRanking rank_and_group(std::span<const double> scores) {
  const std::size_t m = scores.size();
  if (m < 3) throw ArgumentError("babs", "ranking needs at least 3 bands");
  BandRanking out;
  out.scores.assign(scores.begin(), scores.end());
  out.order.resize(m);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t g = 0; g + 3 <= m; g += 3)
    out.groups.push_back({out.order[g], out.order[g + 1], out.order[g + 2]});
  return out;
}

inline BandRanking rank_bands(const HSCube& cube, const BBox& gt, int pad) {
  const auto scores = dissimilarity_scores(extract_regions(cube, gt, pad));
  return rank_and_group(scores);
}

}  // namespace hytrack::babs
