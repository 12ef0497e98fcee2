#pragma once

// Synthetic hyperspectral sequences for end-to-end tests: a textured target
// with its own spectral signature moves at constant velocity over a textured
// background; an optional occluder covers part of it for a frame window.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/hsio.hpp"
#include "hytrack/rng.hpp"
#include "hytrack/sequence.hpp"

namespace hytrack::simulate {

struct SimulationConfig {
  std::size_t frames = 200;
  std::size_t width = 240;
  std::size_t height = 180;
  std::size_t bands = 16;
  int bit_depth = 12;
  BBox start{30.0, 50.0, 48.0, 40.0};
  double vx = 0.7;  // px / frame
  double vy = 0.25;
  long occlusion_first = -1;
  long occlusion_last = -1;
  double occlusion_fraction = 0.5;  // share of the target width hidden
  double noise_sigma = 0.01;        // per-pixel sensor noise, fraction of full scale
  int rim = 4;                      // px of darker outline around the target
  std::uint64_t seed = 7;

  void validate() const {
    if (frames < 1 || width < 8 || height < 8 || bands < 3)
      throw ArgumentError("simulate", "need >= 1 frame, >= 8x8 pixels and >= 3 bands");
    if (!start.valid()) throw ArgumentError("simulate", "start box is not valid");
    if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 1.0))
      throw ArgumentError("simulate", "occlusion fraction must lie in [0, 1]");
  }

  bool occluded(std::size_t frame) const {
    return occlusion_first >= 0 && long(frame) >= occlusion_first && long(frame) <= occlusion_last;
  }
};

// Integer-aligned target box of every frame; this is the ground truth.
inline std::vector<BBox> trajectory(const SimulationConfig& cfg) {
  std::vector<BBox> out;
  for (std::size_t t = 0; t < cfg.frames; ++t)
    out.push_back({std::round(cfg.start.x + cfg.vx * double(t)),
                   std::round(cfg.start.y + cfg.vy * double(t)), std::round(cfg.start.w),
                   std::round(cfg.start.h)});
  return out;
}

class Generator {
 public:
  explicit Generator(SimulationConfig cfg) : cfg_(std::move(cfg)), gt_(trajectory(cfg_)) {
    cfg_.validate();
    Rng rng = make_rng(cfg_.seed, Stream::simulate);
    const std::size_t m = cfg_.bands;
    const auto W = cfg_.width, H = cfg_.height;
    const auto tw = std::size_t(cfg_.start.w), th = std::size_t(cfg_.start.h);

    // Spectra: smooth background signature; the target matches it except in
    // a few bands where it departs strongly.
    bg_level_.resize(m);
    fg_level_.resize(m);
    for (std::size_t b = 0; b < m; ++b) {
      bg_level_[b] = 0.40 + 0.12 * std::sin(0.45 * double(b) + 0.3);
      fg_level_[b] = bg_level_[b] + uniform(rng, -0.04, 0.04);
    }
    for (std::size_t k = 0; k < std::max<std::size_t>(1, m / 5); ++k) {
      const auto b = std::size_t(uniform(rng, 0.0, double(m)));
      fg_level_[std::min(b, m - 1)] += (k % 2 ? -0.22 : 0.25);
    }

    background_ = texture(rng, H, W, 0.12, 6);
    target_ = texture(rng, th, tw, 0.20, 4);
    band_gain_.resize(m);
    for (auto& g : band_gain_) g = uniform(rng, 0.6, 1.4);
  }

  const std::vector<BBox>& groundtruth() const { return gt_; }
  const SimulationConfig& config() const { return cfg_; }

  HSCube frame(std::size_t t) const {
    const auto W = cfg_.width, H = cfg_.height, m = cfg_.bands;
    const double full = double((1u << cfg_.bit_depth) - 1u);
    Rng noise = make_rng(mix_seed(cfg_.seed) + t, Stream::simulate);
    HSCube cube(H, W, m, cfg_.bit_depth);
    const BBox& box = gt_[t];
    const auto bx = long(box.x), by = long(box.y);
    const auto tw = long(box.w), th = long(box.h);
    const long hidden = cfg_.occluded(t) ? std::lround(cfg_.occlusion_fraction * double(tw)) : 0;
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
          double v = bg_level_[b] + band_gain_[b] * background_[r * W + c];
          const long lr = long(r) - by, lc = long(c) - bx;
          if (lr >= 0 && lr < th && lc >= 0 && lc < tw) {
            if (lc < hidden)
              v = 0.5 * bg_level_[b];  // flat occluder slab
            else if (std::min({lr, lc, th - 1 - lr, tw - 1 - lc}) < cfg_.rim)
              v = 0.5 * fg_level_[b];
            else
              v = fg_level_[b] + band_gain_[b] * target_[std::size_t(lr * tw + lc)];
          }
          v += normal(noise, 0.0, cfg_.noise_sigma);
          cube.at(b, r, c) = static_cast<std::uint16_t>(std::clamp(std::lround(v * full), 0L, long(full)));
        }
    cube.wavelengths = wavelengths();
    return cube;
  }

  // Evenly spaced 470-620 nm.
  std::vector<double> wavelengths() const {
    std::vector<double> out(cfg_.bands);
    for (std::size_t b = 0; b < cfg_.bands; ++b)
      out[b] = cfg_.bands > 1 ? 470.0 + 150.0 * double(b) / double(cfg_.bands - 1) : 470.0;
    return out;
  }

  // Writes frames/, groundtruth_rect.txt and meta.json under `dir`.
  void write(const std::filesystem::path& dir, const std::string& name) const {
    std::filesystem::create_directories(dir / "frames");
    for (std::size_t t = 0; t < cfg_.frames; ++t) write_cube(dir / "frames" / frame_filename(t), frame(t));
    write_groundtruth(dir / "groundtruth_rect.txt", gt_);
    write_meta(dir, name, cfg_.bit_depth, wavelengths());
  }

 private:
  // Sum of random plane waves, zero mean, peak roughly `amplitude`.
  static std::vector<double> texture(Rng& rng, std::size_t h, std::size_t w, double amplitude,
                                     int waves) {
    std::vector<double> out(h * w, 0.0);
    for (int k = 0; k < waves; ++k) {
      const double angle = uniform(rng, 0.0, std::numbers::pi);
      const double freq = uniform(rng, 0.08, 0.6);
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double fx = freq * std::cos(angle), fy = freq * std::sin(angle);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          out[r * w + c] += amplitude / waves * 2.0 * std::sin(fx * double(c) + fy * double(r) + phase);
    }
    return out;
  }

  SimulationConfig cfg_;
  std::vector<BBox> gt_;
  std::vector<double> bg_level_, fg_level_, band_gain_;
  std::vector<double> background_, target_;
};

}  // namespace hytrack::simulate
