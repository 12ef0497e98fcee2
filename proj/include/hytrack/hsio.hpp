#pragma once

// Hyperspectral cube container, mosaic unpacking, pseudo-color composition
// and classifier patch extraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"

namespace hytrack {

// One frame as a band-major stack: value(b, r, c) = data[(b * h + r) * w + c].
class HSCube {
 public:
  HSCube() = default;

  HSCube(std::size_t height, std::size_t width, std::size_t bands, int bit_depth = 16)
      : h_(height), w_(width), m_(bands), bit_depth_(bit_depth), data_(height * width * bands, 0) {
    check_shape();
  }

  HSCube(std::size_t height, std::size_t width, std::size_t bands, int bit_depth,
         std::vector<std::uint16_t> data)
      : h_(height), w_(width), m_(bands), bit_depth_(bit_depth), data_(std::move(data)) {
    check_shape();
    if (data_.size() != h_ * w_ * m_)
      throw FormatError("hsio", "cube data length " + std::to_string(data_.size()) +
                                    " does not match h*w*m = " + std::to_string(h_ * w_ * m_));
    const std::uint32_t maxv = max_value();
    for (auto v : data_)
      if (v > maxv)
        throw FormatError("hsio", "intensity " + std::to_string(v) + " exceeds bit depth " +
                                      std::to_string(bit_depth_));
  }

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t bands() const { return m_; }
  int bit_depth() const { return bit_depth_; }
  std::uint32_t max_value() const { return (1u << bit_depth_) - 1u; }

  std::uint16_t at(std::size_t band, std::size_t row, std::size_t col) const {
    return data_[(band * h_ + row) * w_ + col];
  }
  std::uint16_t& at(std::size_t band, std::size_t row, std::size_t col) {
    return data_[(band * h_ + row) * w_ + col];
  }

  std::span<const std::uint16_t> band(std::size_t b) const {
    return {data_.data() + b * h_ * w_, h_ * w_};
  }
  std::span<std::uint16_t> band(std::size_t b) { return {data_.data() + b * h_ * w_, h_ * w_}; }

  const std::vector<std::uint16_t>& data() const { return data_; }

  std::vector<double> wavelengths;  // nm, optional

  friend bool operator==(const HSCube& a, const HSCube& b) {
    return a.h_ == b.h_ && a.w_ == b.w_ && a.m_ == b.m_ && a.bit_depth_ == b.bit_depth_ &&
           a.data_ == b.data_;
  }

 private:
  void check_shape() const {
    if (h_ < 1 || w_ < 1 || m_ < 1)
      throw ArgumentError("hsio", "cube dimensions must be positive");
    if (bit_depth_ < 1 || bit_depth_ > 16)
      throw ArgumentError("hsio", "bit depth must be in [1, 16]");
  }

  std::size_t h_ = 0, w_ = 0, m_ = 0;
  int bit_depth_ = 16;
  std::vector<std::uint16_t> data_;
};

// Single-channel 2-D mosaic as delivered by a snapshot sensor.
struct Mosaic {
  std::size_t height = 0;
  std::size_t width = 0;
  int bit_depth = 16;
  std::vector<std::uint16_t> data;  // row-major

  std::uint16_t at(std::size_t r, std::size_t c) const { return data[r * width + c]; }
};

// Unpack a k x k snapshot mosaic. Tile position (i, j) holds band i*k + j
// (row-major within the tile).
inline HSCube demosaic(const Mosaic& mosaic, std::size_t k) {
  if (k < 1) throw ArgumentError("hsio", "mosaic tile side must be >= 1");
  if (mosaic.data.size() != mosaic.height * mosaic.width)
    throw FormatError("hsio", "mosaic data length does not match its dimensions");
  if (mosaic.height == 0 || mosaic.height % k != 0)
    throw FormatError("hsio", "mosaic height " + std::to_string(mosaic.height) +
                                  " is not divisible by tile side " + std::to_string(k));
  if (mosaic.width == 0 || mosaic.width % k != 0)
    throw FormatError("hsio", "mosaic width " + std::to_string(mosaic.width) +
                                  " is not divisible by tile side " + std::to_string(k));
  const std::size_t h = mosaic.height / k, w = mosaic.width / k, m = k * k;
  std::vector<std::uint16_t> data(h * w * m);
  for (std::size_t b = 0; b < m; ++b) {
    const std::size_t di = b / k, dj = b % k;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        data[(b * h + r) * w + c] = mosaic.at(r * k + di, c * k + dj);
  }
  return HSCube(h, w, m, mosaic.bit_depth, std::move(data));
}

// Inverse of demosaic; the band count must be a perfect square.
inline Mosaic remosaic(const HSCube& cube) {
  const auto k = static_cast<std::size_t>(std::lround(std::sqrt(double(cube.bands()))));
  if (k * k != cube.bands())
    throw ArgumentError("hsio", "band count " + std::to_string(cube.bands()) +
                                    " is not a perfect square");
  Mosaic out{cube.height() * k, cube.width() * k, cube.bit_depth(), {}};
  out.data.resize(out.height * out.width);
  for (std::size_t b = 0; b < cube.bands(); ++b)
    for (std::size_t r = 0; r < cube.height(); ++r)
      for (std::size_t c = 0; c < cube.width(); ++c)
        out.data[(r * k + b / k) * out.width + c * k + b % k] = cube.at(b, r, c);
  return out;
}

// Three cube bands gathered as an RGB-like image; intensities keep the
// cube's range (no per-channel normalization).
struct PseudoColorImage {
  std::size_t height = 0;
  std::size_t width = 0;
  int bit_depth = 16;
  std::array<std::size_t, 3> source_bands{};
  std::vector<std::uint16_t> pixels;  // channel-planar: (ch * height + r) * width + c

  std::uint16_t at(std::size_t r, std::size_t c, std::size_t ch) const {
    return pixels[(ch * height + r) * width + c];
  }
};

inline PseudoColorImage compose_pseudo_color(const HSCube& cube,
                                             const std::array<std::size_t, 3>& bands) {
  for (std::size_t i = 0; i < 3; ++i) {
    if (bands[i] >= cube.bands())
      throw ArgumentError("hsio", "band index " + std::to_string(bands[i]) +
                                      " out of range for " + std::to_string(cube.bands()) +
                                      "-band cube");
    for (std::size_t j = 0; j < i; ++j)
      if (bands[i] == bands[j])
        throw ArgumentError("hsio", "duplicate band index " + std::to_string(bands[i]));
  }
  PseudoColorImage img;
  img.height = cube.height();
  img.width = cube.width();
  img.bit_depth = cube.bit_depth();
  img.source_bands = bands;
  img.pixels.reserve(3 * cube.height() * cube.width());
  for (auto b : bands) {
    auto src = cube.band(b);
    img.pixels.insert(img.pixels.end(), src.begin(), src.end());
  }
  return img;
}

inline constexpr std::size_t kPatchSide = 107;
inline constexpr std::size_t kPatchSize = kPatchSide * kPatchSide * 3;

// Classifier input: 107 x 107 x 3, values in [0, 1], stored (row, col, ch).
struct Patch {
  std::vector<float> pixels = std::vector<float>(kPatchSize, 0.0f);
  BBox origin;

  float at(std::size_t r, std::size_t c, std::size_t ch) const {
    return pixels[(r * kPatchSide + c) * 3 + ch];
  }
};

// Crop `box` (replicate-padding outside the frame) and bilinearly resample it
// to 107 x 107 using pixel-center alignment, then scale to [0, 1].
inline Patch extract_patch(const PseudoColorImage& image, const BBox& box) {
  if (!(box.w > 0.0) || !(box.h > 0.0) || !box.valid())
    throw ArgumentError("hsio", "patch box must have finite positive size");
  Patch patch;
  patch.origin = box;
  const double sx = box.w / double(kPatchSide);
  const double sy = box.h / double(kPatchSide);
  const double norm = 1.0 / double((1u << image.bit_depth) - 1u);
  const auto W = static_cast<long>(image.width);
  const auto H = static_cast<long>(image.height);

  std::array<long, kPatchSide> x0{}, x1{};
  std::array<double, kPatchSide> fx{};
  for (std::size_t j = 0; j < kPatchSide; ++j) {
    const double src = box.x + (double(j) + 0.5) * sx - 0.5;
    const double fl = std::floor(src);
    fx[j] = src - fl;
    const long base = static_cast<long>(fl);
    x0[j] = std::clamp(base, 0L, W - 1);
    x1[j] = std::clamp(base + 1, 0L, W - 1);
  }
  for (std::size_t i = 0; i < kPatchSide; ++i) {
    const double src = box.y + (double(i) + 0.5) * sy - 0.5;
    const double fl = std::floor(src);
    const double fy = src - fl;
    const long base = static_cast<long>(fl);
    const auto y0 = static_cast<std::size_t>(std::clamp(base, 0L, H - 1));
    const auto y1 = static_cast<std::size_t>(std::clamp(base + 1, 0L, H - 1));
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::uint16_t* row0 = image.pixels.data() + (ch * image.height + y0) * image.width;
      const std::uint16_t* row1 = image.pixels.data() + (ch * image.height + y1) * image.width;
      for (std::size_t j = 0; j < kPatchSide; ++j) {
        const double top = row0[x0[j]] + fx[j] * (double(row0[x1[j]]) - row0[x0[j]]);
        const double bot = row1[x0[j]] + fx[j] * (double(row1[x1[j]]) - row1[x0[j]]);
        const double v = (top + fy * (bot - top)) * norm;
        patch.pixels[(i * kPatchSide + j) * 3 + ch] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return patch;
}

}  // namespace hytrack
