#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>
#include <filesystem>
#include <random>
#include <string>

#include "hytrack/hsio.hpp"
#include "hytrack/rng.hpp"

namespace support {

inline hytrack::HSCube random_cube(std::size_t h, std::size_t w, std::size_t m, std::uint64_t seed,
                                   int bit_depth = 12) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, (1 << bit_depth) - 1);
  hytrack::HSCube cube(h, w, m, bit_depth);
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) cube.at(b, r, c) = std::uint16_t(dist(rng));
  return cube;
}

// Every band carries the same spatial pattern plus small noise, except band
// `planted`, whose values inside `box` are replaced by an unrelated pattern.
inline hytrack::HSCube planted_band_cube(std::size_t h, std::size_t w, std::size_t m,
                                         std::size_t planted, const hytrack::BBox& box,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), noise(-0.01, 0.01);
  std::vector<double> pattern(h * w);
  for (auto& v : pattern) v = u(rng);
  hytrack::HSCube cube(h, w, m, 12);
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const bool inside = double(r) >= box.y && double(r) < box.y + box.h && double(c) >= box.x &&
                            double(c) < box.x + box.w;
        const double v = b == planted && inside ? u(rng) : pattern[r * w + c] + noise(rng);
        cube.at(b, r, c) = std::uint16_t(std::lround(std::clamp(v, 0.0, 1.0) * 4000.0));
      }
  return cube;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hytrack-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace support
