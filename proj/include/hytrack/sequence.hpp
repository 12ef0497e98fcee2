#pragma once

// On-disk sequence layout:
//   <dir>/frames/NNNNNN.bin     16-byte header ("HYCB", u32 h, u32 w, u32 m)
//                               followed by h*w*m little-endian u16, band-major
//   <dir>/groundtruth_rect.txt  one "x,y,w,h" line per frame
//   <dir>/meta.json             optional: {"bit_depth": 12, "wavelengths": [...]}

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/hsio.hpp"

namespace hytrack {

namespace fs = std::filesystem;

inline constexpr std::array<char, 4> kCubeMagic{'H', 'Y', 'C', 'B'};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("hsio", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::string encode_cube(const HSCube& cube) {
  std::string buf(kCubeMagic.begin(), kCubeMagic.end());
  detail::put_u32(buf, static_cast<std::uint32_t>(cube.height()));
  detail::put_u32(buf, static_cast<std::uint32_t>(cube.width()));
  detail::put_u32(buf, static_cast<std::uint32_t>(cube.bands()));
  buf.reserve(16 + 2 * cube.data().size());
  for (auto v : cube.data()) {
    buf.push_back(static_cast<char>(v & 0xffu));
    buf.push_back(static_cast<char>(v >> 8));
  }
  return buf;
}

inline HSCube decode_cube(std::string_view bytes, int bit_depth = 16) {
  if (bytes.size() < 16 || !std::equal(kCubeMagic.begin(), kCubeMagic.end(), bytes.begin()))
    throw FormatError("hsio", "missing HYCB cube header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t h = detail::get_u32(p + 4), w = detail::get_u32(p + 8),
                    m = detail::get_u32(p + 12);
  const std::size_t n = h * w * m;
  if (bytes.size() != 16 + 2 * n)
    throw FormatError("hsio", "cube payload is " + std::to_string(bytes.size() - 16) +
                                  " bytes, header implies " + std::to_string(2 * n));
  std::vector<std::uint16_t> data(n);
  for (std::size_t i = 0; i < n; ++i)
    data[i] = static_cast<std::uint16_t>(p[16 + 2 * i] | (p[17 + 2 * i] << 8));
  return HSCube(h, w, m, bit_depth, std::move(data));
}

inline void write_cube(const fs::path& path, const HSCube& cube) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("hsio", "cannot write " + path.string());
  const auto buf = encode_cube(cube);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline HSCube read_cube(const fs::path& path, int bit_depth = 16) {
  try {
    return decode_cube(detail::slurp(path), bit_depth);
  } catch (const FormatError& e) {
    throw FormatError("hsio", path.string() + ": " + e.message());
  }
}

// Accepts comma, tab or space separated "x y w h" lines; blank lines skipped.
inline std::vector<BBox> parse_groundtruth(std::istream& in) {
  std::vector<BBox> boxes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == '\t'; }, ' ');
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    std::istringstream ls(line);
    BBox b;
    if (!(ls >> b.x >> b.y >> b.w >> b.h))
      throw FormatError("hsio", "groundtruth line " + std::to_string(lineno) + " is not x,y,w,h");
    boxes.push_back(b);
  }
  return boxes;
}

inline std::vector<BBox> read_groundtruth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("hsio", "cannot open " + path.string());
  return parse_groundtruth(in);
}

inline void write_groundtruth(const fs::path& path, const std::vector<BBox>& boxes) {
  std::ofstream out(path);
  if (!out) throw DataError("hsio", "cannot write " + path.string());
  out << std::setprecision(10);
  for (const auto& b : boxes) out << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
}

inline std::string frame_filename(std::size_t index) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index << ".bin";
  return ss.str();
}

// A sequence directory with lazily loaded frames.
struct Sequence {
  std::string name;
  fs::path root;
  std::vector<fs::path> frames;
  std::vector<BBox> groundtruth;
  int bit_depth = 16;
  std::vector<double> wavelengths;

  std::size_t size() const { return frames.size(); }

  HSCube frame(std::size_t i) const {
    if (i >= frames.size())
      throw DataError("hsio", name + ": frame " + std::to_string(i) + " out of range");
    HSCube cube = read_cube(frames[i], bit_depth);
    cube.wavelengths = wavelengths;
    return cube;
  }
};

inline Sequence open_sequence(const fs::path& dir) {
  Sequence seq;
  seq.root = dir;
  seq.name = fs::absolute(dir).lexically_normal().filename().string();
  if (seq.name.empty()) seq.name = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  const auto frames_dir = dir / "frames";
  if (!fs::is_directory(frames_dir))
    throw DataError("hsio", dir.string() + " has no frames/ directory");
  for (const auto& entry : fs::directory_iterator(frames_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".bin")
      seq.frames.push_back(entry.path());
  std::sort(seq.frames.begin(), seq.frames.end());
  if (seq.frames.empty()) throw DataError("hsio", frames_dir.string() + " contains no frames");

  const auto gt_path = dir / "groundtruth_rect.txt";
  if (fs::exists(gt_path)) seq.groundtruth = read_groundtruth(gt_path);

  const auto meta_path = dir / "meta.json";
  if (fs::exists(meta_path)) {
    try {
      const auto meta = nlohmann::json::parse(detail::slurp(meta_path));
      seq.bit_depth = meta.value("bit_depth", 16);
      if (meta.contains("wavelengths")) seq.wavelengths = meta["wavelengths"].get<std::vector<double>>();
      if (meta.contains("name")) seq.name = meta["name"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("hsio", meta_path.string() + ": " + e.what());
    }
  }
  return seq;
}

inline void write_meta(const fs::path& dir, const std::string& name, int bit_depth,
                       const std::vector<double>& wavelengths) {
  nlohmann::json meta{{"name", name}, {"bit_depth", bit_depth}};
  if (!wavelengths.empty()) meta["wavelengths"] = wavelengths;
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

}  // namespace hytrack
