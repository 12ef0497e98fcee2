#pragma once

// Minimal grayscale PNG read/write through libpng, for mosaic frames.

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "hytrack/error.hpp"
#include "hytrack/hsio.hpp"

namespace hytrack::png {

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void on_error(png_structp, png_const_charp msg) { throw FormatError("hsio", msg); }
inline void on_warning(png_structp, png_const_charp) {}
}  // namespace detail

// 8- or 16-bit grayscale; 8-bit input is widened and reported as bit depth 8.
inline Mosaic read_mosaic(const std::string& path) {
  detail::File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("hsio", "cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw FormatError("hsio", path + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY)
    throw FormatError("hsio", path + ": mosaic must be single-channel grayscale");
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_swap(png);  // host order, little-endian assumed
  png_read_update_info(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = buf.data() + r * rowbytes;
  png_read_image(png, rows.data());

  Mosaic m;
  m.height = h;
  m.width = w;
  m.bit_depth = depth == 16 ? 16 : 8;
  m.data.resize(std::size_t(w) * h);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (depth == 16) {
      std::uint16_t v;
      std::memcpy(&v, buf.data() + 2 * i + (i / w) * (rowbytes - 2 * w), 2);
      m.data[i] = v;
    } else {
      m.data[i] = buf[i + (i / w) * (rowbytes - w)];
    }
  }
  return m;
}

inline void write_mosaic(const std::string& path, const Mosaic& m) {
  detail::File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("hsio", "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(m.width), png_uint_32(m.height), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  std::vector<std::uint16_t> row(m.width);
  for (std::size_t r = 0; r < m.height; ++r) {
    for (std::size_t c = 0; c < m.width; ++c) row[c] = m.at(r, c);
    png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(png, nullptr);
}

}  // namespace hytrack::png
