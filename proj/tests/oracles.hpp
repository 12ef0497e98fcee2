#pragma once

// Independent reference implementations. Nothing here calls into the library
// code it is checking; only plain data types are shared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hytrack/geometry.hpp"
#include "hytrack/hsio.hpp"

namespace oracle {

// Band score by literal double loops over pixel coordinates.
inline std::vector<double> band_scores(const hytrack::HSCube& cube, long gx, long gy, long gw,
                                       long gh, long pad) {
  const long H = long(cube.height()), W = long(cube.width());
  const long m = long(cube.bands());
  auto in_obj = [&](long r, long c) { return r >= gy && r < gy + gh && c >= gx && c < gx + gw; };
  auto in_big = [&](long r, long c) {
    return r >= gy - pad && r < gy + gh + pad && c >= gx - pad && c < gx + gw + pad;
  };
  auto cs = [&](long a, long b, bool object) {
    double dot = 0, na = 0, nb = 0;
    for (long r = 0; r < H; ++r)
      for (long c = 0; c < W; ++c) {
        const bool take = object ? in_obj(r, c) : (in_big(r, c) && !in_obj(r, c));
        if (!take) continue;
        const double x = cube.at(a, r, c), y = cube.at(b, r, c);
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };
  std::vector<double> d(m, 0.0);
  for (long n = 0; n < m; ++n)
    for (long j = 0; j < m; ++j)
      if (j != n) d[n] += std::fabs(cs(n, j, true) - cs(n, j, false));
  return d;
}

// Pixel of band b at (r, c) in a k x k mosaic, by explicit tile coordinates.
inline std::uint16_t mosaic_pixel(const hytrack::Mosaic& m, std::size_t k, std::size_t b,
                                  std::size_t r, std::size_t c) {
  const std::size_t tile_row = b / k, tile_col = b % k;
  return m.data[(r * k + tile_row) * m.width + (c * k + tile_col)];
}

// Bilinear resample done as two 1-D passes (rows first, then columns).
// Sample positions follow pixel-center alignment with edge replication.
inline std::vector<double> resize_two_pass(const std::vector<double>& img, int h, int w, double x0,
                                           double y0, double bw, double bh, int out) {
  auto clampi = [](long v, long lo, long hi) { return std::min(std::max(v, lo), hi); };
  auto coord = [&](double origin, double extent, int j) {
    return origin + (j + 0.5) * extent / out - 0.5;
  };
  std::vector<double> tmp(std::size_t(h) * out);
  for (int r = 0; r < h; ++r)
    for (int j = 0; j < out; ++j) {
      const double s = coord(x0, bw, j);
      const double f = std::floor(s);
      const double t = s - f;
      const long a = clampi(long(f), 0, w - 1), b = clampi(long(f) + 1, 0, w - 1);
      tmp[std::size_t(r) * out + j] = (1 - t) * img[std::size_t(r) * w + a] + t * img[std::size_t(r) * w + b];
    }
  std::vector<double> res(std::size_t(out) * out);
  for (int i = 0; i < out; ++i) {
    const double s = coord(y0, bh, i);
    const double f = std::floor(s);
    const double t = s - f;
    const long a = clampi(long(f), 0, h - 1), b = clampi(long(f) + 1, 0, h - 1);
    for (int j = 0; j < out; ++j)
      res[std::size_t(i) * out + j] = (1 - t) * tmp[std::size_t(a) * out + j] + t * tmp[std::size_t(b) * out + j];
  }
  return res;
}

// Dense matrices as nested vectors, for Kalman re-evaluation.
using Dense = std::vector<std::vector<double>>;

inline Dense zeros(int r, int c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense mul(const Dense& a, const Dense& b) {
  Dense out = zeros(int(a.size()), int(b[0].size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Dense transpose(const Dense& a) {
  Dense out = zeros(int(a[0].size()), int(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  return out;
}

inline Dense add(const Dense& a, const Dense& b, double sb = 1.0) {
  Dense out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[i][j] += sb * b[i][j];
  return out;
}

// Gauss-Jordan inverse with partial pivoting.
inline Dense inverse(Dense a) {
  const int n = int(a.size());
  Dense inv = zeros(n, n);
  for (int i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const double d = a[col][col];
    for (int j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (int j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

// Kolmogorov-Smirnov distance of a sample against N(mean, sd^2).
inline double ks_normal(std::vector<double> xs, double mean, double sd) {
  std::sort(xs.begin(), xs.end());
  const double n = double(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = 0.5 * std::erfc(-(xs[i] - mean) / (sd * std::sqrt(2.0)));
    d = std::max({d, f - double(i) / n, double(i + 1) / n - f});
  }
  return d;
}

// Straight-line forward pass in double over one patch: direct convolution
// loops, no im2col and no matrix library. Weights arrive as plain arrays:
// conv weights indexed [out][ky][kx][in], fc weights row-major [out][in].
struct PlainNet {
  std::vector<double> cw[3], cb[3];
  std::vector<double> fw[3], fb[3];
};

inline std::vector<double> conv_relu(const std::vector<double>& in, int side, int cin,
                                     const std::vector<double>& w, const std::vector<double>& b,
                                     int cout, int k, int stride, int& out_side) {
  out_side = (side - k) / stride + 1;
  std::vector<double> out(std::size_t(out_side) * out_side * cout);
  for (int oy = 0; oy < out_side; ++oy)
    for (int ox = 0; ox < out_side; ++ox)
      for (int o = 0; o < cout; ++o) {
        double acc = b[o];
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            for (int c = 0; c < cin; ++c)
              acc += w[((std::size_t(o) * k + ky) * k + kx) * cin + c] *
                     in[(std::size_t(oy * stride + ky) * side + (ox * stride + kx)) * cin + c];
        out[(std::size_t(oy) * out_side + ox) * cout + o] = std::max(acc, 0.0);
      }
  return out;
}

inline std::vector<double> pool3s2(const std::vector<double>& in, int side, int ch, int& out_side) {
  out_side = (side - 3) / 2 + 1;
  std::vector<double> out(std::size_t(out_side) * out_side * ch);
  for (int oy = 0; oy < out_side; ++oy)
    for (int ox = 0; ox < out_side; ++ox)
      for (int c = 0; c < ch; ++c) {
        double m = -1e300;
        for (int dy = 0; dy < 3; ++dy)
          for (int dx = 0; dx < 3; ++dx)
            m = std::max(m, in[(std::size_t(oy * 2 + dy) * side + (ox * 2 + dx)) * ch + c]);
        out[(std::size_t(oy) * out_side + ox) * ch + c] = m;
      }
  return out;
}

inline std::vector<double> dense(const std::vector<double>& x, const std::vector<double>& w,
                                 const std::vector<double>& b, bool relu) {
  std::vector<double> out(b.size());
  for (std::size_t o = 0; o < b.size(); ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[o * x.size() + i] * x[i];
    out[o] = relu ? std::max(acc, 0.0) : acc;
  }
  return out;
}

// Target probability of one patch; `input` is 107 x 107 x 3 already mapped
// to network input units.
inline double forward(const PlainNet& n, const std::vector<double>& input) {
  int s = 107, s2 = 0;
  auto a = conv_relu(input, s, 3, n.cw[0], n.cb[0], 96, 7, 2, s2);
  a = pool3s2(a, s2, 96, s);
  a = conv_relu(a, s, 96, n.cw[1], n.cb[1], 256, 5, 2, s2);
  a = pool3s2(a, s2, 256, s);
  a = conv_relu(a, s, 256, n.cw[2], n.cb[2], 512, 3, 1, s2);
  a = dense(a, n.fw[0], n.fb[0], true);
  a = dense(a, n.fw[1], n.fb[1], true);
  a = dense(a, n.fw[2], n.fb[2], false);
  return std::exp(a[1]) / (std::exp(a[0]) + std::exp(a[1]));
}

// Mean binary cross-entropy of the fc head alone, softmax over two logits.
inline double fc_mean_bce(const std::vector<double> (&fw)[3], const std::vector<double> (&fb)[3],
                          const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto a = dense(x[i], fw[0], fb[0], true);
    a = dense(a, fw[1], fb[1], true);
    a = dense(a, fw[2], fb[2], false);
    const double mx = std::max(a[0], a[1]);
    const double lse = mx + std::log(std::exp(a[0] - mx) + std::exp(a[1] - mx));
    loss -= y[i] ? a[1] - lse : a[0] - lse;
  }
  return loss / double(x.size());
}

}  // namespace oracle
