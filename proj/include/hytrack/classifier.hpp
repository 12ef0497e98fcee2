#pragma once

// Target/background patch classifier: a frozen three-layer convolutional
// feature extractor followed by three fully connected layers that are the
// only parameters ever trained online.
//
//   107x107x3 -conv1 7x7/2-> 51x51x96 -pool 3x3/2-> 25x25x96
//             -conv2 5x5/2-> 11x11x256 -pool 3x3/2-> 5x5x256
//             -conv3 3x3/1-> 3x3x512 = 4608 -fc1-> 512 -fc2-> 512 -fc3-> 2
//
// Activations are stored position-major (y, x, channel); the 4608-d feature
// vector is flattened in that order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/hsio.hpp"
#include "hytrack/rng.hpp"

namespace hytrack::classifier {

inline constexpr int kFeatureDim = 4608;
inline constexpr int kHidden = 512;
inline constexpr int kClasses = 2;  // logit 0: background, logit 1: target

// Patch values in [0, 1] are mapped to (v - 0.5) * kInputScale before conv1.
inline constexpr double kInputScale = 4.0;

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct ConvGeometry {
  const char* name;
  int in_ch, out_ch, ksize, stride, in_side, out_side;
};

inline constexpr std::array<ConvGeometry, 3> kConvGeometry{{
    {"conv1", 3, 96, 7, 2, 107, 51},
    {"conv2", 96, 256, 5, 2, 25, 11},
    {"conv3", 256, 512, 3, 1, 5, 3},
}};

template <class T>
struct ConvLayer {
  ConvGeometry geom;
  Matrix<T> weight;  // (ksize * ksize * in_ch) x out_ch, rows ordered (ky, kx, c)
  RowVector<T> bias;
};

namespace detail {

template <class T>
void im2col(const T* in, int side, int ch, int ksize, int stride, int out_side, T* cols) {
  const int row_len = ksize * ch;
  for (int oy = 0; oy < out_side; ++oy)
    for (int ox = 0; ox < out_side; ++ox) {
      T* dst = cols + (std::size_t(oy) * out_side + ox) * ksize * row_len;
      for (int ky = 0; ky < ksize; ++ky) {
        const T* src = in + (std::size_t(oy * stride + ky) * side + ox * stride) * ch;
        std::memcpy(dst + ky * row_len, src, sizeof(T) * row_len);
      }
    }
}

// 3x3 stride-2 max pool, no padding.
template <class T>
void max_pool(const T* in, int side, int ch, T* out, int out_side) {
  for (int oy = 0; oy < out_side; ++oy)
    for (int ox = 0; ox < out_side; ++ox) {
      T* dst = out + (std::size_t(oy) * out_side + ox) * ch;
      const T* first = in + (std::size_t(oy * 2) * side + ox * 2) * ch;
      std::copy(first, first + ch, dst);
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = in + (std::size_t(oy * 2 + ky) * side + ox * 2 + kx) * ch;
          for (int c = 0; c < ch; ++c) dst[c] = std::max(dst[c], src[c]);
        }
    }
}

template <class T>
void he_uniform(Matrix<T>& m, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

}  // namespace detail

// Frozen feature extractor.
template <class T>
class ConvStack {
 public:
  ConvStack() {
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& g = kConvGeometry[i];
      layers_[i].geom = g;
      layers_[i].weight = Matrix<T>::Zero(g.ksize * g.ksize * g.in_ch, g.out_ch);
      layers_[i].bias = RowVector<T>::Zero(g.out_ch);
    }
  }

  static ConvStack random(std::uint64_t seed) {
    ConvStack s;
    Rng rng = make_rng(seed, Stream::classifier_init);
    for (auto& l : s.layers_)
      detail::he_uniform(l.weight, l.geom.ksize * l.geom.ksize * l.geom.in_ch, rng);
    return s;
  }

  const ConvLayer<T>& layer(std::size_t i) const { return layers_[i]; }
  ConvLayer<T>& layer(std::size_t i) { return layers_[i]; }

  template <class U>
  ConvStack<U> cast() const {
    ConvStack<U> out;
    for (std::size_t i = 0; i < 3; ++i) {
      out.layer(i).weight = layers_[i].weight.template cast<U>();
      out.layer(i).bias = layers_[i].bias.template cast<U>();
    }
    return out;
  }

  // 4608-d feature of one patch.
  RowVector<T> features(const Patch& patch) const {
    Matrix<T> out(1, kFeatureDim);
    Workspace ws;
    features_chunk(std::span<const Patch>(&patch, 1), out.data(), ws);
    return out;
  }

  // Features of many patches, one row each. Patches are processed in fixed
  // chunks of kChunk (the conv3 GEMM is batched per chunk) and chunks are
  // spread over `threads`, so results do not depend on the thread count.
  Matrix<T> features(std::span<const Patch> patches, unsigned threads = 1) const {
    const std::size_t n = patches.size();
    Matrix<T> out(static_cast<Eigen::Index>(n), kFeatureDim);
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    auto run = [&](std::size_t first_chunk, std::size_t stride) {
      Workspace ws;
      for (std::size_t c = first_chunk; c < chunks; c += stride) {
        const std::size_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
        features_chunk(patches.subspan(lo, hi - lo), out.row(lo).data(), ws);
      }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
    if (threads <= 1) {
      run(0, 1);
      return out;
    }
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run, t, threads);
    for (auto& th : pool) th.join();
    return out;
  }

  static constexpr std::size_t kChunk = 16;

 private:
  struct Workspace {
    std::vector<T> input = std::vector<T>(kPatchSize);
    Matrix<T> cols1, act1, cols2, act2, cols3, act3;
    std::vector<T> pooled1, pooled2;
  };

  // Writes rows of `dst` (row-major, kFeatureDim wide) for a chunk of patches.
  void features_chunk(std::span<const Patch> patches, T* dst, Workspace& ws) const {
    const auto& g1 = kConvGeometry[0];
    const auto& g2 = kConvGeometry[1];
    const auto& g3 = kConvGeometry[2];
    const int pos3 = g3.out_side * g3.out_side;
    const int k3 = g3.ksize * g3.ksize * g3.in_ch;
    ws.cols1.resize(g1.out_side * g1.out_side, g1.ksize * g1.ksize * g1.in_ch);
    ws.cols2.resize(g2.out_side * g2.out_side, g2.ksize * g2.ksize * g2.in_ch);
    ws.cols3.resize(static_cast<Eigen::Index>(patches.size()) * pos3, k3);
    ws.pooled1.resize(std::size_t(g2.in_side) * g2.in_side * g1.out_ch);
    ws.pooled2.resize(std::size_t(g3.in_side) * g3.in_side * g2.out_ch);

    for (std::size_t p = 0; p < patches.size(); ++p) {
      const auto& px = patches[p].pixels;
      for (std::size_t i = 0; i < kPatchSize; ++i)
        ws.input[i] = static_cast<T>((double(px[i]) - 0.5) * kInputScale);
      detail::im2col(ws.input.data(), g1.in_side, g1.in_ch, g1.ksize, g1.stride, g1.out_side,
                     ws.cols1.data());
      conv(ws.cols1, layers_[0], ws.act1);
      detail::max_pool(ws.act1.data(), g1.out_side, g1.out_ch, ws.pooled1.data(), g2.in_side);
      detail::im2col(ws.pooled1.data(), g2.in_side, g2.in_ch, g2.ksize, g2.stride, g2.out_side,
                     ws.cols2.data());
      conv(ws.cols2, layers_[1], ws.act2);
      detail::max_pool(ws.act2.data(), g2.out_side, g2.out_ch, ws.pooled2.data(), g3.in_side);
      detail::im2col(ws.pooled2.data(), g3.in_side, g3.in_ch, g3.ksize, g3.stride, g3.out_side,
                     ws.cols3.row(static_cast<Eigen::Index>(p) * pos3).data());
    }
    conv(ws.cols3, layers_[2], ws.act3);
    // act3 rows are (patch, position); each patch's 9 x 512 block is contiguous.
    std::copy(ws.act3.data(), ws.act3.data() + patches.size() * kFeatureDim, dst);
  }

  static void conv(const Matrix<T>& cols, const ConvLayer<T>& l, Matrix<T>& out) {
    out.noalias() = cols * l.weight;
    out.rowwise() += l.bias;
    out = out.cwiseMax(T(0));
  }

  std::array<ConvLayer<T>, 3> layers_;
};

// Trainable head. Weights are stored [out][in] like the weights file.
template <class T>
struct FcHead {
  Matrix<T> w1 = Matrix<T>::Zero(kHidden, kFeatureDim);
  RowVector<T> b1 = RowVector<T>::Zero(kHidden);
  Matrix<T> w2 = Matrix<T>::Zero(kHidden, kHidden);
  RowVector<T> b2 = RowVector<T>::Zero(kHidden);
  Matrix<T> w3 = Matrix<T>::Zero(kClasses, kHidden);
  RowVector<T> b3 = RowVector<T>::Zero(kClasses);

  static FcHead random(std::uint64_t seed) {
    FcHead h;
    Rng rng = make_rng(mix_seed(seed) + 1, Stream::classifier_init);
    detail::he_uniform(h.w1, kFeatureDim, rng);
    detail::he_uniform(h.w2, kHidden, rng);
    detail::he_uniform(h.w3, kHidden, rng);
    return h;
  }

  static constexpr std::size_t parameter_count() {
    return std::size_t(kFeatureDim) * kHidden + kHidden + std::size_t(kHidden) * kHidden +
           kHidden + std::size_t(kHidden) * kClasses + kClasses;
  }

  template <class U>
  FcHead<U> cast() const {
    FcHead<U> o;
    o.w1 = w1.template cast<U>();
    o.b1 = b1.template cast<U>();
    o.w2 = w2.template cast<U>();
    o.b2 = b2.template cast<U>();
    o.w3 = w3.template cast<U>();
    o.b3 = b3.template cast<U>();
    return o;
  }

  // Visit (name, data) of every tensor in file order.
  template <class F>
  void for_each_tensor(F&& f) {
    f("fc1.weight", w1.data(), w1.size());
    f("fc1.bias", b1.data(), b1.size());
    f("fc2.weight", w2.data(), w2.size());
    f("fc2.bias", b2.data(), b2.size());
    f("fc3.weight", w3.data(), w3.size());
    f("fc3.bias", b3.data(), b3.size());
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<FcHead*>(this)->for_each_tensor(
        [&](const char* n, T* p, Eigen::Index s) { f(n, static_cast<const T*>(p), s); });
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
           w3.allFinite() && b3.allFinite();
  }

  // Logits for a batch of features (n x 4608 -> n x 2); no dropout.
  Matrix<T> logits(const Matrix<T>& x) const {
    Matrix<T> h1 = (x * w1.transpose()).rowwise() + b1;
    h1 = h1.cwiseMax(T(0));
    Matrix<T> h2 = (h1 * w2.transpose()).rowwise() + b2;
    h2 = h2.cwiseMax(T(0));
    Matrix<T> z = (h2 * w3.transpose()).rowwise() + b3;
    return z;
  }
};

// Numerically stable target-class softmax probability.
template <class T>
double target_probability(T background_logit, T target_logit) {
  const double d = double(background_logit) - double(target_logit);
  return 1.0 / (1.0 + std::exp(d));
}

template <class T>
std::vector<double> score_features(const FcHead<T>& head, const Matrix<T>& features) {
  const Matrix<T> z = head.logits(features);
  std::vector<double> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) out[i] = target_probability(z(i, 0), z(i, 1));
  return out;
}

template <class T>
struct Network {
  ConvStack<T> conv;
  FcHead<T> head;

  static Network random(std::uint64_t seed) { return {ConvStack<T>::random(seed), FcHead<T>::random(seed)}; }

  double score(const Patch& patch) const {
    Matrix<T> f = conv.features(patch);
    return score_features(head, f).front();
  }

  std::vector<double> score(std::span<const Patch> patches, unsigned threads = 1) const {
    if (patches.empty()) return {};
    return score_features(head, conv.features(patches, threads));
  }
};

// ---------------------------------------------------------------------------
// Loss, gradient and SGD.

template <class T>
struct FcGradient {
  FcHead<T> grad;
  double loss = 0.0;
};

// Mean binary cross-entropy of the target probability against `labels`
// (1 = target). Optional dropout masks (n x 512, already scaled by
// 1 / keep) are applied after the fc1 and fc2 ReLUs.
template <class T>
FcGradient<T> bce_gradient(const FcHead<T>& head, const Matrix<T>& x, std::span<const int> labels,
                           const Matrix<T>* mask1 = nullptr, const Matrix<T>* mask2 = nullptr) {
  const Eigen::Index n = x.rows();
  Matrix<T> a1 = (x * head.w1.transpose()).rowwise() + head.b1;
  Matrix<T> h1 = a1.cwiseMax(T(0));
  if (mask1) h1 = h1.cwiseProduct(*mask1);
  Matrix<T> a2 = (h1 * head.w2.transpose()).rowwise() + head.b2;
  Matrix<T> h2 = a2.cwiseMax(T(0));
  if (mask2) h2 = h2.cwiseProduct(*mask2);
  Matrix<T> z = (h2 * head.w3.transpose()).rowwise() + head.b3;

  FcGradient<T> out;
  Matrix<T> dz(n, kClasses);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z0 = double(z(i, 0)), z1 = double(z(i, 1));
    const double mx = std::max(z0, z1);
    const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
    const double p = std::exp(z1 - lse);
    const int y = labels[i];
    loss -= y ? (z1 - lse) : (z0 - lse);
    const double g = (p - y) / double(n);
    dz(i, 1) = static_cast<T>(g);
    dz(i, 0) = static_cast<T>(-g);
  }
  out.loss = loss / double(n);

  auto& gr = out.grad;
  gr.w3 = dz.transpose() * h2;
  gr.b3 = dz.colwise().sum();
  Matrix<T> dh2 = dz * head.w3;
  if (mask2) dh2 = dh2.cwiseProduct(*mask2);
  Matrix<T> da2 = dh2.cwiseProduct((a2.array() > T(0)).template cast<T>().matrix());
  gr.w2 = da2.transpose() * h1;
  gr.b2 = da2.colwise().sum();
  Matrix<T> dh1 = da2 * head.w2;
  if (mask1) dh1 = dh1.cwiseProduct(*mask1);
  Matrix<T> da1 = dh1.cwiseProduct((a1.array() > T(0)).template cast<T>().matrix());
  gr.w1 = da1.transpose() * x;
  gr.b1 = da1.colwise().sum();
  return out;
}

template <class T>
double bce_loss(const FcHead<T>& head, const Matrix<T>& x, std::span<const int> labels) {
  const Matrix<T> z = head.logits(x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double z0 = double(z(i, 0)), z1 = double(z(i, 1));
    const double mx = std::max(z0, z1);
    const double lse = mx + std::log(std::exp(z0 - mx) + std::exp(z1 - mx));
    loss -= labels[i] ? (z1 - lse) : (z0 - lse);
  }
  return loss / double(z.rows());
}

// Conv features of one frame's positive and negative samples.
template <class T>
struct FeatureBatch {
  Matrix<T> positives;  // n_pos x 4608
  Matrix<T> negatives;  // n_neg x 4608

  Eigen::Index size() const { return positives.rows() + negatives.rows(); }
};

// Stack several batches into one.
template <class T>
FeatureBatch<T> concat(std::span<const FeatureBatch<T>> parts) {
  Eigen::Index np = 0, nn = 0;
  for (const auto& p : parts) {
    np += p.positives.rows();
    nn += p.negatives.rows();
  }
  FeatureBatch<T> out{Matrix<T>(np, kFeatureDim), Matrix<T>(nn, kFeatureDim)};
  Eigen::Index ip = 0, in = 0;
  for (const auto& p : parts) {
    out.positives.middleRows(ip, p.positives.rows()) = p.positives;
    out.negatives.middleRows(in, p.negatives.rows()) = p.negatives;
    ip += p.positives.rows();
    in += p.negatives.rows();
  }
  return out;
}

struct TrainOptions {
  double lr = 0.0005;
  int iters = 10;
  double momentum = 0.9;
  double dropout = 0.5;
  int batch_pos = 0;  // 0 = every positive each iteration
  int batch_neg = 0;  // 0 = every negative each iteration
  std::uint64_t seed = 0;
  bool allow_zero_lr = false;  // tests only
};

struct TrainReport {
  std::vector<double> losses;  // mini-batch loss per iteration (with dropout)
};

// SGD with momentum on mean BCE. Mini-batches walk a shuffled order of the
// positives and negatives cyclically. Momentum starts at zero on each call.
template <class T>
TrainReport train_fc(FcHead<T>& head, const FeatureBatch<T>& batch, const TrainOptions& opt) {
  if (batch.positives.rows() < 1 || batch.negatives.rows() < 1)
    throw ArgumentError("classifier", "training batch needs at least one positive and one negative");
  if (!(opt.lr > 0.0) && !(opt.allow_zero_lr && opt.lr == 0.0))
    throw ArgumentError("classifier", "learning rate must be > 0");
  if (opt.iters < 1) throw ArgumentError("classifier", "iterations must be >= 1");
  if (!(opt.dropout >= 0.0 && opt.dropout < 1.0))
    throw ArgumentError("classifier", "dropout must lie in [0, 1)");

  Rng rng = make_rng(opt.seed, Stream::training);
  const auto np = batch.positives.rows(), nn = batch.negatives.rows();
  const Eigen::Index bp = opt.batch_pos > 0 ? std::min<Eigen::Index>(opt.batch_pos, np) : np;
  const Eigen::Index bn = opt.batch_neg > 0 ? std::min<Eigen::Index>(opt.batch_neg, nn) : nn;

  std::vector<Eigen::Index> pos_order(np), neg_order(nn);
  std::iota(pos_order.begin(), pos_order.end(), Eigen::Index{0});
  std::iota(neg_order.begin(), neg_order.end(), Eigen::Index{0});
  std::shuffle(pos_order.begin(), pos_order.end(), rng);
  std::shuffle(neg_order.begin(), neg_order.end(), rng);
  Eigen::Index pos_cursor = 0, neg_cursor = 0;

  std::vector<int> labels(bp + bn, 0);
  std::fill(labels.begin(), labels.begin() + bp, 1);
  Matrix<T> x(bp + bn, kFeatureDim);
  FcHead<T> velocity;
  const double keep = 1.0 - opt.dropout;
  std::bernoulli_distribution keep_dist(keep);

  TrainReport report;
  for (int it = 0; it < opt.iters; ++it) {
    for (Eigen::Index i = 0; i < bp; ++i) {
      x.row(i) = batch.positives.row(pos_order[pos_cursor]);
      pos_cursor = (pos_cursor + 1) % np;
    }
    for (Eigen::Index i = 0; i < bn; ++i) {
      x.row(bp + i) = batch.negatives.row(neg_order[neg_cursor]);
      neg_cursor = (neg_cursor + 1) % nn;
    }
    FcGradient<T> g;
    if (opt.dropout > 0.0) {
      Matrix<T> m1(bp + bn, kHidden), m2(bp + bn, kHidden);
      const T scale = static_cast<T>(1.0 / keep);
      for (Eigen::Index i = 0; i < m1.size(); ++i) m1.data()[i] = keep_dist(rng) ? scale : T(0);
      for (Eigen::Index i = 0; i < m2.size(); ++i) m2.data()[i] = keep_dist(rng) ? scale : T(0);
      g = bce_gradient(head, x, labels, &m1, &m2);
    } else {
      g = bce_gradient(head, x, labels);
    }
    if (!std::isfinite(g.loss)) throw TrainingDivergence(it, "non-finite loss");
    report.losses.push_back(g.loss);

    const T lr = static_cast<T>(opt.lr), mu = static_cast<T>(opt.momentum);
    auto step = [&](auto& param, auto& vel, const auto& grad) {
      vel = mu * vel - lr * grad;
      param += vel;
    };
    step(head.w1, velocity.w1, g.grad.w1);
    step(head.b1, velocity.b1, g.grad.b1);
    step(head.w2, velocity.w2, g.grad.w2);
    step(head.b2, velocity.b2, g.grad.b2);
    step(head.w3, velocity.w3, g.grad.w3);
    step(head.b3, velocity.b3, g.grad.b3);
  }
  if (!head.all_finite()) throw TrainingDivergence(opt.iters - 1, "non-finite parameters");
  return report;
}

// FNV-1a over the raw bytes of every fc tensor.
template <class T>
std::uint64_t checksum(const FcHead<T>& head) {
  std::uint64_t h = 1469598103934665603ULL;
  head.for_each_tensor([&](const char*, const T* p, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < std::size_t(n) * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  });
  return h;
}

// ---------------------------------------------------------------------------
// Weights file: a sequence of tensors, each stored as
//   u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 data[prod(dims)]
// all little-endian. Conv weights use [out][in][ky][kx] order; fc weights
// [out][in]. Conv tensors are required; missing fc tensors fall back to the
// seeded initialization.

struct TensorShape {
  std::string name;
  std::vector<std::uint32_t> dims;
};

inline std::vector<TensorShape> expected_tensors() {
  std::vector<TensorShape> out;
  for (const auto& g : kConvGeometry) {
    out.push_back({std::string(g.name) + ".weight",
                   {std::uint32_t(g.out_ch), std::uint32_t(g.in_ch), std::uint32_t(g.ksize),
                    std::uint32_t(g.ksize)}});
    out.push_back({std::string(g.name) + ".bias", {std::uint32_t(g.out_ch)}});
  }
  out.push_back({"fc1.weight", {kHidden, kFeatureDim}});
  out.push_back({"fc1.bias", {kHidden}});
  out.push_back({"fc2.weight", {kHidden, kHidden}});
  out.push_back({"fc2.bias", {kHidden}});
  out.push_back({"fc3.weight", {kClasses, kHidden}});
  out.push_back({"fc3.bias", {kClasses}});
  return out;
}

namespace detail {

inline std::string dims_str(const std::vector<std::uint32_t>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
  return s + "]";
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw WeightsFormatError("classifier", "truncated weights file");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

inline void write_f32(std::ostream& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  write_u32(out, u);
}

}  // namespace detail

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

inline void write_tensor(std::ostream& out, const std::string& name,
                         const std::vector<std::uint32_t>& dims, std::span<const float> data) {
  detail::write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  detail::write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) detail::write_u32(out, d);
  for (float f : data) detail::write_f32(out, f);
}

inline std::map<std::string, RawTensor> read_tensors(std::istream& in) {
  std::map<std::string, RawTensor> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = detail::read_u32(in);
    if (len > 256) throw WeightsFormatError("classifier", "implausible tensor name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw WeightsFormatError("classifier", "truncated tensor name");
    const auto rank = detail::read_u32(in);
    if (rank > 8) throw WeightsFormatError("classifier", name + ": implausible rank");
    RawTensor t;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.dims.push_back(detail::read_u32(in));
      count *= t.dims.back();
    }
    if (count > (std::size_t(1) << 28)) throw WeightsFormatError("classifier", name + ": tensor too large");
    t.data.resize(count);
    for (auto& f : t.data) {
      const auto u = detail::read_u32(in);
      std::memcpy(&f, &u, 4);
    }
    out[name] = std::move(t);
  }
  return out;
}

// Conv weight [out][in][ky][kx] <-> GEMM layout (ky, kx, in) x out.
template <class T>
void save_network(std::ostream& out, const Network<T>& net) {
  for (std::size_t li = 0; li < 3; ++li) {
    const auto& l = net.conv.layer(li);
    const auto& g = l.geom;
    std::vector<float> w(std::size_t(g.out_ch) * g.in_ch * g.ksize * g.ksize);
    for (int o = 0; o < g.out_ch; ++o)
      for (int c = 0; c < g.in_ch; ++c)
        for (int ky = 0; ky < g.ksize; ++ky)
          for (int kx = 0; kx < g.ksize; ++kx)
            w[((std::size_t(o) * g.in_ch + c) * g.ksize + ky) * g.ksize + kx] =
                static_cast<float>(l.weight((ky * g.ksize + kx) * g.in_ch + c, o));
    std::vector<float> b(l.bias.data(), l.bias.data() + l.bias.size());
    write_tensor(out, std::string(g.name) + ".weight",
                 {std::uint32_t(g.out_ch), std::uint32_t(g.in_ch), std::uint32_t(g.ksize),
                  std::uint32_t(g.ksize)},
                 w);
    write_tensor(out, std::string(g.name) + ".bias", {std::uint32_t(g.out_ch)}, b);
  }
  const auto shapes = expected_tensors();
  net.head.for_each_tensor([&](const char* name, const T* p, Eigen::Index n) {
    std::vector<float> data(p, p + n);
    const auto it = std::find_if(shapes.begin(), shapes.end(),
                                 [&](const TensorShape& s) { return s.name == name; });
    write_tensor(out, name, it->dims, data);
  });
}

template <class T>
Network<T> load_network(std::istream& in, std::uint64_t seed) {
  auto tensors = read_tensors(in);
  const auto shapes = expected_tensors();
  for (const auto& [name, t] : tensors) {
    const auto it = std::find_if(shapes.begin(), shapes.end(),
                                 [&](const TensorShape& s) { return s.name == name; });
    if (it == shapes.end()) throw WeightsFormatError("classifier", "unknown tensor " + name);
    if (it->dims != t.dims)
      throw WeightsFormatError("classifier", name + ": expected shape " + detail::dims_str(it->dims) +
                                                 ", found " + detail::dims_str(t.dims));
  }
  Network<T> net{ConvStack<T>(), FcHead<T>::random(seed)};
  for (std::size_t li = 0; li < 3; ++li) {
    auto& l = net.conv.layer(li);
    const auto& g = l.geom;
    const auto wit = tensors.find(std::string(g.name) + ".weight");
    const auto bit = tensors.find(std::string(g.name) + ".bias");
    if (wit == tensors.end() || bit == tensors.end())
      throw WeightsFormatError("classifier", std::string("missing tensor ") + g.name);
    const auto& w = wit->second.data;
    for (int o = 0; o < g.out_ch; ++o)
      for (int c = 0; c < g.in_ch; ++c)
        for (int ky = 0; ky < g.ksize; ++ky)
          for (int kx = 0; kx < g.ksize; ++kx)
            l.weight((ky * g.ksize + kx) * g.in_ch + c, o) =
                static_cast<T>(w[((std::size_t(o) * g.in_ch + c) * g.ksize + ky) * g.ksize + kx]);
    for (int o = 0; o < g.out_ch; ++o) l.bias(o) = static_cast<T>(bit->second.data[o]);
  }
  net.head.for_each_tensor([&](const char* name, T* p, Eigen::Index n) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) return;
    for (Eigen::Index i = 0; i < n; ++i) p[i] = static_cast<T>(it->second.data[i]);
  });
  return net;
}

// Weights file when `path` is non-empty, seeded He-uniform initialization otherwise.
template <class T>
Network<T> load_or_init(const std::filesystem::path& path, std::uint64_t seed) {
  if (path.empty()) return Network<T>::random(seed);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsFormatError("classifier", "cannot open " + path.string());
  return load_network<T>(in, seed);
}

// ---------------------------------------------------------------------------
// Training sample collection around the chosen target box.

struct SampleConfig {
  int positives = 50;
  int negatives = 200;
  double pos_iou = 0.7;
  double neg_iou = 0.3;
  double pos_trans = 0.03;  // positive center jitter stddev, units of r
  double pos_scale = 0.15;  // positive scale-exponent stddev (base 1.05)
  int max_attempts_per_sample = 200;
};

struct TrainBatch {
  std::vector<Patch> positives;
  std::vector<Patch> negatives;
};

struct SampleBoxes {
  std::vector<BBox> positives;
  std::vector<BBox> negatives;
};

// Positives: center jitter N(0, (pos_trans r)^2), scale 1.05^N(0, pos_scale^2),
// kept when IoU >= pos_iou. Negatives: half with centers uniform over the frame,
// half near misses, kept when IoU <= neg_iou.
inline SampleBoxes sample_boxes(double frame_width, double frame_height, const BBox& optimal,
                                Rng& rng, const SampleConfig& cfg = {}) {
  if (!optimal.valid()) throw ArgumentError("classifier", "sampling box is not valid");
  const double r = 0.5 * (optimal.w + optimal.h);
  SampleBoxes out;
  auto draw = [&](int count, auto&& gen, auto&& accept, std::vector<BBox>& dst, const char* kind) {
    const long budget = long(count) * cfg.max_attempts_per_sample;
    long attempts = 0;
    while (int(dst.size()) < count) {
      if (++attempts > budget)
        throw SamplingError("classifier", std::string("could not find enough ") + kind +
                                              " samples (" + std::to_string(dst.size()) + "/" +
                                              std::to_string(count) + ")");
      const BBox b = gen();
      if (b.valid() && accept(iou(b, optimal))) dst.push_back(b);
    }
  };
  auto jitter = [&](double sigma, double scale_sigma) {
    const double s = std::pow(1.05, normal(rng, 0.0, scale_sigma));
    return BBox::from_center(optimal.cx() + normal(rng, 0.0, sigma),
                             optimal.cy() + normal(rng, 0.0, sigma), optimal.w * s, optimal.h * s);
  };
  draw(cfg.positives, [&] { return jitter(cfg.pos_trans * r, cfg.pos_scale); },
       [&](double v) { return v >= cfg.pos_iou; }, out.positives, "positive");
  const int n_uniform = cfg.negatives / 2;
  draw(n_uniform,
       [&] {
         const double s = std::pow(1.05, normal(rng, 0.0, 2.0));
         return BBox::from_center(uniform(rng, 0.0, frame_width), uniform(rng, 0.0, frame_height),
                                  optimal.w * s, optimal.h * s);
       },
       [&](double v) { return v <= cfg.neg_iou; }, out.negatives, "negative");
  // Near misses: half displaced, half concentric crops well inside or well around the target.
  const int n_shift = (cfg.negatives - n_uniform + 1) / 2;
  std::vector<BBox> near;
  draw(n_shift, [&] { return jitter(r, 2.0); }, [&](double v) { return v <= cfg.neg_iou; }, near,
       "negative");
  draw(cfg.negatives - n_uniform,
       [&] {
         const double s = uniform(rng, 0.0, 1.0) < 0.5 ? uniform(rng, 0.3, 0.55) : uniform(rng, 1.85, 2.5);
         return BBox::from_center(optimal.cx() + normal(rng, 0.0, 0.1 * r),
                                  optimal.cy() + normal(rng, 0.0, 0.1 * r), optimal.w * s, optimal.h * s);
       },
       [&](double v) { return v <= cfg.neg_iou; }, near, "negative");
  out.negatives.insert(out.negatives.end(), near.begin(), near.end());
  return out;
}

inline TrainBatch collect_samples(const PseudoColorImage& image, const BBox& optimal, Rng& rng,
                                  const SampleConfig& cfg = {}) {
  const auto boxes = sample_boxes(double(image.width), double(image.height), optimal, rng, cfg);
  TrainBatch batch;
  batch.positives.reserve(boxes.positives.size());
  batch.negatives.reserve(boxes.negatives.size());
  for (const auto& b : boxes.positives) batch.positives.push_back(extract_patch(image, b));
  for (const auto& b : boxes.negatives) batch.negatives.push_back(extract_patch(image, b));
  return batch;
}

}  // namespace hytrack::classifier
