#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "checks.hpp"
#include "hytrack/classifier.hpp"
#include "support.hpp"

using namespace hytrack;
using namespace hytrack::classifier;

namespace {

Patch random_patch(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Patch p;
  for (auto& v : p.pixels) v = u(rng);
  return p;
}

std::vector<double> network_input(const Patch& p) {
  std::vector<double> in(p.pixels.size());
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = (double(p.pixels[i]) - 0.5) * kInputScale;
  return in;
}

template <class T>
void randomize_biases(Network<T>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (std::size_t li = 0; li < 3; ++li)
    for (Eigen::Index i = 0; i < net.conv.layer(li).bias.size(); ++i) net.conv.layer(li).bias(i) = T(u(rng));
  for (Eigen::Index i = 0; i < net.head.b1.size(); ++i) net.head.b1(i) = T(u(rng));
  for (Eigen::Index i = 0; i < net.head.b2.size(); ++i) net.head.b2(i) = T(u(rng));
  net.head.b3(0) = T(u(rng));
  net.head.b3(1) = T(u(rng));
}

}  // namespace

TEST(Network, FcParameterCount) {
  EXPECT_EQ(FcHead<float>::parameter_count(), 2623490u);
  std::size_t n = 0;
  FcHead<float> h;
  h.for_each_tensor([&](const char*, const float*, Eigen::Index s) { n += std::size_t(s); });
  EXPECT_EQ(n, 2623490u);
}

TEST(Network, SeededInitIsDeterministic) {
  const auto a = Network<float>::random(5), b = Network<float>::random(5), c = Network<float>::random(6);
  EXPECT_EQ(checksum(a.head), checksum(b.head));
  EXPECT_NE(checksum(a.head), checksum(c.head));
  EXPECT_EQ(a.conv.layer(1).weight, b.conv.layer(1).weight);
}

TEST(Network, ZeroFinalLayerScoresHalf) {
  auto net = Network<float>::random(1);
  net.head.w3.setZero();
  net.head.b3.setZero();
  EXPECT_DOUBLE_EQ(net.score(random_patch(2)), 0.5);
}

TEST(Network, MatchesPlainForwardPass) {
  auto net = Network<double>::random(3);
  randomize_biases(net, 4);
  const auto plain = checks::to_plain(net);
  for (std::uint64_t s : {10u, 11u}) {
    const Patch p = random_patch(s);
    EXPECT_NEAR(net.score(p), oracle::forward(plain, network_input(p)), 1e-6);
  }
}

TEST(Network, FloatAgreesWithDouble) {
  auto net = Network<double>::random(7);
  randomize_biases(net, 8);
  Network<float> f{net.conv.cast<float>(), net.head.cast<float>()};
  const std::vector<Patch> patches{random_patch(1), random_patch(2), random_patch(3)};
  const auto sd = net.score(patches), sf = f.score(patches);
  for (std::size_t i = 0; i < patches.size(); ++i) EXPECT_NEAR(sd[i], sf[i], 1e-3);
}

TEST(Network, BatchedFeaturesMatchSingleAndIgnoreThreadCount) {
  const auto net = Network<float>::random(9);
  std::vector<Patch> patches;
  for (int i = 0; i < 11; ++i) patches.push_back(random_patch(100 + i));
  const auto one = net.conv.features(patches, 1), four = net.conv.features(patches, 4);
  EXPECT_EQ(one, four);
  for (int i = 0; i < 11; i += 5)
    EXPECT_LT((net.conv.features(patches[i]) - one.row(i)).cwiseAbs().maxCoeff(), 1e-4f);
}

TEST(Training, GradientMatchesFiniteDifferences) {
  const auto r = checks::gradient_check(21);
  EXPECT_EQ(r.checked, 60);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Training, SeparableToyConverges) {
  const auto run = checks::separable_training(5);
  EXPECT_TRUE(run.window_decreasing);
  EXPECT_GE(run.accuracy, 0.99);
}

TEST(Training, ZeroLearningRateLeavesHeadUnchanged) {
  auto head = FcHead<float>::random(2);
  const auto before = checksum(head);
  FeatureBatch<float> b{Matrix<float>::Random(4, kFeatureDim), Matrix<float>::Random(4, kFeatureDim)};
  TrainOptions opt;
  opt.lr = 0.0;
  opt.allow_zero_lr = true;
  train_fc(head, b, opt);
  EXPECT_EQ(checksum(head), before);
  opt.allow_zero_lr = false;
  EXPECT_THROW(train_fc(head, b, opt), ArgumentError);
}

TEST(Training, DeterministicForSeed) {
  FeatureBatch<float> b{Matrix<float>::Random(6, kFeatureDim).cwiseAbs(),
                        Matrix<float>::Random(9, kFeatureDim).cwiseAbs()};
  TrainOptions opt;
  opt.batch_pos = 4;
  opt.batch_neg = 5;
  opt.seed = 3;
  auto h1 = FcHead<float>::random(1), h2 = FcHead<float>::random(1);
  train_fc(h1, b, opt);
  train_fc(h2, b, opt);
  EXPECT_EQ(checksum(h1), checksum(h2));
}

TEST(Training, RejectsEmptyBatch) {
  auto head = FcHead<float>::random(2);
  FeatureBatch<float> b{Matrix<float>(0, kFeatureDim), Matrix<float>::Random(3, kFeatureDim)};
  EXPECT_THROW(train_fc(head, b, {}), ArgumentError);
}

TEST(Weights, RoundTripPreservesScores) {
  auto net = Network<float>::random(4);
  randomize_biases(net, 5);
  std::stringstream ss;
  save_network(ss, net);
  const auto back = load_network<float>(ss, 99);
  EXPECT_EQ(checksum(back.head), checksum(net.head));
  const Patch p = random_patch(6);
  EXPECT_EQ(back.score(p), net.score(p));
}

TEST(Weights, MissingFcTensorsFallBackToSeed) {
  const auto net = Network<float>::random(4);
  std::stringstream ss;
  for (std::size_t li = 0; li < 3; ++li) {
    const auto& l = net.conv.layer(li);
    const auto& g = l.geom;
    std::vector<float> w(std::size_t(l.weight.size()), 0.0f), b(std::size_t(g.out_ch), 0.0f);
    write_tensor(ss, std::string(g.name) + ".weight",
                         {std::uint32_t(g.out_ch), std::uint32_t(g.in_ch), std::uint32_t(g.ksize),
                          std::uint32_t(g.ksize)},
                         w);
    write_tensor(ss, std::string(g.name) + ".bias", {std::uint32_t(g.out_ch)}, b);
  }
  const auto loaded = load_network<float>(ss, 17);
  EXPECT_EQ(checksum(loaded.head), checksum(FcHead<float>::random(17)));
}

TEST(Weights, WrongShapeIsRejected) {
  std::stringstream ss;
  write_tensor(ss, "fc3.weight", {3, 512}, std::vector<float>(3 * 512, 0.0f));
  EXPECT_THROW(load_network<float>(ss, 0), WeightsFormatError);
  std::stringstream unknown;
  write_tensor(unknown, "fc4.weight", {2}, std::vector<float>(2, 0.0f));
  EXPECT_THROW(load_network<float>(unknown, 0), WeightsFormatError);
  std::stringstream truncated("\x05\x00\x00\x00" "fc");
  EXPECT_THROW(load_network<float>(truncated, 0), WeightsFormatError);
  EXPECT_THROW(load_or_init<float>("/nonexistent/weights.bin", 0), WeightsFormatError);
}

TEST(Sampling, CountsAndIouThresholds) {
  Rng rng = make_rng(1, Stream::sampling);
  const BBox opt{80, 60, 40, 30};
  const SampleConfig cfg;
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = sample_boxes(320, 240, opt, rng, cfg);
    ASSERT_EQ(s.positives.size(), 50u);
    ASSERT_EQ(s.negatives.size(), 200u);
    for (const auto& b : s.positives) EXPECT_GE(iou(b, opt), 0.7);
    for (const auto& b : s.negatives) EXPECT_LE(iou(b, opt), 0.3);
  }
}

TEST(Sampling, CollectedPatchesAreCropsOfTheBoxes) {
  const auto cube = support::random_cube(60, 80, 3, 2);
  const auto image = compose_pseudo_color(cube, {0, 1, 2});
  Rng a = make_rng(3, Stream::sampling), b = make_rng(3, Stream::sampling);
  const auto batch = collect_samples(image, {20, 20, 16, 12}, a);
  const auto boxes = sample_boxes(80, 60, {20, 20, 16, 12}, b);
  ASSERT_EQ(batch.positives.size(), boxes.positives.size());
  EXPECT_EQ(batch.positives[3].pixels, extract_patch(image, boxes.positives[3]).pixels);
  EXPECT_EQ(batch.negatives[7].pixels, extract_patch(image, boxes.negatives[7]).pixels);
}

TEST(Sampling, ImpossibleThresholdIsSamplingError) {
  Rng rng = make_rng(2, Stream::sampling);
  SampleConfig cfg;
  cfg.pos_iou = 1.0;
  cfg.max_attempts_per_sample = 5;
  EXPECT_THROW(sample_boxes(100, 100, {10, 10, 20, 20}, rng, cfg), SamplingError);
  EXPECT_THROW(sample_boxes(100, 100, {10, 10, 0, 20}, rng), ArgumentError);
}
