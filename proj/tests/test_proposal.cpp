#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hytrack/proposal.hpp"
#include "oracles.hpp"

using namespace hytrack;

namespace {

struct Moments {
  double mean_x, mean_y, sd_x, sd_y;
  std::vector<double> sc;
};

Moments sample_moments(const BBox& prev, int n, std::uint64_t seed) {
  ProposalConfig cfg;
  cfg.count = n;
  Rng rng = make_rng(seed, Stream::proposal);
  const auto cands = sample_candidates(prev, cfg, rng);
  double sx = 0, sy = 0, sxx = 0, syy = 0;
  Moments m{};
  for (const auto& c : cands) {
    const double dx = c.box.cx() - prev.cx(), dy = c.box.cy() - prev.cy();
    sx += dx;
    sy += dy;
    sxx += dx * dx;
    syy += dy * dy;
    m.sc.push_back(std::log(c.box.w / prev.w) / std::log(1.05));
  }
  m.mean_x = sx / n;
  m.mean_y = sy / n;
  m.sd_x = std::sqrt(sxx / n - m.mean_x * m.mean_x);
  m.sd_y = std::sqrt(syy / n - m.mean_y * m.mean_y);
  return m;
}

}  // namespace

TEST(Proposal, CenterSpreadMatchesCovariance) {
  const BBox prev{100, 100, 40, 60};  // r = 50, sigma = 15 px
  const auto m = sample_moments(prev, 100000, 1);
  EXPECT_NEAR(m.sd_x, 15.0, 0.02 * 15.0);
  EXPECT_NEAR(m.sd_y, 15.0, 0.02 * 15.0);
  const double tol = 3.0 * 15.0 / std::sqrt(100000.0);
  EXPECT_NEAR(m.mean_x, 0.0, tol);
  EXPECT_NEAR(m.mean_y, 0.0, tol);
}

TEST(Proposal, ScaleExponentIsNormalQuarterVariance) {
  const auto m = sample_moments({0, 0, 40, 60}, 100000, 2);
  EXPECT_LT(oracle::ks_normal(m.sc, 0.0, 0.5), 0.01);
}

TEST(Proposal, AspectRatioPreserved) {
  const BBox prev{3, 4, 37, 23};
  ProposalConfig cfg;
  Rng rng = make_rng(3, Stream::proposal);
  for (const auto& c : sample_candidates(prev, cfg, rng)) {
    EXPECT_NEAR(c.box.w / c.box.h, prev.w / prev.h, 1e-12);
    EXPECT_EQ(c.source, Source::proposal);
  }
}

TEST(Proposal, ZeroExponentKeepsSize) {
  const BBox prev{10, 20, 30, 40};
  const BBox b = perturb_box(prev, 1.0, -2.0, 0.0, 1.05);
  EXPECT_EQ(b.w, prev.w);
  EXPECT_EQ(b.h, prev.h);
  EXPECT_DOUBLE_EQ(b.cx(), prev.cx() + 1.0);
}

TEST(Proposal, ScaleIsExponential) {
  const BBox b = perturb_box({0, 0, 100, 50}, 0, 0, 2.0, 1.05);
  EXPECT_DOUBLE_EQ(b.w, 100 * 1.05 * 1.05);
}

TEST(Proposal, DefaultCountAndDeterminism) {
  ProposalConfig cfg;
  EXPECT_EQ(cfg.count, 256);
  Rng a = make_rng(9, Stream::proposal), b = make_rng(9, Stream::proposal);
  const auto ca = sample_candidates({0, 0, 10, 10}, cfg, a);
  const auto cb = sample_candidates({0, 0, 10, 10}, cfg, b);
  ASSERT_EQ(ca.size(), 256u);
  for (std::size_t i = 0; i < ca.size(); ++i) EXPECT_EQ(ca[i].box, cb[i].box);
}

TEST(Proposal, RejectsBadInput) {
  ProposalConfig cfg;
  Rng rng = make_rng(0, Stream::proposal);
  EXPECT_THROW(sample_candidates({0, 0, 0, 10}, cfg, rng), ArgumentError);
  cfg.cov_scale = 0;
  EXPECT_THROW(sample_candidates({0, 0, 10, 10}, cfg, rng), ArgumentError);
}
