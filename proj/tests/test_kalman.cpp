#include <gtest/gtest.h>

#include <random>

#include "hytrack/kalman.hpp"
#include "oracles.hpp"

using namespace hytrack;
using namespace hytrack::kalman;

namespace {

oracle::Dense to_dense(const Eigen::MatrixXd& m) {
  oracle::Dense d = oracle::zeros(int(m.rows()), int(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

Mat8 random_spd(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Mat8 a;
  for (int i = 0; i < 64; ++i) a.data()[i] = n(rng);
  return a * a.transpose() + Mat8::Identity() * 0.1;
}

Model random_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 60);
  Model m = make_model({0, 0, u(rng), u(rng)}, {0.01, 0.01, 0.01});
  Mat8 q = random_spd(rng) * 0.05;
  m.process_noise = q;
  return m;
}

double max_asym(const Mat8& c) { return (c - c.transpose()).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(KalmanInit, ZeroVelocityAndDiagonalCovariance) {
  const auto s = init({10, 20, 30, 40}, 0.01);
  EXPECT_EQ(s.x.tail<4>(), Vec4::Zero());
  EXPECT_DOUBLE_EQ(s.x(0), 25);
  EXPECT_DOUBLE_EQ(s.x(1), 40);
  EXPECT_TRUE(s.cov.isDiagonal());
  EXPECT_GE(s.cov.diagonal().minCoeff(), 0.0);
  EXPECT_EQ(predicted_bbox(s), (BBox{10, 20, 30, 40}));
}

TEST(KalmanInit, RejectsInvalidBox) { EXPECT_THROW(init({0, 0, 0, 5}), ArgumentError); }

TEST(KalmanPredict, ZeroNoiseZeroVelocityIsFixedPoint) {
  const BBox b{5, 6, 7, 8};
  const auto m = make_model(b, {0.0, 0.01, 0.01});
  const auto s = init(b);
  const auto p = predict(s, m);
  EXPECT_EQ(p.x, s.x);
  const Mat8 expect = m.transition * s.cov * m.transition.transpose();
  EXPECT_LT((p.cov - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KalmanPredict, ConstantVelocityStep) {
  const auto m = make_model({0, 0, 10, 10});
  State s = init({0, 0, 10, 10});
  s.x.setZero();
  s.x(4) = 1.0;
  EXPECT_DOUBLE_EQ(predict(s, m).x(0), 1.0);
}

TEST(KalmanPredict, MatchesDenseOracle) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 10);
  for (int t = 0; t < 20; ++t) {
    const auto m = random_model(rng);
    State s;
    for (int i = 0; i < 8; ++i) s.x(i) = n(rng);
    s.cov = random_spd(rng);
    const auto p = predict(s, m);
    const auto T = to_dense(m.transition), C = to_dense(s.cov), Q = to_dense(m.process_noise);
    const auto ref_cov = oracle::add(oracle::mul(oracle::mul(T, C), oracle::transpose(T)), Q);
    const auto ref_x = oracle::mul(T, to_dense(s.x));
    for (int i = 0; i < 8; ++i) {
      EXPECT_NEAR(p.x(i), ref_x[i][0], 1e-12 * (1 + std::fabs(ref_x[i][0])));
      for (int j = 0; j < 8; ++j) EXPECT_NEAR(p.cov(i, j), ref_cov[i][j], 1e-12 * (1 + std::fabs(ref_cov[i][j])));
    }
  }
}

TEST(KalmanUpdate, MatchesDenseOracle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 10);
  for (int t = 0; t < 20; ++t) {
    const auto m = random_model(rng);
    State s;
    for (int i = 0; i < 8; ++i) s.x(i) = n(rng);
    s.cov = random_spd(rng);
    Vec4 z;
    for (int i = 0; i < 4; ++i) z(i) = n(rng);
    const auto u = update(s, z, m);

    const auto C = to_dense(s.cov), M = to_dense(m.measurement), R = to_dense(m.measure_noise);
    const auto CMt = oracle::mul(C, oracle::transpose(M));
    const auto G = oracle::mul(CMt, oracle::inverse(oracle::add(oracle::mul(M, CMt), R)));
    const auto innov = oracle::add(to_dense(z), oracle::mul(M, to_dense(s.x)), -1.0);
    const auto x_ref = oracle::add(to_dense(s.x), oracle::mul(G, innov));
    oracle::Dense I = oracle::zeros(8, 8);
    for (int i = 0; i < 8; ++i) I[i][i] = 1;
    const auto c_ref = oracle::mul(oracle::add(I, oracle::mul(G, M), -1.0), C);
    for (int i = 0; i < 8; ++i) {
      EXPECT_NEAR(u.x(i), x_ref[i][0], 1e-9 * (1 + std::fabs(x_ref[i][0])));
      for (int j = 0; j < 8; ++j) {
        // reference is unsymmetrized; compare against its symmetric part
        const double sym = 0.5 * (c_ref[i][j] + c_ref[j][i]);
        EXPECT_NEAR(u.cov(i, j), sym, 1e-9 * (1 + std::fabs(sym)));
      }
    }
  }
}

TEST(KalmanUpdate, HandCaseHalfGain) {
  // Identity prior covariance and unit measurement noise give gain 0.5 on
  // every measured component.
  Model m = make_model({0, 0, 1, 1});
  m.measure_noise = Mat4::Identity();
  State s;
  s.x.setZero();
  s.cov = Mat8::Identity();
  const auto u = update(s, Vec4::Ones(), m);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(u.x(i), 0.5, 1e-12);
    EXPECT_NEAR(u.cov(i, i), 0.5, 1e-12);
  }
  for (int i = 4; i < 8; ++i) {
    EXPECT_NEAR(u.x(i), 0.0, 1e-12);
    EXPECT_NEAR(u.cov(i, i), 1.0, 1e-12);
  }
}

TEST(KalmanUpdate, HugeNoiseIgnoresMeasurement) {
  Model m = make_model({0, 0, 10, 10});
  m.measure_noise = Mat4::Identity() * 1e12;
  const auto s = init({0, 0, 10, 10});
  const auto u = update(s, Vec4(100, 100, 50, 50), m);
  EXPECT_LT((u.x - s.x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KalmanUpdate, ZeroNoiseSnapsToMeasurement) {
  Model m = make_model({0, 0, 10, 10}, {0.01, 0.0, 0.01});
  const auto s = init({0, 0, 10, 10});
  const Vec4 z(13, -2, 11, 9);
  const auto u = update(s, z, m);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(u.x(i), z(i), 1e-9);
}

TEST(KalmanUpdate, SingularInnovationIsNumericError) {
  Model m = make_model({0, 0, 10, 10}, {0.0, 0.0, 0.01});
  State s = init({0, 0, 10, 10});
  s.cov.setZero();
  EXPECT_THROW(update(s, Vec4::Zero(), m), NumericError);
}

TEST(KalmanUpdate, JosephFormAgreement) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 50; ++t) {
    Model m = random_model(rng);
    Mat4 r;
    for (int i = 0; i < 16; ++i) r.data()[i] = n(rng);
    m.measure_noise = r * r.transpose() + Mat4::Identity();
    State s;
    s.x.setZero();
    s.cov = random_spd(rng);
    const auto u = update(s, Vec4::Zero(), m);
    const Mat4 S = m.measurement * s.cov * m.measurement.transpose() + m.measure_noise;
    const Eigen::Matrix<double, 8, 4> G = s.cov * m.measurement.transpose() * S.inverse();
    const Mat8 A = Mat8::Identity() - G * m.measurement;
    const Mat8 joseph = A * s.cov * A.transpose() + G * m.measure_noise * G.transpose();
    EXPECT_LT((u.cov - joseph).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(KalmanProperties, NoiselessConstantVelocityConverges) {
  // Position (cx, cy) moves at (1.5, -0.7) px/frame; size constant.
  const BBox b0{100, 100, 30, 20};
  Filter f(b0);
  double worst = 0.0;
  for (int t = 1; t <= 100; ++t) {
    f.predict();
    const BBox truth = BBox::from_center(b0.cx() + 1.5 * t, b0.cy() - 0.7 * t, 30, 20);
    f.correct(truth);
    if (t > 10) {
      worst = std::max(worst, std::hypot(f.state().x(0) - truth.cx(), f.state().x(1) - truth.cy()));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(KalmanProperties, CovarianceStaysSymmetricPsd) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 5);
  Filter f({50, 50, 20, 30});
  double worst_asym = 0.0, min_eig = 1e300;
  for (int t = 0; t < 10000; ++t) {
    const BBox p = f.predict();
    f.correct(BBox::from_center(p.cx() + n(rng), p.cy() + n(rng), std::max(1.0, 20 + n(rng)),
                                std::max(1.0, 30 + n(rng))));
    const auto& c = f.state().cov;
    worst_asym = std::max(worst_asym, max_asym(c));
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat8>(c).eigenvalues().minCoeff());
  }
  EXPECT_LT(worst_asym, 1e-9);
  EXPECT_GE(min_eig, -1e-9);
}

TEST(KalmanBox, ClampsNonPositiveSize) {
  State s = init({0, 0, 10, 10});
  s.x(3) = -3;
  EXPECT_EQ(predicted_bbox(s).h, 1.0);
}

TEST(KalmanBox, CenterCornerRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100, 100), sz(1, 80);
  for (int t = 0; t < 100; ++t) {
    const BBox b{u(rng), u(rng), sz(rng), sz(rng)};
    const BBox r = predicted_bbox(init(b));
    EXPECT_NEAR(r.x, b.x, 1e-12);
    EXPECT_NEAR(r.y, b.y, 1e-12);
    EXPECT_NEAR(r.w, b.w, 1e-12);
    EXPECT_NEAR(r.h, b.h, 1e-12);
  }
}

TEST(KalmanModel, DefaultNoiseScalesWithBoxSize) {
  const auto m = make_model({0, 0, 30, 50});
  const double r2 = 40.0 * 40.0;
  EXPECT_DOUBLE_EQ(m.process_noise(0, 0), 0.01 * r2);
  EXPECT_DOUBLE_EQ(m.process_noise(4, 4), 0.1 * r2);
  EXPECT_DOUBLE_EQ(m.measure_noise(2, 2), 0.01 * r2);
  EXPECT_EQ(m.transition(0, 4), 1.0);
}
