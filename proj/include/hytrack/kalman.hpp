#pragma once

// Constant-velocity Kalman filter over (cx, cy, w, h) and their per-frame
// velocities. No control input is used.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"

namespace hytrack::kalman {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

struct Model {
  Mat8 transition;     // [[I, dt*I], [0, I]]
  Mat48 measurement;   // selects (cx, cy, w, h)
  Mat8 process_noise;
  Mat4 measure_noise;
};

struct State {
  Vec8 x;
  Mat8 cov;
};

struct NoiseScales {
  double process = 1e-2;
  double measure = 1e-2;
  double init = 1e-2;
};

// Process noise diag(1,1,1,1,10,10,10,10) * process * rbar^2, measurement
// noise I * measure * rbar^2, rbar = mean box side.
inline Model make_model(const BBox& reference, const NoiseScales& scales = {}, double dt = 1.0) {
  if (!(scales.process >= 0.0) || !(scales.measure >= 0.0))
    throw ArgumentError("kalman", "noise scales must be >= 0");
  const double rbar = 0.5 * (reference.w + reference.h);
  const double r2 = rbar * rbar;
  Model m;
  m.transition.setIdentity();
  m.transition.topRightCorner<4, 4>() = dt * Mat4::Identity();
  m.measurement.setZero();
  m.measurement.leftCols<4>().setIdentity();
  Vec8 q;
  q << 1, 1, 1, 1, 10, 10, 10, 10;
  m.process_noise = (q * scales.process * r2).asDiagonal();
  m.measure_noise = Mat4::Identity() * scales.measure * r2;
  return m;
}

inline State init(const BBox& box, double init_scale = 1e-2) {
  if (!box.valid()) throw ArgumentError("kalman", "initial box is not valid");
  State s;
  s.x.setZero();
  s.x.head<4>() << box.cx(), box.cy(), box.w, box.h;
  const double v = box.w * box.h * init_scale;
  Vec8 d;
  d << v, v, v, v, 10 * v, 10 * v, 10 * v, 10 * v;
  s.cov = d.asDiagonal();
  return s;
}

inline void require_finite(const State& s, const char* what) {
  if (!s.x.allFinite() || !s.cov.allFinite())
    throw NumericError("kalman", std::string(what) + " produced a non-finite state");
}

inline State predict(const State& s, const Model& m) {
  State out;
  out.x = m.transition * s.x;
  out.cov = m.transition * s.cov * m.transition.transpose() + m.process_noise;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  require_finite(out, "predict");
  return out;
}

// Gain via an LDLT solve of the innovation covariance; the covariance update
// is (I - G M) C followed by symmetrization.
inline State update(const State& s, const Vec4& z, const Model& m) {
  if (!z.allFinite()) throw ArgumentError("kalman", "measurement is not finite");
  const Eigen::Matrix<double, 8, 4> cmt = s.cov * m.measurement.transpose();
  const Mat4 innovation_cov = m.measurement * cmt + m.measure_noise;
  Eigen::LDLT<Mat4> ldlt(innovation_cov);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().cwiseAbs().maxCoeff()))
    throw NumericError("kalman", "innovation covariance is singular");
  const Eigen::Matrix<double, 8, 4> gain = ldlt.solve(cmt.transpose()).transpose();
  State out;
  out.x = s.x + gain * (z - m.measurement * s.x);
  out.cov = (Mat8::Identity() - gain * m.measurement) * s.cov;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  require_finite(out, "update");
  return out;
}

inline Vec4 measurement_of(const BBox& b) { return Vec4(b.cx(), b.cy(), b.w, b.h); }

// Corner-form box of the state, width and height clamped to >= 1.
inline BBox predicted_bbox(const State& s) {
  const double w = std::max(1.0, s.x(2));
  const double h = std::max(1.0, s.x(3));
  return BBox::from_center(s.x(0), s.x(1), w, h);
}

// Filter bundle used by the tracker.
class Filter {
 public:
  Filter(const BBox& box, const NoiseScales& scales = {})
      : model_(make_model(box, scales)), state_(init(box, scales.init)) {}

  const State& state() const { return state_; }
  const Model& model() const { return model_; }

  BBox predict() {
    state_ = kalman::predict(state_, model_);
    return predicted_bbox(state_);
  }
  void correct(const BBox& measured) { state_ = kalman::update(state_, measurement_of(measured), model_); }

 private:
  Model model_;
  State state_;
};

}  // namespace hytrack::kalman
