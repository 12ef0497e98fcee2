#pragma once

// Per-sequence tracking session. Each frame fuses detector boxes, Gaussian
// proposals and the Kalman prediction, picks the best-scoring candidate,
// falls back to the Kalman box on abrupt scale changes, and retrains the fc
// head every `update_period` frames on the buffered samples.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <thread>
#include <vector>

#include "hytrack/babs.hpp"
#include "hytrack/classifier.hpp"
#include "hytrack/detector.hpp"
#include "hytrack/error.hpp"
#include "hytrack/geometry.hpp"
#include "hytrack/hsio.hpp"
#include "hytrack/kalman.hpp"
#include "hytrack/proposal.hpp"
#include "hytrack/rng.hpp"

namespace hytrack {

struct TrackerConfig {
  int pad = 0;  // BABS ring thickness; 0 selects babs::default_pad
  ProposalConfig proposal;
  kalman::NoiseScales kalman;
  classifier::SampleConfig samples;
  std::string weights;  // empty: seeded random network
  double lr_init = 0.0005;
  double lr_update = 0.001;
  double momentum = 0.9;
  double dropout = 0.5;
  int update_period = 10;
  int update_iters = 10;
  int bootstrap_iters = 30;
  int batch_pos = 0;  // 0 = full buffer
  int batch_neg = 0;
  double scale_threshold = 0.05;
  double dedup_iou = 0.9;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct TargetState {
  std::size_t frame = 0;
  BBox box;
  double score = 0.0;
  Source source = Source::groundtruth;
  bool scale_rule_fired = false;
};

// Union of detections across groups; a detection overlapping an already kept
// one at IoU > threshold is dropped. Higher confidence is kept first.
inline std::vector<Detection> dedup_detections(std::vector<Detection> dets, double threshold) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    const bool dup = std::any_of(kept.begin(), kept.end(),
                                 [&](const Detection& k) { return iou(k.box, d.box) > threshold; });
    if (!dup) kept.push_back(d);
  }
  return kept;
}

inline int source_priority(Source s) {
  switch (s) {
    case Source::detection: return 0;
    case Source::proposal: return 1;
    default: return 2;
  }
}

// Highest score; ties go to detections, then to the earlier candidate.
inline std::size_t select_optimal(const std::vector<Candidate>& cands) {
  if (cands.empty()) throw ArgumentError("tracker", "no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const auto& c = cands[i];
    const auto& b = cands[best];
    if (c.score > b.score ||
        (c.score == b.score && source_priority(c.source) < source_priority(b.source)))
      best = i;
  }
  return best;
}

// |scale(candidate) - scale(prev)| / scale(prev) > threshold, scale = sqrt(w h).
inline bool scale_jump(const BBox& candidate, const BBox& prev, double threshold) {
  const double sp = scale_of(prev);
  return std::abs(scale_of(candidate) - sp) / sp > threshold;
}

class TrackerSession {
 public:
  using Net = classifier::Network<float>;
  using Features = classifier::FeatureBatch<float>;

  TrackerSession(const HSCube& first, const BBox& gt, TrackerConfig config)
      : cfg_(std::move(config)),
        height_(first.height()),
        width_(first.width()),
        bands_(first.bands()),
        filter_(gt, cfg_.kalman),
        proposal_rng_(make_rng(cfg_.seed, Stream::proposal)),
        sampling_rng_(make_rng(cfg_.seed, Stream::sampling)),
        lr_current_(cfg_.lr_init) {
    validate();
    if (!gt.valid()) throw ArgumentError("tracker", "initial box is not valid");
    if (gt.x + gt.w <= 0.0 || gt.y + gt.h <= 0.0 || gt.x >= double(width_) ||
        gt.y >= double(height_))
      throw ArgumentError("tracker", "initial box lies outside the first frame");
    threads_ = cfg_.threads ? cfg_.threads : std::max(1u, std::thread::hardware_concurrency());

    ranking_ = babs::rank_bands(first, gt, cfg_.pad > 0 ? cfg_.pad : babs::default_pad(gt));
    net_ = classifier::load_or_init<float>(cfg_.weights, cfg_.seed);

    const auto image = compose_pseudo_color(first, ranking_.groups.front());
    const auto batch = featurize(classifier::collect_samples(image, gt, sampling_rng_, cfg_.samples));
    bootstrap_loss_before_ = batch_loss(batch);
    train(batch, cfg_.bootstrap_iters, cfg_.lr_init, 0);
    bootstrap_loss_after_ = batch_loss(batch);
    prev_ = {0, gt, 1.0, Source::groundtruth, false};
  }

  // Process the next frame. `detections` may come from any group.
  TargetState step(const HSCube& cube, const std::vector<Detection>& detections) {
    if (cube.height() != height_ || cube.width() != width_ || cube.bands() != bands_)
      throw DataError("tracker", "frame " + std::to_string(frame_counter_ + 1) +
                                     " dimensions differ from the first frame");
    ++frame_counter_;

    const BBox k_box = filter_.predict();

    std::vector<Candidate> cands;
    for (const auto& d : dedup_detections(detections, cfg_.dedup_iou))
      if (d.box.valid()) cands.push_back({d.box, Source::detection, 0.0});
    auto props = sample_candidates(prev_.box, cfg_.proposal, proposal_rng_);
    cands.insert(cands.end(), props.begin(), props.end());
    if (cands.empty())
      throw ConfigError("tracker", "frame " + std::to_string(frame_counter_) +
                                       ": no detections and zero proposals");

    const auto image = compose_pseudo_color(cube, ranking_.groups.front());
    std::vector<Patch> patches;
    patches.reserve(cands.size() + 1);
    for (const auto& c : cands) patches.push_back(extract_patch(image, c.box));
    patches.push_back(extract_patch(image, k_box));
    const auto scores = net_.score(patches, threads_);
    for (std::size_t i = 0; i < cands.size(); ++i) cands[i].score = scores[i];
    const double k_score = scores.back();

    const auto& best = cands[select_optimal(cands)];
    TargetState chosen{frame_counter_, best.box, best.score, best.source, false};
    if (scale_jump(best.box, prev_.box, cfg_.scale_threshold))
      chosen = {frame_counter_, k_box, k_score, Source::kalman, true};
    last_candidates_ = std::move(cands);

    filter_.correct(chosen.box);

    buffer_.push_back(featurize(classifier::collect_samples(image, chosen.box, sampling_rng_, cfg_.samples)));
    while (buffer_.size() > kBufferCapacity) buffer_.pop_front();
    if (frame_counter_ % std::size_t(cfg_.update_period) == 0) {
      std::vector<Features> parts(buffer_.begin(), buffer_.end());
      train(classifier::concat<float>(parts), cfg_.update_iters, lr_current_, frame_counter_);
      lr_current_ = cfg_.lr_update;
      buffer_.clear();
    }

    prev_ = chosen;
    return chosen;
  }

  static constexpr std::size_t kBufferCapacity = 10;

  const babs::BandRanking& ranking() const { return ranking_; }
  const TargetState& previous() const { return prev_; }
  const kalman::State& kalman_state() const { return filter_.state(); }
  const Net& network() const { return net_; }
  const std::vector<Candidate>& last_candidates() const { return last_candidates_; }
  double lr_current() const { return lr_current_; }
  std::size_t frame_counter() const { return frame_counter_; }
  std::size_t buffered_frames() const { return buffer_.size(); }
  std::uint64_t fc_checksum() const { return classifier::checksum(net_.head); }
  double bootstrap_loss_before() const { return bootstrap_loss_before_; }
  double bootstrap_loss_after() const { return bootstrap_loss_after_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  void validate() const {
    cfg_.proposal.validate();
    if (cfg_.update_period < 1 || cfg_.update_period > int(kBufferCapacity))
      throw ConfigError("tracker", "update period must lie in [1, 10]");
    if (cfg_.update_iters < 1 || cfg_.bootstrap_iters < 1)
      throw ConfigError("tracker", "training iterations must be >= 1");
    if (!(cfg_.lr_init > 0.0) || !(cfg_.lr_update > 0.0))
      throw ConfigError("tracker", "learning rates must be > 0");
    if (!(cfg_.scale_threshold >= 0.0)) throw ConfigError("tracker", "scale threshold must be >= 0");
  }

  Features featurize(const classifier::TrainBatch& b) const {
    return {net_.conv.features(b.positives, threads_), net_.conv.features(b.negatives, threads_)};
  }

  double batch_loss(const Features& b) const {
    classifier::Matrix<float> x(b.size(), classifier::kFeatureDim);
    x << b.positives, b.negatives;
    std::vector<int> labels(std::size_t(b.size()), 0);
    std::fill(labels.begin(), labels.begin() + b.positives.rows(), 1);
    return classifier::bce_loss(net_.head, x, labels);
  }

  void train(const Features& batch, int iters, double lr, std::size_t frame) {
    classifier::TrainOptions opt;
    opt.lr = lr;
    opt.iters = iters;
    opt.momentum = cfg_.momentum;
    opt.dropout = cfg_.dropout;
    opt.batch_pos = cfg_.batch_pos;
    opt.batch_neg = cfg_.batch_neg;
    opt.seed = mix_seed(cfg_.seed) ^ frame;
    try {
      classifier::train_fc(net_.head, batch, opt);
    } catch (const TrainingDivergence& e) {
      throw TrainingDivergence(e.iteration(), "frame " + std::to_string(frame) + ": fc update diverged");
    }
  }

  TrackerConfig cfg_;
  std::size_t height_, width_, bands_;
  unsigned threads_ = 1;
  babs::BandRanking ranking_;
  Net net_;
  kalman::Filter filter_;
  Rng proposal_rng_;
  Rng sampling_rng_;
  std::deque<Features> buffer_;
  std::vector<Candidate> last_candidates_;
  TargetState prev_;
  std::size_t frame_counter_ = 0;
  double lr_current_;
  double bootstrap_loss_before_ = 0.0;
  double bootstrap_loss_after_ = 0.0;
};

}  // namespace hytrack
