#pragma once

// Flat "key = value" run configuration. Every tunable has a default, a type
// and a valid range; unknown keys and out-of-range values are rejected when
// parsed. Layering: defaults < config file < command-line overrides.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hytrack/detector.hpp"
#include "hytrack/error.hpp"
#include "hytrack/tracker.hpp"

namespace hytrack {

enum class KeyType { integer, real, text };

struct KeySpec {
  std::string key;
  KeyType type;
  std::string default_value;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  bool min_exclusive = false;
  bool max_exclusive = false;
  const char* help = "";
};

inline const std::vector<KeySpec>& config_schema() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  static const std::vector<KeySpec> schema = {
      {"seed", KeyType::integer, "0", 0, 1.8446744073709552e19, false, false, "master random seed"},
      {"threads", KeyType::integer, "0", 0, 1024, false, false, "scoring threads per sequence, 0 = auto"},
      {"babs.pad", KeyType::integer, "0", 0, 1e6, false, false, "neighborhood ring in px, 0 = auto"},
      {"proposal.count", KeyType::integer, "256", 0, 1e6, false, false, "Gaussian proposals per frame"},
      {"proposal.cov_xy", KeyType::real, "0.09", 0, inf, true, false, "center variance / r^2"},
      {"proposal.cov_scale", KeyType::real, "0.25", 0, inf, true, false, "scale-exponent variance"},
      {"proposal.scale_base", KeyType::real, "1.05", 0, inf, true, false, "scale step base"},
      {"kalman.process_scale", KeyType::real, "0.01", 0, inf, false, false, "process noise / rbar^2"},
      {"kalman.measure_scale", KeyType::real, "0.01", 0, inf, false, false, "measurement noise / rbar^2"},
      {"kalman.init_scale", KeyType::real, "0.01", 0, inf, true, false, "initial variance / (w h)"},
      {"classifier.weights", KeyType::text, "", 0, 0, false, false, "weights file, empty = seeded"},
      {"classifier.lr_init", KeyType::real, "0.0005", 0, inf, true, false, "bootstrap/first-update rate"},
      {"classifier.lr_update", KeyType::real, "0.001", 0, inf, true, false, "rate after first update"},
      {"classifier.momentum", KeyType::real, "0.9", 0, 1, false, true, "SGD momentum"},
      {"classifier.dropout", KeyType::real, "0.5", 0, 1, false, true, "dropout after fc1 and fc2"},
      {"classifier.update_period", KeyType::integer, "10", 1, 10, false, false, "frames between updates"},
      {"classifier.update_iters", KeyType::integer, "10", 1, 1e6, false, false, "SGD steps per update"},
      {"classifier.bootstrap_iters", KeyType::integer, "30", 1, 1e6, false, false, "SGD steps at init"},
      {"classifier.batch_pos", KeyType::integer, "0", 0, 1e6, false, false, "positives per step, 0 = all"},
      {"classifier.batch_neg", KeyType::integer, "0", 0, 1e6, false, false, "negatives per step, 0 = all"},
      {"samples.positives", KeyType::integer, "50", 1, 1e5, false, false, "positives per frame"},
      {"samples.negatives", KeyType::integer, "200", 2, 1e5, false, false, "negatives per frame"},
      {"samples.pos_iou", KeyType::real, "0.7", 0, 1, true, false, "minimum positive IoU"},
      {"samples.neg_iou", KeyType::real, "0.3", 0, 1, false, true, "maximum negative IoU"},
      {"samples.pos_trans", KeyType::real, "0.03", 0, inf, false, false, "positive center jitter / r"},
      {"samples.pos_scale", KeyType::real, "0.15", 0, inf, false, false, "positive scale-exponent stddev"},
      {"tracker.scale_threshold", KeyType::real, "0.05", 0, inf, false, false, "Kalman fallback threshold"},
      {"tracker.dedup_iou", KeyType::real, "0.9", 0, 1, true, false, "detection merge IoU"},
      {"oracle.center_sigma", KeyType::real, "2", 0, inf, false, false, "oracle center jitter px"},
      {"oracle.size_sigma", KeyType::real, "0.02", 0, inf, false, false, "oracle log-size jitter"},
      {"oracle.miss_prob", KeyType::real, "0.1", 0, 1, false, false, "oracle miss probability"},
      {"oracle.fp_rate", KeyType::real, "0", 0, inf, false, false, "oracle false positives / call"},
      {"oracle.confidence_base", KeyType::real, "0.9", 0, 1, false, false, "oracle confidence"},
      {"oracle.blackout_first", KeyType::integer, "-1", -1, 1e9, false, false, "first blackout frame"},
      {"oracle.blackout_last", KeyType::integer, "-1", -1, 1e9, false, false, "last blackout frame"},
      {"oracle.inject_scale", KeyType::real, "0", 0, inf, false, false, "blackout decoy scale, 0 = none"},
  };
  return schema;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_schema()) values_[k.key] = k.default_value;
  }

  // Validate and store one value.
  void set(const std::string& key, const std::string& value) {
    const KeySpec& spec = find(key);
    if (spec.type == KeyType::text) {
      values_[key] = value;
      explicit_.insert({key, true});
      return;
    }
    errno = 0;
    char* end = nullptr;
    const double v = spec.type == KeyType::integer && key == "seed"
                         ? static_cast<double>(std::strtoull(value.c_str(), &end, 10))
                         : std::strtod(value.c_str(), &end);
    if (value.empty() || end == value.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
      throw ConfigError("config", key + ": cannot parse '" + value + "'");
    if (spec.type == KeyType::integer && v != std::floor(v))
      throw ConfigError("config", key + ": expected an integer, got '" + value + "'");
    const bool below = spec.min_exclusive ? !(v > spec.min) : !(v >= spec.min);
    const bool above = spec.max_exclusive ? !(v < spec.max) : !(v <= spec.max);
    if (below || above)
      throw ConfigError("config", key + ": value " + value + " out of range");
    if (key == "seed" && value.front() == '-')
      throw ConfigError("config", "seed: must be non-negative");
    values_[key] = value;
    explicit_.insert({key, true});
  }

  // Lines "key = value"; '#' starts a comment.
  void merge_stream(std::istream& in, const std::string& origin = "config") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string{};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config", origin + ":" + std::to_string(lineno) + ": expected key = value");
      try {
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError("config", origin + ":" + std::to_string(lineno) + ": " + e.message());
      }
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    merge_stream(in, path);
  }

  bool is_explicit(const std::string& key) const { return explicit_.count(key) > 0; }

  const std::string& text(const std::string& key) const {
    find(key);
    return values_.at(key);
  }
  double real(const std::string& key) const { return std::strtod(text(key).c_str(), nullptr); }
  long long integer(const std::string& key) const { return std::strtoll(text(key).c_str(), nullptr, 10); }
  std::uint64_t seed() const { return std::strtoull(text("seed").c_str(), nullptr, 10); }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : config_schema()) j[k.key] = values_.at(k.key);
    return j;
  }

  TrackerConfig tracker() const {
    TrackerConfig t;
    t.seed = seed();
    t.threads = static_cast<unsigned>(integer("threads"));
    t.pad = static_cast<int>(integer("babs.pad"));
    t.proposal.count = static_cast<int>(integer("proposal.count"));
    t.proposal.cov_xy_coeff = real("proposal.cov_xy");
    t.proposal.cov_scale = real("proposal.cov_scale");
    t.proposal.scale_base = real("proposal.scale_base");
    t.kalman.process = real("kalman.process_scale");
    t.kalman.measure = real("kalman.measure_scale");
    t.kalman.init = real("kalman.init_scale");
    t.weights = text("classifier.weights");
    t.lr_init = real("classifier.lr_init");
    t.lr_update = real("classifier.lr_update");
    t.momentum = real("classifier.momentum");
    t.dropout = real("classifier.dropout");
    t.update_period = static_cast<int>(integer("classifier.update_period"));
    t.update_iters = static_cast<int>(integer("classifier.update_iters"));
    t.bootstrap_iters = static_cast<int>(integer("classifier.bootstrap_iters"));
    t.batch_pos = static_cast<int>(integer("classifier.batch_pos"));
    t.batch_neg = static_cast<int>(integer("classifier.batch_neg"));
    t.samples.positives = static_cast<int>(integer("samples.positives"));
    t.samples.negatives = static_cast<int>(integer("samples.negatives"));
    t.samples.pos_iou = real("samples.pos_iou");
    t.samples.neg_iou = real("samples.neg_iou");
    t.samples.pos_trans = real("samples.pos_trans");
    t.samples.pos_scale = real("samples.pos_scale");
    t.scale_threshold = real("tracker.scale_threshold");
    t.dedup_iou = real("tracker.dedup_iou");
    return t;
  }

  OracleNoise oracle() const {
    OracleNoise n;
    n.center_sigma = real("oracle.center_sigma");
    n.size_sigma = real("oracle.size_sigma");
    n.miss_prob = real("oracle.miss_prob");
    n.fp_rate = real("oracle.fp_rate");
    n.confidence_base = real("oracle.confidence_base");
    n.seed = seed();
    return n;
  }

  Blackout blackout() const {
    return {static_cast<long>(integer("oracle.blackout_first")),
            static_cast<long>(integer("oracle.blackout_last")), real("oracle.inject_scale")};
  }

 private:
  static const KeySpec& find(const std::string& key) {
    for (const auto& k : config_schema())
      if (k.key == key) return k;
    throw ConfigError("config", "unknown key '" + key + "'");
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace hytrack
