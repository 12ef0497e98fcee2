// hytrack: command-line front end.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hytrack/augment.hpp"
#include "hytrack/babs.hpp"
#include "hytrack/config.hpp"
#include "hytrack/pipeline.hpp"
#include "hytrack/sequence.hpp"
#include "hytrack/simulate.hpp"
#include "png_io.hpp"

#ifndef HYTRACK_VERSION
#define HYTRACK_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace hytrack;

namespace {

// User-facing option problems surface as exit code 2.
struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error("cli", msg) {}
};

BBox parse_box(const std::string& s) {
  std::istringstream in(s);
  const auto boxes = parse_groundtruth(in);
  if (boxes.size() != 1) throw UsageError("expected a box as x,y,w,h, got '" + s + "'");
  return boxes.front();
}

// ---------------------------------------------------------------------------

struct DemosaicArgs {
  std::string input, output;
  std::size_t tile = 4;
  std::size_t width = 0, height = 0;
  int bit_depth = 16;
};

int run_demosaic(const DemosaicArgs& a) {
  Mosaic m;
  if (fs::path(a.input).extension() == ".png") {
    m = png::read_mosaic(a.input);
  } else {
    if (a.width == 0 || a.height == 0)
      throw UsageError("raw mosaic input needs --width and --height");
    const auto bytes = detail::slurp(a.input);
    if (bytes.size() != a.width * a.height * 2)
      throw FormatError("hsio", a.input + ": expected " + std::to_string(a.width * a.height * 2) +
                                    " bytes of 16-bit samples, found " + std::to_string(bytes.size()));
    m.width = a.width;
    m.height = a.height;
    m.bit_depth = a.bit_depth;
    m.data.resize(a.width * a.height);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      m.data[i] = std::uint16_t(std::uint8_t(bytes[2 * i]) | (std::uint8_t(bytes[2 * i + 1]) << 8));
  }
  write_cube(a.output, demosaic(m, a.tile));
  return 0;
}

// ---------------------------------------------------------------------------

struct BabsArgs {
  std::string input, output, box;
  int pad = 0;
  int bit_depth = 16;
};

int run_babs(const BabsArgs& a) {
  HSCube cube;
  BBox gt;
  if (fs::is_directory(a.input)) {
    const auto seq = open_sequence(a.input);
    cube = seq.frame(0);
    if (!a.box.empty())
      gt = parse_box(a.box);
    else if (!seq.groundtruth.empty())
      gt = seq.groundtruth.front();
    else
      throw UsageError(a.input + " has no ground truth; pass --box");
  } else {
    if (a.box.empty()) throw UsageError("a single cube needs --box x,y,w,h");
    cube = read_cube(a.input, a.bit_depth);
    gt = parse_box(a.box);
  }
  const int pad = a.pad > 0 ? a.pad : babs::default_pad(gt);
  const auto r = babs::rank_bands(cube, gt, pad);
  nlohmann::json j{{"pad", pad}, {"scores", r.scores}, {"order", r.order}, {"groups", r.groups}};
  if (a.output.empty())
    std::cout << j.dump(2) << '\n';
  else
    std::ofstream(a.output) << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  std::string sequence, out;
  int count = 500;
  std::uint64_t seed = 0;
};

int run_augment(const AugmentArgs& a) {
  const auto seq = open_sequence(a.sequence);
  if (seq.groundtruth.empty()) throw DataError("augment", seq.name + " has no ground truth");
  const auto first = seq.frame(0);
  const auto gt = seq.groundtruth.front();
  const auto params = augment::default_params(first.width(), first.height(), gt, a.count, a.seed);
  fs::create_directories(a.out);
  std::ofstream labels(fs::path(a.out) / "labels.jsonl");
  labels << nlohmann::json{{"sequence", seq.name + "-augment"}, {"frames", a.count}}.dump() << '\n';
  for (int i = 0; i < a.count; ++i) {
    const auto s = augment::synthesize_one(first, gt, params, std::size_t(i));
    write_cube(fs::path(a.out) / frame_filename(std::size_t(i)), s.image);
    labels << detection_to_json({std::size_t(i), 0, s.label, 1.0}).dump() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string out, name, occlusion;
  simulate::SimulationConfig cfg;
};

int run_simulate(SimulateArgs a) {
  if (!a.occlusion.empty()) {
    const auto colon = a.occlusion.find(':');
    if (colon == std::string::npos) throw UsageError("--occlusion expects FIRST:LAST");
    try {
      a.cfg.occlusion_first = std::stol(a.occlusion.substr(0, colon));
      a.cfg.occlusion_last = std::stol(a.occlusion.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw UsageError("--occlusion expects FIRST:LAST, got '" + a.occlusion + "'");
    }
  }
  const std::string name = a.name.empty() ? fs::absolute(a.out).lexically_normal().filename().string() : a.name;
  simulate::Generator(a.cfg).write(a.out, name);
  return 0;
}

// ---------------------------------------------------------------------------

struct TrackArgs {
  std::vector<std::string> sequences;
  std::string out, detections, config_file;
  std::vector<std::string> overrides;
  bool oracle = false;
  std::string seed, proposals;
  unsigned jobs = 1;
  bool quiet = false;
};

RunConfig build_config(const TrackArgs& a) {
  RunConfig cfg;
  if (const char* env = std::getenv("HYTRACK_SEED"); env && *env) cfg.set("seed", env);
  if (!a.config_file.empty()) cfg.merge_file(a.config_file);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!a.seed.empty()) cfg.set("seed", a.seed);
  if (!a.proposals.empty()) cfg.set("proposal.count", a.proposals);
  return cfg;
}

std::string detections_for(const TrackArgs& a, const std::string& name) {
  if (a.detections.empty()) return {};
  if (fs::is_directory(a.detections)) return (fs::path(a.detections) / (name + ".jsonl")).string();
  return a.detections;
}

struct TrackOutput {
  std::vector<Sequence> sequences;
  std::vector<TrackResult> results;
};

TrackOutput run_track(const TrackArgs& a) {
  if (a.oracle == !a.detections.empty())
    throw UsageError("select exactly one detection source: --detections PATH or --oracle");
  if (a.sequences.size() > 1 && !a.detections.empty() && !fs::is_directory(a.detections))
    throw UsageError("with several sequences --detections must be a directory of <name>.jsonl");
  RunConfig cfg;
  try {
    cfg = build_config(a);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  TrackOutput out;
  for (const auto& path : a.sequences) out.sequences.push_back(open_sequence(path));
  out.results.resize(out.sequences.size());
  fs::create_directories(a.out);

  const auto tracker_cfg = cfg.tracker();
  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < out.sequences.size();) {
      try {
        const auto& seq = out.sequences[i];
        auto det = make_detector(seq, cfg, detections_for(a, seq.name), a.oracle);
        auto res = track_sequence(seq, *det, tracker_cfg);
        write_trajectory(fs::path(a.out) / (seq.name + ".csv"), res.states);
        if (!a.quiet) {
          std::lock_guard lock(io);
          std::fprintf(stderr, "%s: %zu frames in %.1f s (%.2f fps)\n", seq.name.c_str(),
                       res.states.size(), res.seconds, double(res.states.size()) / res.seconds);
        }
        out.results[i] = std::move(res);
      } catch (const Error& e) {
        std::lock_guard lock(io);
        if (!failure) failure = std::make_exception_ptr(Error(e.module(), out.sequences[i].name + ": " + e.message()));
        next = out.sequences.size();
      } catch (...) {
        std::lock_guard lock(io);
        if (!failure) failure = std::current_exception();
        next = out.sequences.size();
      }
    }
  };
  const unsigned jobs = std::clamp<unsigned>(a.jobs, 1, unsigned(std::max<std::size_t>(1, out.sequences.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  // Everything except "timing" is a pure function of the inputs.
  nlohmann::json manifest;
  manifest["tool"] = "hytrack";
  manifest["version"] = HYTRACK_VERSION;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION);
  manifest["config"] = cfg.to_json();
  manifest["seeds"] = {{"master", cfg.seed()},
                       {"streams", {{"proposal", int(Stream::proposal)},
                                    {"oracle", int(Stream::oracle)},
                                    {"classifier_init", int(Stream::classifier_init)},
                                    {"sampling", int(Stream::sampling)},
                                    {"training", int(Stream::training)}}}};
  manifest["detector"] = a.oracle ? nlohmann::json{{"kind", "oracle"}}
                                  : nlohmann::json{{"kind", "jsonl"}, {"path", a.detections}};
  nlohmann::json seqs = nlohmann::json::array(), timing = nlohmann::json::object();
  for (std::size_t i = 0; i < out.sequences.size(); ++i) {
    seqs.push_back({{"name", out.sequences[i].name},
                    {"path", a.sequences[i]},
                    {"frames", out.sequences[i].size()},
                    {"bit_depth", out.sequences[i].bit_depth}});
    timing[out.results[i].name] = out.results[i].seconds;
  }
  manifest["sequences"] = seqs;
  manifest["timing"] = timing;
  std::ofstream(fs::path(a.out) / "run.json") << manifest.dump(2) << '\n';
  return out;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string results, gt, out, curves;
};

void emit_report(const Report& rep, const std::string& out, const std::string& curves) {
  if (out.empty()) {
    std::cout << eval::kReportHeader << '\n';
    for (const auto& r : rep.rows) std::cout << eval::format_row(r) << '\n';
    std::cout << eval::format_row(rep.total) << '\n';
  } else {
    write_report(out, rep);
  }
  if (!curves.empty()) write_curves(curves, rep.total_curves);
}

int run_eval(const EvalArgs& a) {
  emit_report(evaluate(collect_results(a.results, a.gt)), a.out, a.curves);
  return 0;
}

int run_all(const TrackArgs& a, const std::string& report, const std::string& curves) {
  const auto tracked = run_track(a);
  std::vector<EvalInput> inputs;
  for (std::size_t i = 0; i < tracked.sequences.size(); ++i) {
    const auto& seq = tracked.sequences[i];
    EvalInput in;
    in.name = seq.name;
    for (const auto& s : tracked.results[i].states) in.predicted.push_back(s.box);
    in.groundtruth = seq.groundtruth;
    in.groundtruth.resize(std::min(in.groundtruth.size(), in.predicted.size()));
    in.seconds = tracked.results[i].seconds;
    inputs.push_back(std::move(in));
  }
  const auto rep = evaluate(inputs);
  const fs::path out = a.out;
  emit_report(rep, report.empty() ? (out / "report.csv").string() : report,
              curves.empty() ? (out / "curves.csv").string() : curves);
  if (report.empty()) {
    std::cout << eval::kReportHeader << '\n';
    for (const auto& r : rep.rows) std::cout << eval::format_row(r) << '\n';
    std::cout << eval::format_row(rep.total) << '\n';
  }
  return 0;
}

void add_track_options(CLI::App* cmd, TrackArgs& a) {
  cmd->add_option("sequences", a.sequences, "sequence directories")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--out,-o", a.out, "output directory")->required();
  cmd->add_option("--detections", a.detections, "JSON-lines detections file, or a directory of <name>.jsonl");
  cmd->add_flag("--oracle", a.oracle, "use the noisy ground-truth oracle as detector");
  cmd->add_option("--seed", a.seed, "master seed (fallback: HYTRACK_SEED)");
  cmd->add_option("--proposals", a.proposals, "Gaussian proposals per frame");
  cmd->add_option("--config", a.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", a.overrides, "override one configuration key (key=value)");
  cmd->add_option("--jobs,-j", a.jobs, "sequences tracked in parallel")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet,-q", a.quiet, "no progress output");
}

int dispatch(int argc, char** argv) {
  CLI::App app{"hyperspectral single-object tracker"};
  app.set_version_flag("--version", HYTRACK_VERSION);
  app.require_subcommand(1);

  DemosaicArgs dm;
  auto* c_dm = app.add_subcommand("demosaic", "unpack a k x k snapshot mosaic into a cube file");
  c_dm->add_option("input", dm.input, "16-bit grayscale PNG or raw little-endian u16")->required()->check(CLI::ExistingFile);
  c_dm->add_option("output", dm.output, "cube file")->required();
  c_dm->add_option("--tile,-k", dm.tile, "mosaic tile side")->check(CLI::PositiveNumber);
  c_dm->add_option("--width", dm.width, "raw input width");
  c_dm->add_option("--height", dm.height, "raw input height");
  c_dm->add_option("--bit-depth", dm.bit_depth, "raw sample bit depth")->check(CLI::Range(1, 16));

  BabsArgs ba;
  auto* c_ba = app.add_subcommand("babs-rank", "rank and group bands against the target neighborhood");
  c_ba->add_option("input", ba.input, "sequence directory or cube file")->required()->check(CLI::ExistingPath);
  c_ba->add_option("--box", ba.box, "target box x,y,w,h (default: first ground-truth line)");
  c_ba->add_option("--pad", ba.pad, "neighborhood ring thickness in px")->check(CLI::NonNegativeNumber);
  c_ba->add_option("--bit-depth", ba.bit_depth, "cube bit depth")->check(CLI::Range(1, 16));
  c_ba->add_option("--out,-o", ba.output, "JSON output file (default: stdout)");

  AugmentArgs au;
  auto* c_au = app.add_subcommand("augment", "Gaussian cut-paste augmentation of the first frame");
  c_au->add_option("sequence", au.sequence, "sequence directory")->required()->check(CLI::ExistingDirectory);
  c_au->add_option("-K,--count", au.count, "number of samples")->check(CLI::PositiveNumber);
  c_au->add_option("--seed", au.seed, "random seed");
  c_au->add_option("--out,-o", au.out, "output directory")->required();

  SimulateArgs si;
  auto* c_si = app.add_subcommand("simulate", "write a synthetic sequence with ground truth");
  c_si->add_option("out", si.out, "output sequence directory")->required();
  c_si->add_option("--name", si.name, "sequence name (default: directory name)");
  c_si->add_option("--frames", si.cfg.frames, "frame count")->check(CLI::PositiveNumber);
  c_si->add_option("--seed", si.cfg.seed, "random seed");
  c_si->add_option("--width", si.cfg.width, "frame width");
  c_si->add_option("--height", si.cfg.height, "frame height");
  c_si->add_option("--bands", si.cfg.bands, "spectral bands");
  c_si->add_option("--vx", si.cfg.vx, "target velocity, px/frame");
  c_si->add_option("--vy", si.cfg.vy, "target velocity, px/frame");
  c_si->add_option("--occlusion", si.occlusion, "occluded frame window FIRST:LAST");
  c_si->add_option("--occlusion-fraction", si.cfg.occlusion_fraction, "hidden share of the target")
      ->check(CLI::Range(0.0, 1.0));
  c_si->add_option("--noise", si.cfg.noise_sigma, "sensor noise, fraction of full scale");

  TrackArgs tr;
  auto* c_tr = app.add_subcommand("track", "track sequences, one trajectory CSV each");
  add_track_options(c_tr, tr);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "success/precision report over trajectory CSVs");
  c_ev->add_option("--results", ev.results, "directory of <name>.csv trajectories")->required();
  c_ev->add_option("--gt", ev.gt, "directory holding <name>/groundtruth_rect.txt")->required();
  c_ev->add_option("--out,-o", ev.out, "report CSV (default: stdout)");
  c_ev->add_option("--curves", ev.curves, "curve CSV for the total row");

  TrackArgs al;
  std::string al_report, al_curves;
  auto* c_al = app.add_subcommand("all", "track then evaluate");
  add_track_options(c_al, al);
  c_al->add_option("--report", al_report, "report CSV (default: <out>/report.csv)");
  c_al->add_option("--curves", al_curves, "curve CSV (default: <out>/curves.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // 0 for --help, usage errors map to 2 below
  }

  if (*c_dm) return run_demosaic(dm);
  if (*c_ba) return run_babs(ba);
  if (*c_au) return run_augment(au);
  if (*c_si) return run_simulate(si);
  if (*c_tr) return run_track(tr), 0;
  if (*c_ev) return run_eval(ev);
  if (*c_al) return run_all(al, al_report, al_curves);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const int code = dispatch(argc, argv);
    return code == 0 ? 0 : (code == 1 ? 1 : 2);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "hytrack: usage error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "hytrack: error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hytrack: error: %s\n", e.what());
    return 1;
  }
}
