#pragma once

// Command-line front end: gen | match | eval | bench | imgdiff.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hmatch/classify.hpp"
#include "hmatch/error.hpp"
#include "hmatch/experiment.hpp"
#include "hmatch/io.hpp"
#include "hmatch/overlap.hpp"
#include "hmatch/parallel.hpp"
#include "hmatch/synth.hpp"

#ifndef HMATCH_VERSION
#define HMATCH_VERSION "0.0.0"
#endif

namespace hmatch::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Inconsistent or invalid command-line flags.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  /// 0 = $HMATCH_THREADS or hardware concurrency.
  std::size_t threads = 0;
  std::string out = ".";
  std::vector<std::string> argv;
};

/// Flags shared by `match` and `imgdiff` that select the classifier.
struct ClassifierFlags {
  std::string method = "rowsum";
  std::optional<double> threshold;
  bool kmeans = false;
  std::optional<double> expected_r;
  std::string preprocess = "cn";
};

inline MatchConfig make_match_config(const ClassifierFlags& f, std::uint64_t seed) {
  const int modes = (f.threshold ? 1 : 0) + (f.kmeans ? 1 : 0) + (f.expected_r ? 1 : 0);
  if (modes > 1) throw UsageError("--threshold, --kmeans and --expected-r are mutually exclusive");
  const auto method = parse_match_method(f.method);
  if (!method) throw UsageError("unknown --method '" + f.method + "' (expected eig or rowsum)");
  const auto mode = parse_preprocess_mode(f.preprocess);
  if (!mode) throw UsageError("unknown --preprocess '" + f.preprocess + "' (expected none or cn)");
  MatchConfig cfg;
  cfg.method = *method;
  cfg.threshold = f.threshold;
  cfg.inlier_fraction = f.expected_r;
  cfg.preprocess = *mode;
  cfg.seed = seed;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline json config_json(const MatchConfig& cfg) {
  json j;
  j["method"] = std::string(to_string(cfg.method));
  j["threshold"] = cfg.threshold ? json(*cfg.threshold) : json(nullptr);
  j["inlier_fraction"] = cfg.inlier_fraction ? json(*cfg.inlier_fraction) : json(nullptr);
  j["two_means"] = cfg.use_two_means();
  j["preprocess"] = std::string(to_string(cfg.preprocess));
  j["seed"] = cfg.seed;
  return j;
}

inline json scenario_json(const ScenarioSpec& s) {
  return json{{"d", s.d},     {"n", s.n},           {"r", s.r},
              {"kind", std::string(to_string(s.kind))}, {"sigma2", s.sigma2}, {"seed", s.seed}};
}

/// Manifest shared by every command; callers add command-specific fields.
inline json base_manifest(const std::string& command, const GlobalOptions& g,
                          const std::vector<fs::path>& outputs) {
  json m;
  m["tool"] = "hmatch";
  m["version"] = HMATCH_VERSION;
  m["command"] = command;
  m["argv"] = g.argv;
  m["seed"] = g.seed;
  std::vector<std::string> outs;
  for (const auto& p : outputs) outs.push_back(p.filename().string());
  m["outputs"] = outs;
  return m;
}

inline void commit_with_manifest(io::OutputBatch& batch, const fs::path& dir, json manifest) {
  const fs::path path = dir / "manifest.json";
  auto outs = manifest["outputs"];
  outs.push_back(path.filename().string());
  manifest["outputs"] = outs;
  batch.add(path, manifest.dump(2) + "\n");
  batch.commit();
}

inline json diagnostics_json(const MatchDiagnostics& d) {
  json j;
  j["method"] = std::string(to_string(d.method));
  j["threshold"] = d.threshold ? json(*d.threshold) : json(nullptr);
  j["cut"] = d.cut ? json(*d.cut) : json(nullptr);
  j["statistic_min"] = d.statistic_min;
  j["statistic_max"] = d.statistic_max;
  j["low_centroid"] = d.low_centroid ? json(*d.low_centroid) : json(nullptr);
  j["high_centroid"] = d.high_centroid ? json(*d.high_centroid) : json(nullptr);
  j["centroid_gap"] = d.centroid_gap();
  j["degenerate"] = d.degenerate;
  if (d.eigenvalue) {
    j["eigenvalue"] = *d.eigenvalue;
    j["residual"] = *d.residual;
    j["iterations"] = d.iterations;
    j["converged"] = d.converged;
  }
  return j;
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::size_t d = 0;
  std::size_t n = 0;
  double r = 0.5;
  std::string kind = "gaussian_outliers";
  double sigma2 = 0.0;
};

inline ScenarioSpec make_scenario(const GenOptions& o, std::uint64_t seed) {
  const auto kind = parse_scenario_kind(o.kind);
  if (!kind) throw UsageError("unknown --kind '" + o.kind + "'");
  return ScenarioSpec{o.d, o.n, o.r, *kind, o.sigma2, seed};
}

/// Writes X.csv, Y.csv, labels.csv and manifest.json into g.out.
inline void cmd_gen(const GlobalOptions& g, const GenOptions& o, std::ostream& out) {
  const ScenarioSpec spec = make_scenario(o, g.seed);
  const LabeledPair pair = generate(spec);
  const fs::path dir = g.out;
  io::OutputBatch batch;
  batch.add(dir / "X.csv", io::format_matrix_csv(pair.x));
  batch.add(dir / "Y.csv", io::format_matrix_csv(pair.y));
  batch.add(dir / "labels.csv", io::format_labels(pair.inliers));
  json m = base_manifest("gen", g, batch.paths());
  m["scenario"] = scenario_json(spec);
  commit_with_manifest(batch, dir, m);
  out << "generated d=" << spec.d << " n=" << spec.n << " inliers=" << pair.inliers.size()
      << " -> " << dir.string() << "\n";
}

// ---------------------------------------------------------------- match

struct MatchOptions {
  std::string x_path;
  std::string y_path;
  ClassifierFlags classifier;
  std::size_t splits = 1;
};

struct MatchOutcome {
  LabelPartition partition;
  double wall_ms = 0.0;
};

/// Reads X and Y, classifies, writes partition.csv, diagnostics.json and
/// manifest.json into g.out. Nothing is written when any step fails.
inline MatchOutcome cmd_match(const GlobalOptions& g, const MatchOptions& o, std::ostream& out) {
  const MatchConfig cfg = make_match_config(o.classifier, g.seed);
  if (o.splits == 0) throw UsageError("--splits must be >= 1");
  const DenseMatrix x = io::read_matrix_csv(o.x_path);
  const DenseMatrix y = io::read_matrix_csv(o.y_path);
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw InvalidArgument("X is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                          " but Y is " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }

  MatchOutcome result;
  json diag;
  if (o.splits == 1) {
    const auto t0 = std::chrono::steady_clock::now();
    MatchResult r = match_points(x, y, cfg);
    result.wall_ms = detail::elapsed_ms(t0);
    result.partition = r.partition;
    diag = diagnostics_json(r.diagnostics);
  } else {
    ParallelReport rep = parallel_match(x, y, o.splits, cfg, ParallelOptions{g.threads});
    result.wall_ms = rep.total_ms;
    result.partition = rep.partition;
    json shards = json::array();
    for (const auto& s : rep.shards) {
      json js = diagnostics_json(s.result.diagnostics);
      js["size"] = s.indices.size();
      js["inliers"] = s.result.partition.inliers().size();
      js["wall_ms"] = s.wall_ms;
      shards.push_back(js);
    }
    diag["shards"] = shards;
    diag["degenerate_shards"] = rep.degenerate_shards;
  }
  diag["n"] = x.cols();
  diag["d"] = x.rows();
  diag["splits"] = o.splits;
  diag["inliers"] = result.partition.inliers().size();
  diag["outliers"] = result.partition.outliers().size();
  diag["wall_ms"] = result.wall_ms;

  const fs::path dir = g.out;
  io::OutputBatch batch;
  batch.add(dir / "partition.csv", io::format_partition(result.partition));
  batch.add(dir / "diagnostics.json", diag.dump(2) + "\n");
  json m = base_manifest("match", g, batch.paths());
  m["config"] = config_json(cfg);
  m["splits"] = o.splits;
  m["inputs"] = {o.x_path, o.y_path};
  commit_with_manifest(batch, dir, m);

  if (diag.value("degenerate", false)) {
    out << "warning: statistic has no spread; all points labelled B\n";
  }
  out << "matched n=" << x.cols() << " inliers=" << result.partition.inliers().size()
      << " outliers=" << result.partition.outliers().size() << " (" << result.wall_ms << " ms)\n";
  return result;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string partition_path;
  std::string labels_path;
};

inline std::string format_error_line(const ErrorReport& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", r.error_g, r.error_b, r.error_w);
  return buf;
}

/// Prints "error_G,error_B,error_W".
inline ErrorReport cmd_eval(const EvalOptions& o, std::ostream& out) {
  const LabelPartition est = io::parse_partition(io::read_file(o.partition_path));
  const auto truth = io::parse_labels(io::read_file(o.labels_path));
  if (!truth.empty() && truth.back() >= est.size()) {
    throw InvalidArgument("labels refer to index " + std::to_string(truth.back()) +
                          " but the partition covers only " + std::to_string(est.size()) +
                          " indices");
  }
  const ErrorReport r = error_rates(truth, est);
  out << format_error_line(r) << "\n";
  return r;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  std::string sweep = "all";
  std::size_t trials = 100;
  std::size_t split_trials = 3;
  std::string preprocess = "cn";
  RSweepParams r;
  NoiseSweepParams noise;
  SplitSweepParams split;
};

inline void cmd_bench(const GlobalOptions& g, const BenchOptions& o, std::ostream& out) {
  const bool all = o.sweep == "all";
  if (!all && o.sweep != "r" && o.sweep != "sigma2" && o.sweep != "splits") {
    throw UsageError("unknown --sweep '" + o.sweep + "'");
  }
  const auto mode = parse_preprocess_mode(o.preprocess);
  if (!mode) throw UsageError("unknown --preprocess '" + o.preprocess + "'");
  SweepOptions opts;
  opts.trials = o.trials;
  opts.seed = g.seed;
  opts.threads = g.threads;
  opts.preprocess = *mode;

  const fs::path dir = g.out;
  io::OutputBatch batch;
  json m;
  if (all || o.sweep == "r") {
    out << "r sweep: " << o.trials << " trials x " << o.r.grid.size() << " grid points\n";
    batch.add(dir / "r_sweep.csv", format_sweep_csv(r_sweep(o.r, opts)));
    m["r_sweep"] = {{"n", o.r.n}, {"d", o.r.d}, {"kind", std::string(to_string(o.r.kind))},
                    {"grid", o.r.grid}, {"trials", o.trials}};
  }
  if (all || o.sweep == "sigma2") {
    out << "sigma2 sweep: " << o.trials << " trials x " << o.noise.grid.size() << " grid points\n";
    batch.add(dir / "sigma2_sweep.csv", format_sweep_csv(sigma2_sweep(o.noise, opts)));
    m["sigma2_sweep"] = {{"n", o.noise.n},   {"d", o.noise.d},       {"r", o.noise.r},
                         {"kind", std::string(to_string(o.noise.kind))},
                         {"grid", o.noise.grid}, {"trials", o.trials}};
  }
  if (all || o.sweep == "splits") {
    SweepOptions sopts = opts;
    sopts.trials = o.split_trials;
    out << "splits sweep: " << o.split_trials << " trials at n=" << o.split.n << "\n";
    batch.add(dir / "splits_sweep.csv", format_sweep_csv(splits_sweep(o.split, sopts)));
    m["splits_sweep"] = {{"n", o.split.n},   {"d", o.split.d},        {"r", o.split.r},
                         {"kind", std::string(to_string(o.split.kind))},
                         {"splits", o.split.splits}, {"trials", o.split_trials}};
  }
  json manifest = base_manifest("bench", g, batch.paths());
  manifest["sweeps"] = m;
  manifest["preprocess"] = o.preprocess;
  commit_with_manifest(batch, dir, manifest);
  out << "wrote sweeps to " << dir.string() << "\n";
}

// ---------------------------------------------------------------- imgdiff

struct ImgDiffOptions {
  std::string a_path;
  std::string b_path;
  ClassifierFlags classifier;
  /// Classify a random subset of this many pixels; 0 = every pixel.
  std::size_t sample = 0;
  std::size_t max_pixels = 20000;
};

struct ImgDiffOutcome {
  io::Image mask;
  /// Pixel indices (row-major) highlighted as changed.
  std::vector<std::size_t> changed;
  bool identical = false;
  bool degenerate = false;
};

/// Grayscale copy of `base` with the listed pixels painted yellow.
inline io::Image highlight(const io::Image& base, const std::vector<std::size_t>& changed) {
  io::Image out = base;
  for (std::size_t p = 0; p < base.pixels(); ++p) {
    const unsigned r = base.rgb[3 * p], g = base.rgb[3 * p + 1], b = base.rgb[3 * p + 2];
    const auto gray = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    out.rgb[3 * p] = out.rgb[3 * p + 1] = out.rgb[3 * p + 2] = gray;
  }
  for (std::size_t p : changed) {
    out.rgb[3 * p] = 255;
    out.rgb[3 * p + 1] = 255;
    out.rgb[3 * p + 2] = 0;
  }
  return out;
}

/// Treats every pixel as an RGB point (X from image A, Y from image B),
/// classifies, and writes mask.ppm with outlier pixels in yellow over a
/// grayscale copy of A. Bit-identical inputs give an empty mask.
inline ImgDiffOutcome cmd_imgdiff(const GlobalOptions& g, const ImgDiffOptions& o, std::ostream& out) {
  const MatchConfig cfg = make_match_config(o.classifier, g.seed);
  const io::Image a = io::read_ppm(o.a_path);
  const io::Image b = io::read_ppm(o.b_path);
  if (a.width != b.width || a.height != b.height) {
    throw InvalidArgument("image sizes differ: " + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height));
  }

  ImgDiffOutcome result;
  json diag;
  diag["pixels"] = a.pixels();
  if (a == b) {
    result.identical = true;
    diag["identical"] = true;
  } else {
    std::vector<std::size_t> idx(a.pixels());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (o.sample > 0 && o.sample < idx.size()) {
      RandomStream rng(g.seed, 0);
      rng.shuffle(std::span<std::size_t>(idx));
      idx.resize(o.sample);
      std::sort(idx.begin(), idx.end());
    }
    if (idx.size() > o.max_pixels) {
      throw InvalidArgument(std::to_string(idx.size()) + " pixels exceed --max-pixels " +
                            std::to_string(o.max_pixels) + "; use --sample or raise the cap");
    }
    const DenseMatrix x = io::image_to_points(a).select_columns(idx);
    const DenseMatrix y = io::image_to_points(b).select_columns(idx);
    const MatchResult r = match_points(x, y, cfg);
    for (std::size_t local : r.partition.outliers()) result.changed.push_back(idx[local]);
    result.degenerate = r.diagnostics.degenerate;
    diag = diagnostics_json(r.diagnostics);
    diag["pixels"] = a.pixels();
    diag["classified"] = idx.size();
    diag["identical"] = false;
  }
  diag["changed"] = result.changed.size();
  result.mask = highlight(a, result.changed);

  const fs::path dir = g.out;
  io::OutputBatch batch;
  batch.add(dir / "mask.ppm", io::format_ppm(result.mask));
  batch.add(dir / "diagnostics.json", diag.dump(2) + "\n");
  json m = base_manifest("imgdiff", g, batch.paths());
  m["config"] = config_json(cfg);
  m["inputs"] = {o.a_path, o.b_path};
  m["sample"] = o.sample;
  m["max_pixels"] = o.max_pixels;
  commit_with_manifest(batch, dir, m);
  if (result.degenerate) out << "warning: statistic has no spread; all pixels labelled changed\n";
  out << "highlighted " << result.changed.size() << " of " << a.pixels() << " pixels\n";
  return result;
}

// ---------------------------------------------------------------- entry point

inline void add_classifier_flags(CLI::App* cmd, ClassifierFlags& f) {
  cmd->add_option("--method", f.method, "eig | rowsum")
      ->check(CLI::IsMember({"eig", "rowsum"}))
      ->capture_default_str();
  cmd->add_option("--threshold", f.threshold, "fixed threshold t (eig) or T (rowsum)");
  cmd->add_flag("--kmeans", f.kmeans, "classify with 2-means (default when no threshold is given)");
  cmd->add_option("--expected-r", f.expected_r,
                  "known inlier fraction; uses t=0.5 or T=d(rn+1)/2");
  cmd->add_option("--preprocess", f.preprocess, "none | cn (center rows, normalise columns)")
      ->check(CLI::IsMember({"none", "cn"}))
      ->capture_default_str();
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Inlier recovery for paired point sets from the overlap of their Gram matrices"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", HMATCH_VERSION);

  GlobalOptions g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--threads", g.threads,
                 std::string("worker threads (default: $") + kThreadsEnvVar +
                     " or hardware concurrency)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic labelled pair");
  gen_cmd->add_option("--d", gen.d, "dimension")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--n", gen.n, "number of points")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--r", gen.r, "inlier fraction (r*n must be an integer)")->required();
  gen_cmd->add_option("--kind", gen.kind, "gaussian_outliers | permuted_inliers")
      ->check(CLI::IsMember({"gaussian_outliers", "permuted_inliers"}))
      ->capture_default_str();
  gen_cmd->add_option("--sigma2", gen.sigma2, "noise variance added to Y")->capture_default_str();

  MatchOptions mo;
  auto* match_cmd = app.add_subcommand("match", "classify paired points as inliers or outliers");
  match_cmd->add_option("X", mo.x_path, "X matrix CSV (d rows, n columns)")->required();
  match_cmd->add_option("Y", mo.y_path, "Y matrix CSV")->required();
  add_classifier_flags(match_cmd, mo.classifier);
  match_cmd->add_option("--splits", mo.splits, "split-merge shard count")->capture_default_str();

  EvalOptions eo;
  auto* eval_cmd = app.add_subcommand("eval", "error rates of a partition against labels");
  eval_cmd->add_option("partition", eo.partition_path, "partition.csv")->required();
  eval_cmd->add_option("labels", eo.labels_path, "labels.csv")->required();

  BenchOptions bo;
  auto* bench_cmd = app.add_subcommand("bench", "run Monte-Carlo sweeps");
  bench_cmd->add_option("--sweep", bo.sweep, "r | sigma2 | splits | all")
      ->check(CLI::IsMember({"r", "sigma2", "splits", "all"}))
      ->capture_default_str();
  bench_cmd->add_option("--trials", bo.trials, "trials per grid point")->capture_default_str();
  bench_cmd->add_option("--split-trials", bo.split_trials, "trials for the splits sweep")
      ->capture_default_str();
  bench_cmd->add_option("--preprocess", bo.preprocess, "none | cn")
      ->check(CLI::IsMember({"none", "cn"}))
      ->capture_default_str();
  bench_cmd->add_option("--r-n", bo.r.n, "n for the r sweep")->capture_default_str();
  bench_cmd->add_option("--r-d", bo.r.d, "d for the r sweep")->capture_default_str();
  bench_cmd->add_option("--r-grid", bo.r.grid, "inlier fractions")->delimiter(',');
  bench_cmd->add_option("--sigma-n", bo.noise.n, "n for the sigma2 sweep")->capture_default_str();
  bench_cmd->add_option("--sigma-d", bo.noise.d, "d for the sigma2 sweep")->capture_default_str();
  bench_cmd->add_option("--sigma-r", bo.noise.r, "r for the sigma2 sweep")->capture_default_str();
  bench_cmd->add_option("--sigma-grid", bo.noise.grid, "noise variances")->delimiter(',');
  bench_cmd->add_option("--split-n", bo.split.n, "n for the splits sweep")->capture_default_str();
  bench_cmd->add_option("--split-d", bo.split.d, "d for the splits sweep")->capture_default_str();
  bench_cmd->add_option("--split-r", bo.split.r, "r for the splits sweep")->capture_default_str();
  bench_cmd->add_option("--split-grid", bo.split.splits, "split counts")->delimiter(',');

  ImgDiffOptions io_opts;
  auto* img_cmd = app.add_subcommand("imgdiff", "highlight pixels that changed between two PPM images");
  img_cmd->add_option("A", io_opts.a_path, "reference image (binary PPM)")->required();
  img_cmd->add_option("B", io_opts.b_path, "changed image (binary PPM)")->required();
  add_classifier_flags(img_cmd, io_opts.classifier);
  img_cmd->add_option("--sample", io_opts.sample, "classify this many random pixels (0 = all)")
      ->capture_default_str();
  img_cmd->add_option("--max-pixels", io_opts.max_pixels, "refuse to build H for more pixels")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) {
      cmd_gen(g, gen, out);
    } else if (*match_cmd) {
      cmd_match(g, mo, out);
    } else if (*eval_cmd) {
      cmd_eval(eo, out);
    } else if (*bench_cmd) {
      cmd_bench(g, bo, out);
    } else if (*img_cmd) {
      cmd_imgdiff(g, io_opts, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace hmatch::cli
