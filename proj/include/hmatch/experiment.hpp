#pragma once

// Monte-Carlo sweeps: error rates and timings of a set of matcher variants
// over a grid of inlier fractions, noise levels or split counts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hmatch/classify.hpp"
#include "hmatch/io.hpp"
#include "hmatch/overlap.hpp"
#include "hmatch/parallel.hpp"
#include "hmatch/random.hpp"
#include "hmatch/synth.hpp"

namespace hmatch {

struct MethodVariant {
  std::string name;
  MatchMethod method = MatchMethod::row_sum;
  std::optional<double> threshold;

  MatchConfig config(PreprocessMode mode, std::uint64_t seed = 0) const {
    MatchConfig c;
    c.method = method;
    c.threshold = threshold;
    c.preprocess = mode;
    c.seed = seed;
    return c;
  }
};

/// Eigenvector matching with t in {0.3, 0.5, 0.7} and with 2-means, and
/// row-sum matching with 2-means.
inline std::vector<MethodVariant> standard_methods() {
  return {
      {"eig_t0.3", MatchMethod::eigenvector, 0.3},
      {"eig_t0.5", MatchMethod::eigenvector, 0.5},
      {"eig_t0.7", MatchMethod::eigenvector, 0.7},
      {"eig_kmeans", MatchMethod::eigenvector, std::nullopt},
      {"rowsum_kmeans", MatchMethod::row_sum, std::nullopt},
  };
}

inline std::vector<MethodVariant> kmeans_methods() {
  return {
      {"eig_kmeans", MatchMethod::eigenvector, std::nullopt},
      {"rowsum_kmeans", MatchMethod::row_sum, std::nullopt},
  };
}

struct TrialOutcome {
  ErrorReport errors;
  double wall_ms = 0.0;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// One draw of `spec`, classified by every variant. H is built once and
/// shared; each variant's time is the build time plus its own matching time.
inline std::vector<TrialOutcome> run_trial(const ScenarioSpec& spec,
                                           const std::vector<MethodVariant>& methods,
                                           PreprocessMode mode) {
  const LabeledPair pair = generate(spec);
  const auto t0 = std::chrono::steady_clock::now();
  const OverlapMatrix h = build_overlap(pair.x, pair.y, mode);
  const double build_ms = detail::elapsed_ms(t0);

  std::vector<TrialOutcome> out;
  out.reserve(methods.size());
  for (const auto& m : methods) {
    const auto t1 = std::chrono::steady_clock::now();
    const MatchResult res = match(h, m.config(mode, spec.seed));
    const double ms = build_ms + detail::elapsed_ms(t1);
    out.push_back({error_rates(pair.inliers, res.partition), ms});
  }
  return out;
}

/// Mean and sample standard deviation.
struct Summary {
  double mean = 0.0;
  double sd = 0.0;

  static Summary of(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
  }
};

struct SweepRow {
  std::string sweep;
  std::string parameter;
  double value = 0.0;
  std::string method;
  std::size_t trials = 0;
  Summary error_g;
  Summary error_b;
  Summary error_w;
  Summary wall_ms;
};

struct SweepOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  /// 0 = resolve_thread_count().
  std::size_t threads = 0;
  PreprocessMode preprocess = PreprocessMode::center_normalize;
};

namespace detail {

inline SweepRow summarise(const std::string& sweep, const std::string& parameter, double value,
                          const std::string& method, const std::vector<TrialOutcome>& trials) {
  std::vector<double> g, b, w, ms;
  for (const auto& t : trials) {
    g.push_back(t.errors.error_g);
    b.push_back(t.errors.error_b);
    w.push_back(t.errors.error_w);
    ms.push_back(t.wall_ms);
  }
  return SweepRow{sweep,         parameter,     value,         method,        trials.size(),
                  Summary::of(g), Summary::of(b), Summary::of(w), Summary::of(ms)};
}

}  // namespace detail

/// Runs `opts.trials` draws at every grid value. Trial t at grid point k is
/// seeded with derive_seed(derive_seed(opts.seed, k), t); trials run on
/// opts.threads workers and are aggregated in index order.
inline std::vector<SweepRow> run_sweep(const std::string& sweep, const std::string& parameter,
                                       const std::vector<double>& grid,
                                       const std::function<ScenarioSpec(double)>& make_spec,
                                       const std::vector<MethodVariant>& methods,
                                       const SweepOptions& opts) {
  if (opts.trials == 0) throw InvalidArgument("run_sweep: trials must be >= 1");
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<std::vector<TrialOutcome>> per_trial(opts.trials);
    const std::uint64_t point_seed = derive_seed(opts.seed, k);
    parallel_for(opts.trials, resolve_thread_count(opts.threads), [&](std::size_t t) {
      ScenarioSpec spec = make_spec(grid[k]);
      spec.seed = derive_seed(point_seed, t);
      try {
        per_trial[t] = run_trial(spec, methods, opts.preprocess);
      } catch (const Error& e) {
        throw Error(sweep + " sweep, " + parameter + "=" + io::detail::format_real(grid[k]) +
                    ", trial " + std::to_string(t) + ": " + e.what());
      }
    });
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::vector<TrialOutcome> col;
      for (const auto& t : per_trial) col.push_back(t[m]);
      rows.push_back(detail::summarise(sweep, parameter, grid[k], methods[m].name, col));
    }
  }
  return rows;
}

struct RSweepParams {
  std::size_t n = 400;
  std::size_t d = 6;
  ScenarioKind kind = ScenarioKind::permuted_inliers;
  std::vector<double> grid = {0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90};
};

inline std::vector<SweepRow> r_sweep(const RSweepParams& p, const SweepOptions& opts,
                                     const std::vector<MethodVariant>& methods = standard_methods()) {
  return run_sweep("r", "r", p.grid,
                   [&](double r) { return ScenarioSpec{p.d, p.n, r, p.kind, 0.0, 0}; }, methods,
                   opts);
}

struct NoiseSweepParams {
  std::size_t n = 400;
  std::size_t d = 3;
  double r = 0.75;
  ScenarioKind kind = ScenarioKind::permuted_inliers;
  /// sigma^2 in {0, 0.05, ..., 1.0}, in units of the unit data variance.
  std::vector<double> grid = [] {
    std::vector<double> g;
    for (int k = 0; k <= 20; ++k) g.push_back(0.05 * k);
    return g;
  }();
};

inline std::vector<SweepRow> sigma2_sweep(const NoiseSweepParams& p, const SweepOptions& opts,
                                          const std::vector<MethodVariant>& methods = standard_methods()) {
  return run_sweep("sigma2", "sigma2", p.grid,
                   [&](double s2) { return ScenarioSpec{p.d, p.n, p.r, p.kind, s2, 0}; }, methods,
                   opts);
}

struct SplitSweepParams {
  std::size_t n = 4000;
  std::size_t d = 50;
  double r = 0.8;
  ScenarioKind kind = ScenarioKind::permuted_inliers;
  std::vector<std::size_t> splits = {1, 2, 4};
};

/// Split-merge matching at every split count on the same draws. Shards run
/// on opts.threads workers; trials run one after another so the timings
/// are not distorted by each other.
inline std::vector<SweepRow> splits_sweep(const SplitSweepParams& p, const SweepOptions& opts,
                                          const std::vector<MethodVariant>& methods = kmeans_methods()) {
  if (opts.trials == 0) throw InvalidArgument("splits_sweep: trials must be >= 1");
  // outcomes[s][m][t]
  std::vector<std::vector<std::vector<TrialOutcome>>> outcomes(
      p.splits.size(), std::vector<std::vector<TrialOutcome>>(methods.size()));
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const ScenarioSpec spec{p.d, p.n, p.r, p.kind, 0.0, derive_seed(opts.seed, t)};
    const LabeledPair pair = generate(spec);
    for (std::size_t k = 0; k < p.splits.size(); ++k) {
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto report = parallel_match(pair.x, pair.y, p.splits[k],
                                           methods[m].config(opts.preprocess, spec.seed),
                                           ParallelOptions{opts.threads});
        outcomes[k][m].push_back({error_rates(pair.inliers, report.partition), report.total_ms});
      }
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < p.splits.size(); ++k)
    for (std::size_t m = 0; m < methods.size(); ++m)
      rows.push_back(detail::summarise("splits", "s", static_cast<double>(p.splits[k]),
                                       methods[m].name, outcomes[k][m]));
  return rows;
}

inline std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  using io::detail::format_real;
  std::string out =
      "sweep,parameter,value,method,trials,mean_error_G,sd_error_G,mean_error_B,sd_error_B,"
      "mean_error_W,sd_error_W,mean_ms,sd_ms\n";
  for (const auto& r : rows) {
    out += r.sweep + ',' + r.parameter + ',' + format_real(r.value) + ',' + r.method + ',' +
           std::to_string(r.trials) + ',' + format_real(r.error_g.mean) + ',' +
           format_real(r.error_g.sd) + ',' + format_real(r.error_b.mean) + ',' +
           format_real(r.error_b.sd) + ',' + format_real(r.error_w.mean) + ',' +
           format_real(r.error_w.sd) + ',' + format_real(r.wall_ms.mean) + ',' +
           format_real(r.wall_ms.sd) + '\n';
  }
  return out;
}

/// Rows of one method, in grid order.
inline std::vector<SweepRow> rows_for(const std::vector<SweepRow>& rows, const std::string& method) {
  std::vector<SweepRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [&](const SweepRow& r) { return r.method == method; });
  return out;
}

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

/// Spearman rank correlation (Pearson correlation of average ranks).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("spearman: need two equal-length series");
  const auto ra = detail::average_ranks(a);
  const auto rb = detail::average_ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace hmatch
