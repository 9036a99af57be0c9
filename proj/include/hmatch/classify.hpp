#pragma once

// Inlier/outlier classification from an overlap matrix: eigenvector
// matching, row-sum matching, the exact 1-D 2-means solver both of them use,
// and the error-rate bookkeeping for evaluating a partition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hmatch/error.hpp"
#include "hmatch/matrix.hpp"
#include "hmatch/overlap.hpp"
#include "hmatch/spectral.hpp"

namespace hmatch {

/// Disjoint cover of [0, n) by an estimated inlier set and its complement.
class LabelPartition {
 public:
  LabelPartition() = default;

  /// `inliers` may be unsorted; every index must be < n and appear once.
  LabelPartition(std::size_t n, std::vector<std::size_t> inliers) : n_(n) {
    std::vector<bool> mask(n, false);
    for (std::size_t i : inliers) {
      if (i >= n) throw InvalidArgument("LabelPartition: index out of range");
      if (mask[i]) throw InvalidArgument("LabelPartition: duplicate index");
      mask[i] = true;
    }
    assign(mask);
  }

  static LabelPartition from_mask(const std::vector<bool>& inlier_mask) {
    LabelPartition p;
    p.n_ = inlier_mask.size();
    p.assign(inlier_mask);
    return p;
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<std::size_t>& inliers() const noexcept { return inliers_; }
  const std::vector<std::size_t>& outliers() const noexcept { return outliers_; }

  std::vector<bool> mask() const {
    std::vector<bool> m(n_, false);
    for (std::size_t i : inliers_) m[i] = true;
    return m;
  }

  friend bool operator==(const LabelPartition&, const LabelPartition&) = default;

 private:
  void assign(const std::vector<bool>& mask) {
    inliers_.clear();
    outliers_.clear();
    for (std::size_t i = 0; i < mask.size(); ++i) (mask[i] ? inliers_ : outliers_).push_back(i);
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> inliers_;
  std::vector<std::size_t> outliers_;
};

enum class MatchMethod { eigenvector, row_sum };

inline std::string_view to_string(MatchMethod m) noexcept {
  return m == MatchMethod::eigenvector ? "eig" : "rowsum";
}

inline std::optional<MatchMethod> parse_match_method(std::string_view s) noexcept {
  if (s == "eig" || s == "eigenvector") return MatchMethod::eigenvector;
  if (s == "rowsum" || s == "row_sum") return MatchMethod::row_sum;
  return std::nullopt;
}

/// Default fixed threshold for eigenvector matching.
inline constexpr double kDefaultEigenThreshold = 0.5;

/// d(rn+1)/2, the midpoint of the population gap of the shifted row sums.
inline double default_row_sum_threshold(std::size_t d, std::size_t n, double r) {
  const double dd = static_cast<double>(d);
  return dd * (r * static_cast<double>(n) + 1.0) / 2.0;
}

/// How to classify. With neither `threshold` nor `inlier_fraction` set the
/// matcher runs 2-means on its statistic.
struct MatchConfig {
  MatchMethod method = MatchMethod::row_sum;
  /// Fixed t (eigenvector: v_i >= t / sqrt(n)) or T (row sum: S_i - d^2 >= T).
  std::optional<double> threshold;
  /// Known inlier fraction r. Selects the default fixed threshold, evaluated
  /// against the size of the matrix actually classified: t = 0.5, or
  /// T = d(r n + 1)/2.
  std::optional<double> inlier_fraction;
  PreprocessMode preprocess = PreprocessMode::center_normalize;
  std::uint64_t seed = 0;

  bool use_two_means() const noexcept { return !threshold && !inlier_fraction; }

  void validate() const {
    if (threshold && inlier_fraction) {
      throw InvalidArgument("MatchConfig: threshold and inlier_fraction are mutually exclusive");
    }
    if (threshold && !(*threshold > 0.0 && std::isfinite(*threshold))) {
      throw InvalidArgument("MatchConfig: threshold must be positive");
    }
    if (inlier_fraction && !(*inlier_fraction > 0.0 && *inlier_fraction < 1.0)) {
      throw InvalidArgument("MatchConfig: inlier_fraction must lie in (0, 1)");
    }
  }

  /// The fixed threshold to apply to an overlap of dimension d and size n,
  /// or nullopt for 2-means.
  std::optional<double> resolve_threshold(std::size_t d, std::size_t n) const {
    if (threshold) return threshold;
    if (!inlier_fraction) return std::nullopt;
    if (method == MatchMethod::eigenvector) return kDefaultEigenThreshold;
    return default_row_sum_threshold(d, n, *inlier_fraction);
  }
};

struct TwoMeansResult {
  LabelPartition partition;
  double low_centroid = 0.0;
  double high_centroid = 0.0;
  double sse = 0.0;
};

/// Globally optimal 2-cluster k-means of scalars.
///
/// The optimal bipartition of points on a line is a split of the sorted
/// values, so every split between distinct neighbours is scanned. The
/// cluster with the larger centroid becomes the inlier set. SSE ties go to
/// the split with more inliers. Throws DegenerateClusteringError when all
/// values agree to 1e-12 relative.
inline TwoMeansResult two_means_1d(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw InvalidArgument("two_means_1d: need at least two values");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("two_means_1d: non-finite value");

  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double magnitude = std::max({1.0, std::abs(*mn), std::abs(*mx)});
  if (*mx - *mn <= 1e-12 * magnitude) {
    throw DegenerateClusteringError("two_means_1d: all values are equal");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });

  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double total_ss = 0.0;
  for (double v : values) total_ss += (v - mean) * (v - mean);
  double total = 0.0;
  for (std::size_t idx : order) total += values[idx] - mean;

  // SSE(k) = total_ss - L^2/k - R^2/(n-k) for centred partial sums L, R.
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  double left = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    left += values[order[k - 1]] - mean;
    if (!(values[order[k - 1]] < values[order[k]])) continue;
    const double right = total - left;
    const double score = left * left / static_cast<double>(k) +
                         right * right / static_cast<double>(n - k);
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }

  std::vector<bool> mask(n, false);
  double low = 0.0;
  double high = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t idx = order[r];
    if (r < best_k) {
      low += values[idx];
    } else {
      high += values[idx];
      mask[idx] = true;
    }
  }
  TwoMeansResult out;
  out.partition = LabelPartition::from_mask(mask);
  out.low_centroid = low / static_cast<double>(best_k);
  out.high_centroid = high / static_cast<double>(n - best_k);
  for (std::size_t r = 0; r < n; ++r) {
    const double c = r < best_k ? out.low_centroid : out.high_centroid;
    const double dv = values[order[r]] - c;
    out.sse += dv * dv;
  }
  return out;
}

struct MatchDiagnostics {
  MatchMethod method = MatchMethod::row_sum;
  /// Fixed threshold applied (t or T), absent for 2-means.
  std::optional<double> threshold;
  /// Cut on the statistic: t / sqrt(n) or T.
  std::optional<double> cut;
  /// Per-index statistic that was classified: the leading eigenvector or S_i - d^2.
  std::vector<double> statistic;
  double statistic_min = 0.0;
  double statistic_max = 0.0;
  std::optional<double> low_centroid;
  std::optional<double> high_centroid;
  // Eigenvector matching only.
  std::optional<double> eigenvalue;
  std::optional<double> residual;
  std::size_t iterations = 0;
  bool converged = true;
  /// 2-means saw identical values; the partition fell back to all-outliers.
  bool degenerate = false;

  double centroid_gap() const noexcept {
    return (low_centroid && high_centroid) ? *high_centroid - *low_centroid : 0.0;
  }
};

struct MatchResult {
  LabelPartition partition;
  MatchDiagnostics diagnostics;
};

namespace detail {

inline MatchResult classify_statistic(std::vector<double> stat, std::optional<double> cut,
                                      MatchDiagnostics diag) {
  const std::size_t n = stat.size();
  const auto [mn, mx] = std::minmax_element(stat.begin(), stat.end());
  diag.statistic_min = *mn;
  diag.statistic_max = *mx;
  MatchResult out;
  if (cut) {
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = stat[i] >= *cut;
    out.partition = LabelPartition::from_mask(mask);
  } else {
    try {
      auto km = two_means_1d(stat);
      out.partition = std::move(km.partition);
      diag.low_centroid = km.low_centroid;
      diag.high_centroid = km.high_centroid;
    } catch (const DegenerateClusteringError&) {
      out.partition = LabelPartition::from_mask(std::vector<bool>(n, false));
      diag.degenerate = true;
    }
  }
  diag.cut = cut;
  diag.statistic = std::move(stat);
  out.diagnostics = std::move(diag);
  return out;
}

}  // namespace detail

/// Classify by the leading eigenvector of H.
inline MatchResult eigenvector_match(const OverlapMatrix& h, const MatchConfig& cfg,
                                     const PowerOptions& power = {}) {
  cfg.validate();
  if (cfg.method != MatchMethod::eigenvector) {
    throw InvalidArgument("eigenvector_match: config selects a different method");
  }
  const std::size_t n = h.size();
  SpectralPair top = power_iteration(h.h, power);

  MatchDiagnostics diag;
  diag.method = MatchMethod::eigenvector;
  diag.threshold = cfg.resolve_threshold(h.d, n);
  diag.eigenvalue = top.value;
  diag.residual = top.residual;
  diag.iterations = top.iterations;
  diag.converged = top.converged;
  std::optional<double> cut;
  if (diag.threshold) cut = *diag.threshold / std::sqrt(static_cast<double>(n));
  return detail::classify_statistic(std::move(top.vector), cut, std::move(diag));
}

/// Classify by the shifted row sums S_i - d^2 of H.
inline MatchResult row_sum_match(const OverlapMatrix& h, const MatchConfig& cfg) {
  cfg.validate();
  if (cfg.method != MatchMethod::row_sum) {
    throw InvalidArgument("row_sum_match: config selects a different method");
  }
  const double d2 = static_cast<double>(h.d) * static_cast<double>(h.d);
  std::vector<double> stat = row_sums(h);
  for (double& s : stat) s -= d2;

  MatchDiagnostics diag;
  diag.method = MatchMethod::row_sum;
  diag.threshold = cfg.resolve_threshold(h.d, h.size());
  return detail::classify_statistic(std::move(stat), diag.threshold, std::move(diag));
}

inline MatchResult match(const OverlapMatrix& h, const MatchConfig& cfg) {
  return cfg.method == MatchMethod::eigenvector ? eigenvector_match(h, cfg) : row_sum_match(h, cfg);
}

/// Preprocess, build H and classify in one call.
inline MatchResult match_points(const DenseMatrix& x, const DenseMatrix& y, const MatchConfig& cfg) {
  return match(build_overlap(x, y, cfg.preprocess), cfg);
}

struct ThresholdInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = false;
};

/// Interval of row-sum thresholds T that separate the groups once the
/// inlier and outlier fluctuation levels (with constants C1, C2) are
/// accounted for:
///   lo = C2 d sqrt(log n) (sqrt d + sqrt n)
///   hi = d(rn + 1) - C1 sqrt(d log n) (d + sqrt(dn) + rn)
inline ThresholdInterval threshold_interval(double d, double n, double r, double c1, double c2) {
  if (!(d > 0.0) || !(n > 0.0)) throw InvalidArgument("threshold_interval: d and n must be positive");
  if (!(r > 0.0 && r < 1.0)) throw InvalidArgument("threshold_interval: r must lie in (0, 1)");
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw InvalidArgument("threshold_interval: negative constant");
  const double logn = std::log(n);
  ThresholdInterval out;
  out.lo = c2 * d * std::sqrt(logn) * (std::sqrt(d) + std::sqrt(n));
  out.hi = d * (r * n + 1.0) - c1 * std::sqrt(d * logn) * (d + std::sqrt(d * n) + r * n);
  out.empty = !(out.lo < out.hi);
  return out;
}

/// Misclassification rates of an estimated partition against ground truth.
struct ErrorReport {
  double error_g = 0.0;
  double error_b = 0.0;
  double error_w = 0.0;
  std::size_t missed_inliers = 0;   // |G ∩ Ĝᶜ|
  std::size_t missed_outliers = 0;  // |B ∩ B̂ᶜ|
  std::size_t inliers = 0;          // |G|
  std::size_t outliers = 0;         // |B|

  bool exact() const noexcept { return missed_inliers == 0 && missed_outliers == 0; }
};

inline ErrorReport error_rates(std::span<const std::size_t> truth_inliers,
                               const LabelPartition& estimate) {
  const std::size_t n = estimate.size();
  std::vector<bool> truth(n, false);
  for (std::size_t i : truth_inliers) {
    if (i >= n) throw InvalidArgument("error_rates: truth index out of range");
    truth[i] = true;
  }
  const auto est = estimate.mask();
  ErrorReport r;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i]) {
      ++r.inliers;
      if (!est[i]) ++r.missed_inliers;
    } else {
      ++r.outliers;
      if (est[i]) ++r.missed_outliers;
    }
  }
  if (r.inliers == 0 || r.outliers == 0) {
    throw InvalidArgument("error_rates: ground truth must contain both inliers and outliers");
  }
  r.error_g = static_cast<double>(r.missed_inliers) / static_cast<double>(r.inliers);
  r.error_b = static_cast<double>(r.missed_outliers) / static_cast<double>(r.outliers);
  r.error_w = static_cast<double>(r.missed_inliers + r.missed_outliers) / static_cast<double>(n);
  return r;
}

}  // namespace hmatch
