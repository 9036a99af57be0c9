#pragma once

// Seeded synthetic inlier/outlier data: Gaussian points, a Haar-random
// rotation, and either independent Gaussian outliers or outliers created by
// mismatching rotated points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hmatch/error.hpp"
#include "hmatch/matrix.hpp"
#include "hmatch/overlap.hpp"
#include "hmatch/random.hpp"
#include "hmatch/spectral.hpp"

namespace hmatch {

enum class ScenarioKind {
  /// Y_i = R X_i on G, independent standard Gaussian on B.
  gaussian_outliers,
  /// Y_i = R X_i on G, Y_i = R X_pi(i) on B for a random derangement pi of B.
  permuted_inliers,
};

inline std::string_view to_string(ScenarioKind k) noexcept {
  return k == ScenarioKind::gaussian_outliers ? "gaussian_outliers" : "permuted_inliers";
}

inline std::optional<ScenarioKind> parse_scenario_kind(std::string_view s) noexcept {
  if (s == "gaussian_outliers" || s == "gaussian") return ScenarioKind::gaussian_outliers;
  if (s == "permuted_inliers" || s == "permuted") return ScenarioKind::permuted_inliers;
  return std::nullopt;
}

struct ScenarioSpec {
  std::size_t d = 0;
  std::size_t n = 0;
  double r = 0.5;
  ScenarioKind kind = ScenarioKind::gaussian_outliers;
  /// Variance of the Gaussian noise added to every entry of Y.
  double sigma2 = 0.0;
  std::uint64_t seed = 0;

  /// r*n, which must be an integer in [1, n-1].
  std::size_t inlier_count() const {
    const double rn = r * static_cast<double>(n);
    const double rounded = std::round(rn);
    if (!std::isfinite(rn) || std::abs(rn - rounded) > 1e-9 * std::max(1.0, rn)) {
      throw InvalidArgument("ScenarioSpec: r*n = " + std::to_string(rn) + " is not an integer");
    }
    return static_cast<std::size_t>(rounded);
  }

  void validate() const {
    if (d == 0 || n == 0) throw InvalidArgument("ScenarioSpec: d and n must be positive");
    const std::size_t g = inlier_count();
    if (g < 1 || g + 1 > n) throw InvalidArgument("ScenarioSpec: need 1 <= r*n <= n-1");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
      throw InvalidArgument("ScenarioSpec: sigma2 must be a nonnegative number");
    }
    if (kind == ScenarioKind::permuted_inliers && n - g == 1) {
      throw InvalidArgument("ScenarioSpec: a single outlier cannot be deranged");
    }
  }
};

struct LabeledPair {
  DenseMatrix x;
  DenseMatrix y;
  /// Ground-truth inlier indices, sorted.
  std::vector<std::size_t> inliers;
  /// Rotation used for the inliers.
  DenseMatrix rotation;
};

/// Haar-distributed orthogonal matrix: Gram-Schmidt (applied twice for
/// accuracy) on a standard Gaussian matrix, which is QR with a positive
/// R diagonal.
inline DenseMatrix haar_orthogonal(std::size_t d, RandomStream& rng) {
  if (d == 0) throw InvalidArgument("haar_orthogonal: d must be positive");
  DenseMatrix q(d, d);
  for (double& v : q.data()) v = rng.normal();
  for (std::size_t j = 0; j < d; ++j) {
    auto qj = q.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        auto qk = q.col(k);
        const double proj = detail::dot(qk, qj);
        for (std::size_t i = 0; i < d; ++i) qj[i] -= proj * qk[i];
      }
    }
    const double norm = std::sqrt(detail::dot(qj, qj));
    if (!(norm > 0.0)) throw Error("haar_orthogonal: rank-deficient Gaussian draw");
    for (double& v : qj) v /= norm;
  }
  return q;
}

inline DenseMatrix haar_orthogonal(std::size_t d, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  return haar_orthogonal(d, rng);
}

namespace detail {

enum Stream : std::uint64_t { kPoints = 1, kRotation = 2, kSubset = 3, kOutliers = 4, kNoise = 5 };

inline void apply_rotation(const DenseMatrix& r, std::span<const double> x, std::span<double> y) {
  const std::size_t d = r.rows();
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    auto rk = r.col(k);
    for (std::size_t i = 0; i < d; ++i) y[i] += rk[i] * x[k];
  }
}

/// Uniform derangement of [0, m) by rejection; m >= 2.
inline std::vector<std::size_t> random_derangement(std::size_t m, RandomStream& rng) {
  std::vector<std::size_t> p(m);
  for (;;) {
    std::iota(p.begin(), p.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(p));
    bool fixed = false;
    for (std::size_t i = 0; i < m && !fixed; ++i) fixed = p[i] == i;
    if (!fixed) return p;
  }
}

}  // namespace detail

/// Draws one labelled pair. Each ingredient (points, rotation, inlier set,
/// outliers, noise) has its own random stream, so e.g. changing sigma2
/// leaves X, R and G untouched.
inline LabeledPair generate(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t d = spec.d;
  const std::size_t n = spec.n;
  const std::size_t g = spec.inlier_count();

  RandomStream points(spec.seed, detail::kPoints);
  DenseMatrix x(d, n);
  for (double& v : x.data()) v = points.normal();

  RandomStream rot(spec.seed, detail::kRotation);
  DenseMatrix r = haar_orthogonal(d, rot);

  RandomStream subset(spec.seed, detail::kSubset);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  subset.shuffle(std::span<std::size_t>(perm));
  std::vector<bool> is_inlier(n, false);
  for (std::size_t k = 0; k < g; ++k) is_inlier[perm[k]] = true;

  std::vector<std::size_t> inliers, outliers;
  for (std::size_t i = 0; i < n; ++i) (is_inlier[i] ? inliers : outliers).push_back(i);

  DenseMatrix y(d, n);
  for (std::size_t i : inliers) detail::apply_rotation(r, x.col(i), y.col(i));

  RandomStream outl(spec.seed, detail::kOutliers);
  if (spec.kind == ScenarioKind::gaussian_outliers) {
    for (std::size_t i : outliers)
      for (double& v : y.col(i)) v = outl.normal();
  } else {
    const auto pi = detail::random_derangement(outliers.size(), outl);
    for (std::size_t k = 0; k < outliers.size(); ++k) {
      detail::apply_rotation(r, x.col(outliers[pi[k]]), y.col(outliers[k]));
    }
  }

  if (spec.sigma2 > 0.0) {
    RandomStream noise(spec.seed, detail::kNoise);
    const double sd = std::sqrt(spec.sigma2);
    for (double& v : y.data()) v += sd * noise.normal();
  }
  return LabeledPair{std::move(x), std::move(y), std::move(inliers), std::move(r)};
}

/// Normalised deviations of H and its row sums from their expectations.
struct DeviationStats {
  /// ||H - E[H]|| / (n^{3/2} log^2 n)
  std::vector<double> spectral;
  /// max_{i in G} |S_i - E[S_i]| / (sqrt(d log n) (d + sqrt(dn) + rn))
  std::vector<double> inlier_rowsum;
  /// max_{i in B} |S_i - E[S_i]| / (d sqrt(log n) (sqrt d + sqrt n))
  std::vector<double> outlier_rowsum;

  static double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  static double max(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }
};

/// Monte-Carlo deviation ratios over `trials` draws of the Gaussian-outlier
/// model with raw (unpreprocessed) data. Trial t uses seed
/// derive_seed(spec.seed, t). Order is limited to what dense_eig accepts.
inline DeviationStats empirical_deviation(const ScenarioSpec& spec, std::size_t trials) {
  if (spec.n > kDenseEigMaxOrder) {
    throw SizeLimitError("empirical_deviation: n exceeds " + std::to_string(kDenseEigMaxOrder));
  }
  if (trials == 0) throw InvalidArgument("empirical_deviation: trials must be >= 1");
  if (spec.n < 2) throw InvalidArgument("empirical_deviation: n must be >= 2");

  const double d = static_cast<double>(spec.d);
  const double n = static_cast<double>(spec.n);
  const double logn = std::log(n);
  const double rn = static_cast<double>(spec.inlier_count());
  const double norm_spectral = std::pow(n, 1.5) * logn * logn;
  const double norm_inlier = std::sqrt(d * logn) * (d + std::sqrt(d * n) + rn);
  const double norm_outlier = d * std::sqrt(logn) * (std::sqrt(d) + std::sqrt(n));

  DeviationStats out;
  for (std::size_t t = 0; t < trials; ++t) {
    ScenarioSpec s = spec;
    s.kind = ScenarioKind::gaussian_outliers;
    s.sigma2 = 0.0;
    s.seed = derive_seed(spec.seed, t);
    const LabeledPair pair = generate(s);
    const OverlapMatrix h = build_overlap(pair.x, pair.y, PreprocessMode::none);
    const PopulationModel model(spec.d, spec.n, pair.inliers);
    const SymmetricMatrix expected = population_overlap(model);

    out.spectral.push_back(spectral_norm(subtract(h.h, expected)) / norm_spectral);

    const auto sums = row_sums(h);
    double dev_g = 0.0;
    double dev_b = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double dev = std::abs(sums[i] - population_row_sum_mean(model, i));
      if (model.is_inlier(i)) {
        dev_g = std::max(dev_g, dev);
      } else {
        dev_b = std::max(dev_b, dev);
      }
    }
    out.inlier_rowsum.push_back(dev_g / norm_inlier);
    out.outlier_rowsum.push_back(dev_b / norm_outlier);
  }
  return out;
}

}  // namespace hmatch
