#pragma once

// From paired point sets to the overlap matrix H = (X^T X) o (Y^T Y), its
// row sums, and the closed-form expectation of H under the Gaussian
// inlier/outlier model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmatch/error.hpp"
#include "hmatch/matrix.hpp"

namespace hmatch {

enum class PreprocessMode {
  none,
  /// Center every row (feature) to mean zero, then scale every column to unit norm.
  center_normalize,
};

inline std::string_view to_string(PreprocessMode m) noexcept {
  return m == PreprocessMode::none ? "none" : "cn";
}

inline std::optional<PreprocessMode> parse_preprocess_mode(std::string_view s) noexcept {
  if (s == "none") return PreprocessMode::none;
  if (s == "cn" || s == "center_normalize") return PreprocessMode::center_normalize;
  return std::nullopt;
}

inline DenseMatrix preprocess(const DenseMatrix& x, PreprocessMode mode) {
  if (mode == PreprocessMode::none) return x;
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  DenseMatrix out = x;

  std::vector<double> mean(d, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    auto c = x.col(j);
    for (std::size_t i = 0; i < d; ++i) mean[i] += c[i];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  for (std::size_t j = 0; j < n; ++j) {
    auto c = out.col(j);
    for (std::size_t i = 0; i < d; ++i) c[i] -= mean[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    auto c = out.col(j);
    const double norm = std::sqrt(detail::dot(c, c));
    // Columns that only differ from the row means by rounding noise count as zero.
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(x(i, j)) + std::abs(mean[i]));
    if (!(norm > 1e-13 * scale)) throw DegenerateColumnError(j);
    for (double& v : c) v /= norm;
  }
  return out;
}

/// H together with how it was produced.
struct OverlapMatrix {
  SymmetricMatrix h;
  std::size_t d = 0;
  PreprocessMode mode = PreprocessMode::none;

  std::size_t size() const noexcept { return h.order(); }
};

namespace detail {

/// H from already-preprocessed inputs. Each entry is dot(x_i,x_j)*dot(y_i,y_j)
/// with the same dot() used by gram(), so the result is bitwise equal to
/// hadamard(gram(x), gram(y)) without materialising either Gram matrix.
inline SymmetricMatrix fused_overlap(const DenseMatrix& x, const DenseMatrix& y) {
  const std::size_t n = x.cols();
  SymmetricMatrix h(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto xj = x.col(j);
    auto yj = y.col(j);
    for (std::size_t i = j; i < n; ++i) {
      h.set(i, j, dot(x.col(i), xj) * dot(y.col(i), yj));
    }
  }
  if (!h.all_finite()) throw InvalidArgument("build_overlap: overflow in H");
  return h;
}

inline void check_pair_shapes(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.empty() || y.empty()) throw InvalidArgument("build_overlap: empty input");
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw InvalidArgument("build_overlap: X is " + std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()) + " but Y is " + std::to_string(y.rows()) +
                          "x" + std::to_string(y.cols()));
  }
  if (x.cols() < 2) throw InvalidArgument("build_overlap: need at least two points");
}

}  // namespace detail

/// Overlap matrix of inputs that have already been through preprocess();
/// `mode` is recorded as metadata only.
inline OverlapMatrix build_overlap_preprocessed(const DenseMatrix& xp, const DenseMatrix& yp,
                                                PreprocessMode mode) {
  detail::check_pair_shapes(xp, yp);
  return OverlapMatrix{detail::fused_overlap(xp, yp), xp.rows(), mode};
}

inline OverlapMatrix build_overlap(const DenseMatrix& x, const DenseMatrix& y,
                                   PreprocessMode mode) {
  detail::check_pair_shapes(x, y);
  if (mode == PreprocessMode::none) return build_overlap_preprocessed(x, y, mode);
  return build_overlap_preprocessed(preprocess(x, mode), preprocess(y, mode), mode);
}

/// S_i = sum_j H_ij, summed in index order.
inline std::vector<double> row_sums(const SymmetricMatrix& h) {
  const std::size_t n = h.order();
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = h.col(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += c[j];
    s[i] = acc;
  }
  return s;
}

inline std::vector<double> row_sums(const OverlapMatrix& h) { return row_sums(h.h); }

/// Dimension, size and inlier set of the Gaussian inlier/outlier model.
class PopulationModel {
 public:
  /// Explicit inlier set; indices are deduplicated and sorted.
  PopulationModel(std::size_t d, std::size_t n, std::vector<std::size_t> inliers)
      : d_(d), n_(n), inliers_(std::move(inliers)) {
    if (d == 0 || n == 0) throw InvalidArgument("PopulationModel: d and n must be positive");
    std::sort(inliers_.begin(), inliers_.end());
    inliers_.erase(std::unique(inliers_.begin(), inliers_.end()), inliers_.end());
    if (!inliers_.empty() && inliers_.back() >= n) {
      throw InvalidArgument("PopulationModel: inlier index out of range");
    }
    mask_.assign(n, false);
    for (std::size_t i : inliers_) mask_[i] = true;
  }

  /// Inliers are the first r*n indices; r*n must be an integer.
  static PopulationModel from_fraction(std::size_t d, std::size_t n, double r) {
    const double rn = r * static_cast<double>(n);
    const double rounded = std::round(rn);
    if (!(r >= 0.0 && r <= 1.0) || std::abs(rn - rounded) > 1e-9 * std::max(1.0, rn)) {
      throw InvalidArgument("PopulationModel: r*n must be an integer in [0, n]");
    }
    std::vector<std::size_t> g(static_cast<std::size_t>(rounded));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = i;
    return PopulationModel(d, n, std::move(g));
  }

  std::size_t d() const noexcept { return d_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t inlier_count() const noexcept { return inliers_.size(); }
  const std::vector<std::size_t>& inliers() const noexcept { return inliers_; }
  bool is_inlier(std::size_t i) const { return mask_.at(i); }

 private:
  std::size_t d_;
  std::size_t n_;
  std::vector<std::size_t> inliers_;
  std::vector<bool> mask_;
};

/// E[H] = d^2 I + d 1_G 1_G^T + d diag(1_G).
inline SymmetricMatrix population_overlap(const PopulationModel& m) {
  const double d = static_cast<double>(m.d());
  SymmetricMatrix e(m.n());
  for (std::size_t j = 0; j < m.n(); ++j) {
    e.set(j, j, m.is_inlier(j) ? d * d + 2.0 * d : d * d);
  }
  const auto& g = m.inliers();
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = a + 1; b < g.size(); ++b) e.set(g[a], g[b], d);
  return e;
}

struct PopulationSpectrum {
  double lambda1 = 0.0;
  /// Second eigenvalue as computed from E[H]: d^2 + d when |G| >= 2, else d^2.
  double lambda2 = 0.0;
  std::vector<double> vector;
  /// lambda1 - lambda2; d|G| whenever |G| >= 2.
  double gap = 0.0;
};

/// Closed-form top of the spectrum of E[H]. Requires 0 < |G| < n.
inline PopulationSpectrum population_spectrum(const PopulationModel& m) {
  const std::size_t g = m.inlier_count();
  if (g == 0 || g >= m.n()) {
    throw InvalidArgument("population_spectrum: need 0 < |G| < n");
  }
  const double d = static_cast<double>(m.d());
  const double rn = static_cast<double>(g);
  PopulationSpectrum s;
  s.lambda1 = d * d + d * (rn + 1.0);
  s.lambda2 = g >= 2 ? d * d + d : d * d;
  s.gap = s.lambda1 - s.lambda2;
  s.vector.assign(m.n(), 0.0);
  const double value = 1.0 / std::sqrt(rn);
  for (std::size_t i : m.inliers()) s.vector[i] = value;
  return s;
}

/// E[S_i]: d^2 + d(|G|+1) on G, d^2 on B.
inline double population_row_sum_mean(const PopulationModel& m, std::size_t i) {
  if (i >= m.n()) throw InvalidArgument("population_row_sum_mean: index out of range");
  const double d = static_cast<double>(m.d());
  if (m.is_inlier(i)) return d * d + d * (static_cast<double>(m.inlier_count()) + 1.0);
  return d * d;
}

}  // namespace hmatch
