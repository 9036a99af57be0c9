#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "hmatch/error.hpp"
#include "hmatch/matrix.hpp"

namespace hmatch {

/// An eigenvalue estimate and its unit eigenvector.
///
/// The vector is normalised to unit length and its sign fixed so that the
/// entries sum to a nonnegative value; when the sum is zero (within 1e-12)
/// the largest-magnitude entry is made positive instead.
struct SpectralPair {
  double value = 0.0;
  std::vector<double> vector;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct PowerOptions {
  double tol = 1e-10;
  std::size_t max_iter = 1000;
};

/// Largest order accepted by dense_eig.
inline constexpr std::size_t kDenseEigMaxOrder = 512;

/// Flips `v` in place to the canonical sign.
inline void apply_sign_convention(std::span<double> v) noexcept {
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  bool flip = false;
  if (std::abs(sum) > 1e-12) {
    flip = sum < 0.0;
  } else if (!v.empty()) {
    auto it = std::max_element(v.begin(), v.end(),
                               [](double a, double b) { return std::abs(a) < std::abs(b); });
    flip = *it < 0.0;
  }
  if (flip)
    for (double& x : v) x = -x;
}

namespace detail {

inline double norm2(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

}  // namespace detail

/// Power iteration for the dominant eigenpair of a symmetric operator.
///
/// `apply(x, y)` must write A x into y. The start vector is the normalised
/// all-ones vector. Stops once ||Av - lambda v|| <= tol * max(1, |lambda|);
/// otherwise returns the iterate with the smallest residual and
/// `converged == false`.
template <typename Apply>
  requires std::invocable<Apply&, std::span<const double>, std::span<double>>
SpectralPair power_iteration(Apply&& apply, std::size_t n, const PowerOptions& opts = {}) {
  if (n == 0) throw InvalidArgument("power_iteration: empty operator");
  if (!(opts.tol > 0.0)) throw InvalidArgument("power_iteration: tol must be positive");
  if (opts.max_iter == 0) throw InvalidArgument("power_iteration: max_iter must be >= 1");

  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> av(n);
  SpectralPair best;
  best.residual = std::numeric_limits<double>::infinity();

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    apply(std::span<const double>(v), std::span<double>(av));
    const double lambda = detail::dot(v, av);
    double res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = av[i] - lambda * v[i];
      res2 += r * r;
    }
    const double residual = std::sqrt(res2);
    if (!std::isfinite(residual) || !std::isfinite(lambda)) {
      throw InvalidArgument("power_iteration: non-finite values encountered");
    }
    if (residual < best.residual) {
      best.value = lambda;
      best.vector = v;
      best.residual = residual;
    }
    best.iterations = it;
    if (residual <= opts.tol * std::max(1.0, std::abs(lambda))) {
      best.value = lambda;
      best.vector = v;
      best.residual = residual;
      best.converged = true;
      break;
    }
    const double norm = detail::norm2(av);
    if (norm == 0.0) {
      // A v = 0: v is an eigenvector for eigenvalue 0 and the residual test
      // above has already accepted it.
      break;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = av[i] / norm;
  }
  apply_sign_convention(best.vector);
  return best;
}

/// Dominant eigenpair of a symmetric matrix.
inline SpectralPair power_iteration(const SymmetricMatrix& a, const PowerOptions& opts = {}) {
  if (!a.all_finite()) throw InvalidArgument("power_iteration: non-finite entries");
  return power_iteration(
      [&a](std::span<const double> x, std::span<double> y) { a.multiply(x, y); }, a.order(),
      opts);
}

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;
};

namespace detail {

// Householder reduction of the symmetric matrix held in `v` (column-major,
// n x n) to tridiagonal form, accumulating the transformation in `v`.
// On exit `d` holds the diagonal and `e` the subdiagonal in e[1..n-1].
inline void tridiagonalize(std::size_t n, std::vector<double>& v, std::vector<double>& d,
                           std::vector<double>& e) {
  auto V = [&](std::size_t r, std::size_t c) -> double& { return v[c * n + r]; };
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). Rotations are applied to the
// columns of `v` when `vectors` is set.
inline void tridiagonal_ql(std::size_t n, std::vector<double>& v, std::vector<double>& d,
                           std::vector<double>& e, bool vectors) {
  auto V = [&](std::size_t r, std::size_t c) -> double& { return v[c * n + r]; };
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  const std::size_t max_sweeps = 60 * n + 60;
  std::size_t sweeps = 0;

  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      do {
        if (++sweeps > max_sweeps) throw Error("dense_eig: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          if (vectors) {
            for (std::size_t k = 0; k < n; ++k) {
              h = V(k, ii + 1);
              V(k, ii + 1) = s * V(k, ii) + c * h;
              V(k, ii) = c * V(k, ii) - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

inline void check_dense_order(const SymmetricMatrix& a) {
  if (a.order() > kDenseEigMaxOrder) {
    throw SizeLimitError("dense_eig: order " + std::to_string(a.order()) + " exceeds " +
                         std::to_string(kDenseEigMaxOrder));
  }
  if (!a.all_finite()) throw InvalidArgument("dense_eig: non-finite entries");
}

}  // namespace detail

/// Full eigendecomposition of a symmetric matrix of order <= 512, sorted by
/// descending eigenvalue. Eigenvectors follow the SpectralPair sign rule.
inline std::vector<EigenPair> dense_eig(const SymmetricMatrix& a) {
  detail::check_dense_order(a);
  const std::size_t n = a.order();
  std::vector<double> v(a.data().begin(), a.data().end());
  std::vector<double> d(n), e(n);
  detail::tridiagonalize(n, v, d, e);
  detail::tridiagonal_ql(n, v, d, e, /*vectors=*/true);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });

  std::vector<EigenPair> out;
  out.reserve(n);
  for (std::size_t idx : order) {
    EigenPair p;
    p.value = d[idx];
    p.vector.assign(v.begin() + static_cast<std::ptrdiff_t>(idx * n),
                    v.begin() + static_cast<std::ptrdiff_t>((idx + 1) * n));
    apply_sign_convention(p.vector);
    out.push_back(std::move(p));
  }
  return out;
}

/// Eigenvalues only, sorted descending.
inline std::vector<double> dense_eigenvalues(const SymmetricMatrix& a) {
  detail::check_dense_order(a);
  const std::size_t n = a.order();
  std::vector<double> v(a.data().begin(), a.data().end());
  std::vector<double> d(n), e(n);
  detail::tridiagonalize(n, v, d, e);
  detail::tridiagonal_ql(n, v, d, e, /*vectors=*/false);
  std::sort(d.begin(), d.end(), std::greater<>());
  return d;
}

/// Spectral norm max |lambda_i| of a symmetric matrix.
///
/// Exact (dense) for order <= 512. Larger matrices use power iteration on
/// A^2, whose dominant eigenvalue is ||A||^2 regardless of the sign of A's
/// extreme eigenvalues.
inline double spectral_norm(const SymmetricMatrix& a, const PowerOptions& opts = {}) {
  if (!a.all_finite()) throw InvalidArgument("spectral_norm: non-finite entries");
  if (a.order() <= kDenseEigMaxOrder) {
    const auto ev = dense_eigenvalues(a);
    return std::max(std::abs(ev.front()), std::abs(ev.back()));
  }
  std::vector<double> tmp(a.order());
  auto squared = [&](std::span<const double> x, std::span<double> y) {
    a.multiply(x, tmp);
    a.multiply(tmp, y);
  };
  const SpectralPair top = power_iteration(squared, a.order(), opts);
  return std::sqrt(std::max(0.0, top.value));
}

}  // namespace hmatch
