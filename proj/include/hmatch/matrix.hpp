#pragma once

// Dense real matrices stored column-major, plus the Gram and Hadamard
// products the overlap pipeline is built from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmatch/error.hpp"

namespace hmatch {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw InvalidArgument(std::string(what) + ": non-finite entry");
    }
  }
}

/// Plain left-to-right inner product. Every Gram entry in the library goes
/// through this function so fused and unfused paths agree bitwise.
inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

}  // namespace detail

/// A rows x cols real matrix in column-major order; column j is one data point.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw InvalidArgument("DenseMatrix: zero dimension");
    if (!std::isfinite(fill)) throw InvalidArgument("DenseMatrix: non-finite fill");
  }

  /// Takes ownership of column-major `data`.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw InvalidArgument("DenseMatrix: zero dimension");
    if (data_.size() != rows * cols) {
      throw InvalidArgument("DenseMatrix: data length does not match rows*cols");
    }
    detail::require_finite(data_, "DenseMatrix");
  }

  /// Builds a matrix from a list of columns of equal length.
  static DenseMatrix from_columns(const std::vector<std::vector<double>>& columns) {
    if (columns.empty() || columns.front().empty()) {
      throw InvalidArgument("DenseMatrix::from_columns: empty input");
    }
    const std::size_t rows = columns.front().size();
    std::vector<double> data;
    data.reserve(rows * columns.size());
    for (const auto& c : columns) {
      if (c.size() != rows) throw InvalidArgument("DenseMatrix::from_columns: ragged columns");
      data.insert(data.end(), c.begin(), c.end());
    }
    return DenseMatrix(rows, columns.size(), std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * rows_ + i]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[j * rows_ + i]; }

  std::span<const double> col(std::size_t j) const noexcept {
    return {data_.data() + j * rows_, rows_};
  }
  std::span<double> col(std::size_t j) noexcept { return {data_.data() + j * rows_, rows_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  /// Columns listed in `indices`, in that order.
  DenseMatrix select_columns(std::span<const std::size_t> indices) const {
    std::vector<double> out;
    out.reserve(rows_ * indices.size());
    for (std::size_t j : indices) {
      if (j >= cols_) throw InvalidArgument("select_columns: index out of range");
      auto c = col(j);
      out.insert(out.end(), c.begin(), c.end());
    }
    return DenseMatrix(rows_, indices.size(), std::move(out));
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Product A*B of dense matrices.
inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("multiply: inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto oc = out.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      auto ac = a.col(k);
      for (std::size_t i = 0; i < a.rows(); ++i) oc[i] += ac[i] * bkj;
    }
  }
  return out;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) out(j, i) = a(i, j);
  return out;
}

/// Symmetric n x n matrix in full column-major storage. Writes go through
/// set(), which mirrors the value, so A(i,j) and A(j,i) are always the same
/// stored double.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;

  explicit SymmetricMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {
    if (n == 0) throw InvalidArgument("SymmetricMatrix: zero order");
  }

  /// Reads the lower triangle of a column-major n x n buffer and mirrors it.
  static SymmetricMatrix from_lower(std::size_t n, std::span<const double> full) {
    if (full.size() != n * n) throw InvalidArgument("SymmetricMatrix: data length mismatch");
    SymmetricMatrix m(n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = j; i < n; ++i) m.set(i, j, full[j * n + i]);
    detail::require_finite(m.data_, "SymmetricMatrix");
    return m;
  }

  static SymmetricMatrix identity(std::size_t n) {
    SymmetricMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
  }

  static SymmetricMatrix diagonal(std::span<const double> diag) {
    SymmetricMatrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m.set(i, i, diag[i]);
    return m;
  }

  std::size_t order() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[j * n_ + i]; }

  void set(std::size_t i, std::size_t j, double v) noexcept {
    data_[j * n_ + i] = v;
    data_[i * n_ + j] = v;
  }

  /// Column j, equal to row j by symmetry.
  std::span<const double> col(std::size_t j) const noexcept {
    return {data_.data() + j * n_, n_};
  }

  std::span<const double> data() const noexcept { return data_; }

  /// y = A x.
  void multiply(std::span<const double> x, std::span<double> y) const noexcept {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      const double xj = x[j];
      const double* c = data_.data() + j * n_;
      for (std::size_t i = 0; i < n_; ++i) y[i] += c[i] * xj;
    }
  }

  bool all_finite() const noexcept {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Gram matrix X^T X; each unordered pair is computed once.
inline SymmetricMatrix gram(const DenseMatrix& x) {
  if (x.empty()) throw InvalidArgument("gram: empty matrix");
  const std::size_t n = x.cols();
  SymmetricMatrix g(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j; i < n; ++i) g.set(i, j, detail::dot(x.col(i), x.col(j)));
  return g;
}

/// Entrywise product A o B.
inline SymmetricMatrix hadamard(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  if (a.order() != b.order()) throw InvalidArgument("hadamard: order mismatch");
  const std::size_t n = a.order();
  SymmetricMatrix h(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j; i < n; ++i) h.set(i, j, a(i, j) * b(i, j));
  return h;
}

/// Elementwise difference A - B.
inline SymmetricMatrix subtract(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  if (a.order() != b.order()) throw InvalidArgument("subtract: order mismatch");
  const std::size_t n = a.order();
  SymmetricMatrix out(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j; i < n; ++i) out.set(i, j, a(i, j) - b(i, j));
  return out;
}

}  // namespace hmatch
