#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hmatch/matrix.hpp"
#include "hmatch/random.hpp"

namespace testutil {

inline hmatch::DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  hmatch::RandomStream rng(seed, 99);
  hmatch::DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

inline hmatch::SymmetricMatrix random_symmetric(std::size_t n, std::uint64_t seed) {
  hmatch::RandomStream rng(seed, 98);
  hmatch::SymmetricMatrix m(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j; i < n; ++i) m.set(i, j, rng.normal());
  return m;
}

inline double max_abs_diff(const hmatch::SymmetricMatrix& a, const hmatch::SymmetricMatrix& b) {
  double out = 0.0;
  for (std::size_t j = 0; j < a.order(); ++j)
    for (std::size_t i = 0; i < a.order(); ++i) out = std::max(out, std::abs(a(i, j) - b(i, j)));
  return out;
}

inline double max_abs(const hmatch::SymmetricMatrix& a) {
  double out = 0.0;
  for (double v : a.data()) out = std::max(out, std::abs(v));
  return out;
}

}  // namespace testutil
