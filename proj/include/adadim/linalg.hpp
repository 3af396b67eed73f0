#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "adadim/error.hpp"

namespace adadim {

// Square float64 matrix, row-major.
struct Matrix64 {
  std::size_t n = 0;
  std::vector<double> a;

  Matrix64() = default;
  explicit Matrix64(std::size_t size) : n(size), a(size * size, 0.0) {}

  static Matrix64 identity(std::size_t size) {
    Matrix64 m(size);
    for (std::size_t i = 0; i < size; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) noexcept { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a[i * n + j]; }
};

// Lower factor L with L L^T = m. Throws Errc::Numeric if m is not positive-definite.
inline Matrix64 cholesky_lower(const Matrix64& m) {
  Matrix64 l(m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = m(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(sum > 0.0) || !std::isfinite(sum)) {
          throw Error(Errc::Numeric, "matrix is not positive-definite (pivot " + std::to_string(i) +
                                         " = " + std::to_string(sum) + ")");
        }
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

// m^-1 from its Cholesky factor: solve L L^T X = I column by column.
inline Matrix64 cholesky_inverse(const Matrix64& l) {
  const std::size_t n = l.n;
  Matrix64 inv(n);
  std::vector<double> y(n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = (i == col) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * y[k];
      y[i] = sum / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double sum = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) sum -= l(k, ii) * inv(k, col);
      inv(ii, col) = sum / l(ii, ii);
    }
  }
  // Symmetrize away rounding asymmetry.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  }
  return inv;
}

inline Matrix64 transpose(const Matrix64& m) {
  Matrix64 t(m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) t(j, i) = m(i, j);
  }
  return t;
}

}  // namespace adadim
