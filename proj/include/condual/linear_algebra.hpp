#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "condual/numeric.hpp"

namespace condual {

/// Row-major dense matrix, sized for the handful of dimensions a node carries.
template <class T>
using Matrix = std::vector<Vec<T>>;

template <class T>
struct RowEchelon {
  Matrix<T> reduced;               // nonzero rows of the reduced row echelon form
  std::vector<std::size_t> pivots;  // pivot column of each reduced row
};

/// Reduced row echelon form by Gauss-Jordan elimination, pivoting only in the
/// first `cols` columns; trailing columns are carried along. Floating point uses
/// partial pivoting and treats |entry| <= pivot_tol * scale as zero.
template <class T>
RowEchelon<T> row_echelon(Matrix<T> m, std::size_t cols, double pivot_tol = 1e-12) {
  RowEchelon<T> out;
  const std::size_t rows = m.size();
  T scale(0);
  if constexpr (!ScalarTraits<T>::exact) {
    for (const auto& r : m)
      for (const auto& v : r) scale = std::max(scale, abs_value(v));
    if (scale == T(0)) scale = T(1);
  }
  auto is_zero = [&](const T& v) {
    if constexpr (ScalarTraits<T>::exact) {
      return v == T(0);
    } else {
      return abs_value(v) <= pivot_tol * scale;
    }
  };
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t best = rows;
    for (std::size_t i = r; i < rows; ++i) {
      if (is_zero(m[i][c])) continue;
      if constexpr (ScalarTraits<T>::exact) {
        best = i;
        break;
      } else {
        if (best == rows || abs_value(m[i][c]) > abs_value(m[best][c])) best = i;
      }
    }
    if (best == rows) continue;
    std::swap(m[r], m[best]);
    const T inv = T(1) / m[r][c];
    for (auto& v : m[r]) v *= inv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || m[i][c] == T(0)) continue;
      const T f = m[i][c];
      for (std::size_t j = 0; j < m[i].size(); ++j) m[i][j] -= f * m[r][j];
    }
    out.pivots.push_back(c);
    ++r;
  }
  m.resize(r);
  out.reduced = std::move(m);
  return out;
}

template <class T>
std::size_t matrix_rank(const Matrix<T>& m, std::size_t cols) {
  return row_echelon(m, cols).pivots.size();
}

/// Solves the nonsingular square system a x = b.
template <class T>
Vec<T> solve_square(const Matrix<T>& a, const Vec<T>& b) {
  const std::size_t n = b.size();
  Matrix<T> aug(n, Vec<T>(n + 1, T(0)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug[i][j] = a[i][j];
    aug[i][n] = b[i];
  }
  auto ech = row_echelon(std::move(aug), n);
  if (ech.pivots.size() != n) throw std::domain_error("solve_square: singular system");
  Vec<T> x(n);
  for (std::size_t i = 0; i < n; ++i) x[ech.pivots[i]] = ech.reduced[i][n];
  return x;
}

template <class T>
Matrix<T> transpose(const Matrix<T>& m, std::size_t cols) {
  Matrix<T> t(cols, Vec<T>(m.size(), T(0)));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j][i] = m[i][j];
  return t;
}

template <class T>
Vec<T> mat_vec(const Matrix<T>& m, const Vec<T>& v) {
  Vec<T> out(m.size(), T(0));
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = dot(m[i], v);
  return out;
}

}  // namespace condual
