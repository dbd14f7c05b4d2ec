#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "condual/numeric.hpp"

namespace condual {

enum class LpStatus { optimal, infeasible, unbounded };

enum class RowSense { le, eq, ge };

/// maximize c'x subject to rows, with each variable either free or x >= 0.
template <class T>
struct LinearProgram {
  struct Row {
    Vec<T> coeffs;
    RowSense sense;
    T rhs;
  };

  explicit LinearProgram(std::size_t n = 0) : objective(n, T(0)), nonneg(n, false) {}

  std::size_t num_vars() const { return objective.size(); }

  std::size_t add_var(bool nonnegative, T cost = T(0)) {
    objective.push_back(std::move(cost));
    nonneg.push_back(nonnegative);
    for (auto& r : rows) r.coeffs.push_back(T(0));
    return objective.size() - 1;
  }

  std::size_t add_row(Vec<T> coeffs, RowSense sense, T rhs) {
    if (coeffs.size() != num_vars()) throw std::invalid_argument("LinearProgram::add_row: width mismatch");
    rows.push_back({std::move(coeffs), sense, std::move(rhs)});
    return rows.size() - 1;
  }

  Vec<T> objective;
  std::vector<bool> nonneg;
  std::vector<Row> rows;
};

template <class T>
struct LpResult {
  LpStatus status = LpStatus::infeasible;
  T objective{0};
  Vec<T> x;
  /// Row multipliers y with c = sum_i y_i a_i on free columns and
  /// objective = sum_i y_i rhs_i at an optimum. le rows carry y >= 0, ge rows
  /// y <= 0.
  Vec<T> duals;
};

namespace detail {

/// Dense two-phase tableau simplex for max c'x, Ax <= b, x >= 0, using
/// Bland's rule so that exact arithmetic cannot cycle. Layout follows the
/// common competitive-programming formulation with one artificial column.
template <class T>
class TableauSimplex {
 public:
  TableauSimplex(const std::vector<Vec<T>>& a, const Vec<T>& b, const Vec<T>& c)
      : m_(static_cast<int>(b.size())),
        n_(static_cast<int>(c.size())),
        basis_(m_),
        nonbasis_(n_ + 1),
        d_(m_ + 2, Vec<T>(n_ + 2, T(0))) {
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j) d_[i][j] = a[i][j];
    for (int i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      d_[i][n_] = T(-1);
      d_[i][n_ + 1] = b[i];
    }
    for (int j = 0; j < n_; ++j) {
      nonbasis_[j] = j;
      d_[m_][j] = -c[j];
    }
    nonbasis_[n_] = -1;
    d_[m_ + 1][n_] = T(1);
  }

  LpStatus solve() {
    const T eps = ScalarTraits<T>::eps();
    int r = 0;
    for (int i = 1; i < m_; ++i)
      if (d_[i][n_ + 1] < d_[r][n_ + 1]) r = i;
    if (m_ > 0 && d_[r][n_ + 1] < -eps) {
      pivot(r, n_);
      if (!run(2) || d_[m_ + 1][n_ + 1] < -eps) return LpStatus::infeasible;
      for (int i = 0; i < m_; ++i) {
        if (basis_[i] != -1) continue;
        int s = -1;
        for (int j = 0; j < n_ + 1; ++j) {
          if (nonbasis_[j] == -1) continue;
          if (abs_value(d_[i][j]) > eps && (s == -1 || abs_value(d_[i][j]) > abs_value(d_[i][s]))) s = j;
        }
        if (s != -1) pivot(i, s);
      }
    }
    return run(1) ? LpStatus::optimal : LpStatus::unbounded;
  }

  T objective() const { return d_[m_][n_ + 1]; }

  Vec<T> primal() const {
    Vec<T> x(n_, T(0));
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= 0 && basis_[i] < n_) x[basis_[i]] = d_[i][n_ + 1];
    return x;
  }

  Vec<T> dual() const {
    Vec<T> y(m_, T(0));
    for (int j = 0; j < n_ + 1; ++j)
      if (nonbasis_[j] >= n_) y[nonbasis_[j] - n_] = d_[m_][j];
    return y;
  }

 private:
  void pivot(int r, int s) {
    const T eps = ScalarTraits<T>::eps();
    const T inv = T(1) / d_[r][s];
    for (int i = 0; i < m_ + 2; ++i) {
      if (i == r || abs_value(d_[i][s]) <= eps) continue;
      const T factor = d_[i][s] * inv;
      for (int j = 0; j < n_ + 2; ++j) d_[i][j] -= d_[r][j] * factor;
      d_[i][s] = d_[r][s] * factor;
    }
    for (int j = 0; j < n_ + 2; ++j)
      if (j != s) d_[r][j] *= inv;
    for (int i = 0; i < m_ + 2; ++i)
      if (i != r) d_[i][s] *= -inv;
    d_[r][s] = inv;
    std::swap(basis_[r], nonbasis_[s]);
  }

  bool run(int phase) {
    const T eps = ScalarTraits<T>::eps();
    const int x = m_ + phase - 1;
    for (;;) {
      int s = -1;
      for (int j = 0; j < n_ + 1; ++j) {
        if (nonbasis_[j] == -phase) continue;
        if (d_[x][j] < -eps && (s == -1 || nonbasis_[j] < nonbasis_[s])) s = j;
      }
      if (s == -1) return true;
      int r = -1;
      T best_ratio(0);
      for (int i = 0; i < m_; ++i) {
        if (d_[i][s] <= eps) continue;
        const T ratio = d_[i][n_ + 1] / d_[i][s];
        if (r == -1 || ratio < best_ratio || (ratio == best_ratio && basis_[i] < basis_[r])) {
          r = i;
          best_ratio = ratio;
        }
      }
      if (r == -1) return false;
      pivot(r, s);
    }
  }

  int m_;
  int n_;
  std::vector<int> basis_;
  std::vector<int> nonbasis_;
  std::vector<Vec<T>> d_;
};

}  // namespace detail

template <class T>
LpResult<T> solve_lp(const LinearProgram<T>& lp) {
  const std::size_t n = lp.num_vars();
  // Column map: free variables split into positive and negative parts.
  std::vector<int> pos_col(n);
  std::vector<int> neg_col(n, -1);
  int cols = 0;
  for (std::size_t j = 0; j < n; ++j) {
    pos_col[j] = cols++;
    if (!lp.nonneg[j]) neg_col[j] = cols++;
  }
  std::vector<Vec<T>> a;
  Vec<T> b;
  struct Origin {
    std::size_t row;
    int sign;
  };
  std::vector<Origin> origin;
  auto push = [&](const typename LinearProgram<T>::Row& row, int sign, std::size_t idx) {
    Vec<T> coeffs(cols, T(0));
    for (std::size_t j = 0; j < n; ++j) {
      if (row.coeffs[j] == T(0)) continue;
      const T v = sign > 0 ? row.coeffs[j] : T(-row.coeffs[j]);
      coeffs[pos_col[j]] = v;
      if (neg_col[j] >= 0) coeffs[neg_col[j]] = -v;
    }
    a.push_back(std::move(coeffs));
    b.push_back(sign > 0 ? row.rhs : T(-row.rhs));
    origin.push_back({idx, sign});
  };
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    const auto& row = lp.rows[i];
    switch (row.sense) {
      case RowSense::le: push(row, 1, i); break;
      case RowSense::ge: push(row, -1, i); break;
      case RowSense::eq:
        push(row, 1, i);
        push(row, -1, i);
        break;
    }
  }
  Vec<T> c(cols, T(0));
  for (std::size_t j = 0; j < n; ++j) {
    c[pos_col[j]] = lp.objective[j];
    if (neg_col[j] >= 0) c[neg_col[j]] = -lp.objective[j];
  }

  detail::TableauSimplex<T> simplex(a, b, c);
  LpResult<T> result;
  result.status = simplex.solve();
  if (result.status != LpStatus::optimal) return result;
  result.objective = simplex.objective();
  const Vec<T> z = simplex.primal();
  result.x.assign(n, T(0));
  for (std::size_t j = 0; j < n; ++j) {
    result.x[j] = z[pos_col[j]];
    if (neg_col[j] >= 0) result.x[j] -= z[neg_col[j]];
  }
  const Vec<T> y = simplex.dual();
  result.duals.assign(lp.rows.size(), T(0));
  for (std::size_t k = 0; k < origin.size(); ++k) {
    if (origin[k].sign > 0) {
      result.duals[origin[k].row] += y[k];
    } else {
      result.duals[origin[k].row] -= y[k];
    }
  }
  return result;
}

}  // namespace condual
