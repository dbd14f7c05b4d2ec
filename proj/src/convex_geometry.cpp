#include "condual/convex_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace condual {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t check_common_dim(const std::vector<ConvexSet>& parts) {
  if (parts.empty()) throw InputError("intersection needs at least one member");
  const std::size_t d = parts.front().dim();
  for (const auto& p : parts)
    if (p.dim() != d) throw InputError("intersection members differ in dimension");
  return d;
}

Vec<Rational> unit_vector(std::size_t d, std::size_t j, int sign = 1) {
  Vec<Rational> e(d, Rational(0));
  e[j] = Rational(sign);
  return e;
}

/// Offsets of each product factor inside the ambient coordinates.
std::vector<std::size_t> product_offsets(const Product& p) {
  std::vector<std::size_t> off;
  std::size_t acc = 0;
  for (const auto& part : p.parts) {
    off.push_back(acc);
    acc += part.dim();
  }
  return off;
}

template <class T>
Vec<T> slice(const Vec<T>& v, std::size_t offset, std::size_t len) {
  return Vec<T>(v.begin() + static_cast<std::ptrdiff_t>(offset),
                v.begin() + static_cast<std::ptrdiff_t>(offset + len));
}

Vec<double> to_doubles(const Vec<Rational>& v) { return convert_vec<double>(v); }

Vec<Rational> to_rationals(const Vec<double>& v) {
  Vec<Rational> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(rational_from_double(x));
  return out;
}

bool has_ball(const ConvexSet& set) { return !is_polyhedral(set); }

// Active-set projection onto {h : a h <= b} starting from a feasible point.
Vec<double> project_polyhedron(const Matrix<double>& a, const Vec<double>& b, const Vec<double>& z,
                               Vec<double> h) {
  const std::size_t m = a.size();
  const std::size_t d = z.size();
  double scale = 1.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::abs(v));
  for (double v : b) scale = std::max(scale, std::abs(v));
  const double tight_tol = 1e-12 * scale;

  std::vector<std::size_t> work;
  auto independent_with = [&](std::size_t i) {
    Matrix<double> rows;
    for (auto w : work) rows.push_back(a[w]);
    rows.push_back(a[i]);
    return matrix_rank(rows, d) == rows.size();
  };
  for (std::size_t i = 0; i < m; ++i)
    if (std::abs(dot(a[i], h) - b[i]) <= tight_tol && work.size() < d && independent_with(i)) work.push_back(i);

  for (std::size_t iter = 0; iter < 20 * (m + d) + 50; ++iter) {
    Vec<double> g(d);
    for (std::size_t j = 0; j < d; ++j) g[j] = z[j] - h[j];
    Vec<double> mu;
    Vec<double> p = g;
    if (!work.empty()) {
      const std::size_t k = work.size();
      Matrix<double> gram(k, Vec<double>(k));
      Vec<double> rhs(k);
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < k; ++c) gram[r][c] = dot(a[work[r]], a[work[c]]);
        rhs[r] = dot(a[work[r]], g);
      }
      mu = solve_square(gram, rhs);
      for (std::size_t r = 0; r < k; ++r)
        for (std::size_t j = 0; j < d; ++j) p[j] -= mu[r] * a[work[r]][j];
    }
    if (norm2(p) <= 1e-14 * (1.0 + norm2(h))) {
      std::size_t worst = work.size();
      double worst_mu = -1e-13;
      for (std::size_t r = 0; r < work.size(); ++r)
        if (mu[r] < worst_mu) {
          worst_mu = mu[r];
          worst = r;
        }
      if (worst == work.size()) return h;
      work.erase(work.begin() + static_cast<std::ptrdiff_t>(worst));
      continue;
    }
    double alpha = 1.0;
    std::size_t blocking = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ap = dot(a[i], p);
      if (ap <= 1e-15 * scale) continue;
      const double step = std::max(0.0, (b[i] - dot(a[i], h)) / ap);
      if (step < alpha) {
        alpha = step;
        blocking = i;
      }
    }
    for (std::size_t j = 0; j < d; ++j) h[j] += alpha * p[j];
    if (blocking < m) work.push_back(blocking);
  }
  return h;
}

Vec<double> dykstra(const std::vector<ConvexSet>& parts, const Vec<double>& z) {
  Vec<double> x = z;
  std::vector<Vec<double>> incr(parts.size(), Vec<double>(z.size(), 0.0));
  for (int iter = 0; iter < 20000; ++iter) {
    double change = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      Vec<double> shifted(z.size());
      for (std::size_t j = 0; j < z.size(); ++j) shifted[j] = x[j] + incr[i][j];
      Vec<double> y = project(parts[i], shifted);
      for (std::size_t j = 0; j < z.size(); ++j) {
        incr[i][j] = shifted[j] - y[j];
        change = std::max(change, std::abs(y[j] - x[j]));
      }
      x = std::move(y);
    }
    if (change <= 1e-14 * (1.0 + norm2(x))) break;
  }
  return x;
}

template <class T>
Extended<T> lp_support(const ConvexSet& set, const Vec<T>& dir) {
  const std::size_t d = set.dim();
  std::vector<std::size_t> vars(d);
  std::iota(vars.begin(), vars.end(), 0);
  if constexpr (ScalarTraits<T>::exact) {
    if (has_ball(set)) {
      const auto approx = lp_support<double>(set, to_double_vec(dir));
      if (!approx.is_finite()) return approx.is_pos_inf() ? Extended<T>::pos_inf() : Extended<T>::neg_inf();
      return Extended<T>(rational_from_double(approx.value()));
    }
  }
  LinearProgram<T> lp(d);
  lp.objective = dir;
  if constexpr (ScalarTraits<T>::exact) {
    append_set_rows(lp, set, vars, nullptr);
    const auto res = solve_lp(lp);
    if (res.status == LpStatus::infeasible) return Extended<T>::neg_inf();
    if (res.status == LpStatus::unbounded) return Extended<T>::pos_inf();
    return Extended<T>(res.objective);
  } else {
    std::vector<BallConstraint> balls;
    append_set_rows(lp, set, vars, &balls);
    const auto res = solve_lp_with_cuts(lp, balls);
    if (res.lp.status == LpStatus::infeasible) return Extended<T>::neg_inf();
    if (res.lp.status == LpStatus::unbounded) return Extended<T>::pos_inf();
    return Extended<T>(res.lp.objective);
  }
}

}  // namespace

// --- construction -----------------------------------------------------------

ConvexSet ConvexSet::polyhedron(Matrix<Rational> a, Vec<Rational> b, std::size_t dim) {
  if (a.size() != b.size()) throw InputError("polyhedron: row count of A and b differ");
  for (const auto& row : a)
    if (row.size() != dim) throw InputError("polyhedron: row width differs from dimension");
  return ConvexSet(Polyhedron{std::move(a), std::move(b)}, dim);
}

ConvexSet ConvexSet::box(std::vector<std::optional<Rational>> lower, std::vector<std::optional<Rational>> upper) {
  if (lower.size() != upper.size()) throw InputError("box: bound vectors differ in length");
  const std::size_t d = lower.size();
  return ConvexSet(Box{std::move(lower), std::move(upper)}, d);
}

ConvexSet ConvexSet::ball(Vec<Rational> center, Rational radius) {
  const std::size_t d = center.size();
  return ConvexSet(Ball{std::move(center), std::move(radius)}, d);
}

ConvexSet ConvexSet::affine_fixed(std::vector<std::optional<Rational>> fixed) {
  const std::size_t d = fixed.size();
  return ConvexSet(AffineFixed{std::move(fixed)}, d);
}

ConvexSet ConvexSet::singleton(Vec<Rational> point) {
  const std::size_t d = point.size();
  return ConvexSet(Singleton{std::move(point)}, d);
}

ConvexSet ConvexSet::intersection(std::vector<ConvexSet> parts) {
  const std::size_t d = check_common_dim(parts);
  return ConvexSet(Intersection{std::move(parts)}, d);
}

ConvexSet ConvexSet::product(std::vector<ConvexSet> parts) {
  if (parts.empty()) throw InputError("product needs at least one factor");
  std::size_t d = 0;
  for (const auto& p : parts) d += p.dim();
  return ConvexSet(Product{std::move(parts)}, d);
}

ConvexSet ConvexSet::whole_space(std::size_t dim) {
  return box(std::vector<std::optional<Rational>>(dim), std::vector<std::optional<Rational>>(dim));
}

std::string ConvexSet::type_name() const {
  return std::visit(Overloaded{[](const Polyhedron&) { return std::string("polyhedron"); },
                               [](const Box&) { return std::string("box"); },
                               [](const Ball&) { return std::string("ball"); },
                               [](const AffineFixed&) { return std::string("affine_fixed"); },
                               [](const Singleton&) { return std::string("singleton"); },
                               [](const Intersection&) { return std::string("intersection"); },
                               [](const Product&) { return std::string("product"); }},
                    data_);
}

Cone Cone::zero(std::size_t d) {
  Cone c;
  c.form = Form::generators;
  c.dim = d;
  return c;
}

Cone Cone::whole(std::size_t d) {
  Cone c;
  c.form = Form::inequality;
  c.dim = d;
  return c;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "true";
    case Verdict::no: return "false";
    default: return "unknown";
  }
}

// --- structural queries -----------------------------------------------------

bool is_polyhedral(const ConvexSet& set) {
  return std::visit(Overloaded{[](const Ball&) { return false; },
                               [](const Intersection& i) {
                                 return std::all_of(i.parts.begin(), i.parts.end(),
                                                    [](const ConvexSet& p) { return is_polyhedral(p); });
                               },
                               [](const Product& p) {
                                 return std::all_of(p.parts.begin(), p.parts.end(),
                                                    [](const ConvexSet& s) { return is_polyhedral(s); });
                               },
                               [](const auto&) { return true; }},
                    set.data());
}

bool is_bounded(const ConvexSet& set) {
  return std::visit(
      Overloaded{[](const Ball&) { return true; }, [](const Singleton&) { return true; },
                 [](const Box& b) {
                   for (std::size_t j = 0; j < b.lower.size(); ++j)
                     if (!b.lower[j] || !b.upper[j]) return false;
                   return true;
                 },
                 [](const AffineFixed& a) {
                   return std::all_of(a.fixed.begin(), a.fixed.end(), [](const auto& v) { return v.has_value(); });
                 },
                 [&](const Polyhedron&) { return cone_generators(recession_cone(set)).empty(); },
                 [](const Intersection& i) {
                   if (std::any_of(i.parts.begin(), i.parts.end(), [](const ConvexSet& p) { return is_bounded(p); }))
                     return true;
                   return false;
                 },
                 [](const Product& p) {
                   return std::all_of(p.parts.begin(), p.parts.end(), [](const ConvexSet& s) { return is_bounded(s); });
                 }},
      set.data());
}

Polyhedron to_polyhedron(const ConvexSet& set) {
  const std::size_t d = set.dim();
  Polyhedron out;
  auto push = [&](Vec<Rational> row, Rational rhs) {
    out.a.push_back(std::move(row));
    out.b.push_back(std::move(rhs));
  };
  std::visit(Overloaded{[&](const Polyhedron& p) { out = p; },
                        [&](const Box& b) {
                          for (std::size_t j = 0; j < d; ++j) {
                            if (b.upper[j]) push(unit_vector(d, j), *b.upper[j]);
                            if (b.lower[j]) push(unit_vector(d, j, -1), Rational(-*b.lower[j]));
                          }
                        },
                        [&](const Ball&) {
                          throw UnsupportedError("ball has no polyhedral representation");
                        },
                        [&](const AffineFixed& a) {
                          for (std::size_t j = 0; j < d; ++j) {
                            if (!a.fixed[j]) continue;
                            push(unit_vector(d, j), *a.fixed[j]);
                            push(unit_vector(d, j, -1), Rational(-*a.fixed[j]));
                          }
                        },
                        [&](const Singleton& s) {
                          for (std::size_t j = 0; j < d; ++j) {
                            push(unit_vector(d, j), s.point[j]);
                            push(unit_vector(d, j, -1), Rational(-s.point[j]));
                          }
                        },
                        [&](const Intersection& i) {
                          for (const auto& p : i.parts) {
                            auto sub = to_polyhedron(p);
                            for (std::size_t r = 0; r < sub.a.size(); ++r) push(sub.a[r], sub.b[r]);
                          }
                        },
                        [&](const Product& p) {
                          const auto off = product_offsets(p);
                          for (std::size_t k = 0; k < p.parts.size(); ++k) {
                            auto sub = to_polyhedron(p.parts[k]);
                            for (std::size_t r = 0; r < sub.a.size(); ++r) {
                              Vec<Rational> row(d, Rational(0));
                              for (std::size_t j = 0; j < p.parts[k].dim(); ++j) row[off[k] + j] = sub.a[r][j];
                              push(std::move(row), sub.b[r]);
                            }
                          }
                        }},
             set.data());
  return out;
}

// --- LP embedding -----------------------------------------------------------

template <class T>
void append_set_rows(LinearProgram<T>& lp, const ConvexSet& set, const std::vector<std::size_t>& vars,
                     std::vector<BallConstraint>* balls) {
  if (vars.size() != set.dim()) throw std::invalid_argument("append_set_rows: variable count mismatch");
  const std::size_t width = lp.num_vars();
  auto row_of = [&](std::size_t j, const T& coeff) {
    Vec<T> row(width, T(0));
    row[vars[j]] = coeff;
    return row;
  };
  auto conv = [](const Rational& r) { return ScalarTraits<T>::from_rational(r); };
  std::visit(Overloaded{[&](const Polyhedron& p) {
                          for (std::size_t r = 0; r < p.a.size(); ++r) {
                            Vec<T> row(width, T(0));
                            for (std::size_t j = 0; j < vars.size(); ++j) row[vars[j]] += conv(p.a[r][j]);
                            lp.add_row(std::move(row), RowSense::le, conv(p.b[r]));
                          }
                        },
                        [&](const Box& b) {
                          for (std::size_t j = 0; j < vars.size(); ++j) {
                            if (b.upper[j]) lp.add_row(row_of(j, T(1)), RowSense::le, conv(*b.upper[j]));
                            if (b.lower[j]) lp.add_row(row_of(j, T(1)), RowSense::ge, conv(*b.lower[j]));
                          }
                        },
                        [&](const Ball& b) {
                          if constexpr (ScalarTraits<T>::exact) {
                            throw UnsupportedError("ball constraints are not available in exact arithmetic");
                          } else {
                            if (balls == nullptr) throw UnsupportedError("ball constraint requires the cut loop");
                            balls->push_back({vars, to_doubles(b.center), b.radius.template convert_to<double>()});
                          }
                        },
                        [&](const AffineFixed& a) {
                          for (std::size_t j = 0; j < vars.size(); ++j)
                            if (a.fixed[j]) lp.add_row(row_of(j, T(1)), RowSense::eq, conv(*a.fixed[j]));
                        },
                        [&](const Singleton& s) {
                          for (std::size_t j = 0; j < vars.size(); ++j)
                            lp.add_row(row_of(j, T(1)), RowSense::eq, conv(s.point[j]));
                        },
                        [&](const Intersection& i) {
                          for (const auto& p : i.parts) append_set_rows(lp, p, vars, balls);
                        },
                        [&](const Product& p) {
                          const auto off = product_offsets(p);
                          for (std::size_t k = 0; k < p.parts.size(); ++k) {
                            std::vector<std::size_t> sub(vars.begin() + static_cast<std::ptrdiff_t>(off[k]),
                                                         vars.begin() + static_cast<std::ptrdiff_t>(off[k] + p.parts[k].dim()));
                            append_set_rows(lp, p.parts[k], sub, balls);
                          }
                        }},
             set.data());
}

template void append_set_rows<double>(LinearProgram<double>&, const ConvexSet&, const std::vector<std::size_t>&,
                                      std::vector<BallConstraint>*);
template void append_set_rows<Rational>(LinearProgram<Rational>&, const ConvexSet&, const std::vector<std::size_t>&,
                                        std::vector<BallConstraint>*);

CutLpResult solve_lp_with_cuts(LinearProgram<double> lp, const std::vector<BallConstraint>& balls, double feas_tol,
                               int max_rounds) {
  CutLpResult out;
  const std::size_t width = lp.num_vars();
  for (const auto& ball : balls) {
    for (std::size_t j = 0; j < ball.vars.size(); ++j) {
      Vec<double> row(width, 0.0);
      row[ball.vars[j]] = 1.0;
      lp.add_row(row, RowSense::le, ball.center[j] + ball.radius);
      lp.add_row(row, RowSense::ge, ball.center[j] - ball.radius);
    }
  }
  for (int round = 0;; ++round) {
    out.lp = solve_lp(lp);
    if (balls.empty() || out.lp.status != LpStatus::optimal) return out;
    bool violated = false;
    for (const auto& ball : balls) {
      Vec<double> v(ball.vars.size());
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = out.lp.x[ball.vars[j]] - ball.center[j];
      const double nv = norm2(v);
      if (nv <= ball.radius + feas_tol * (1.0 + ball.radius)) continue;
      violated = true;
      Vec<double> row(width, 0.0);
      double rhs = ball.radius;
      for (std::size_t j = 0; j < v.size(); ++j) {
        row[ball.vars[j]] = v[j] / nv;
        rhs += v[j] / nv * ball.center[j];
      }
      lp.add_row(std::move(row), RowSense::le, rhs);
      ++out.cuts;
    }
    if (!violated) return out;
    if (round >= max_rounds) {
      out.converged = false;
      return out;
    }
  }
}

// --- set operations ---------------------------------------------------------

template <class T>
bool is_empty_t(const ConvexSet& set) {
  const std::size_t d = set.dim();
  if (const auto* ball = std::get_if<Ball>(&set.data())) return ball->radius < 0;
  if (const auto* box = std::get_if<Box>(&set.data())) {
    for (std::size_t j = 0; j < d; ++j)
      if (box->lower[j] && box->upper[j] && *box->lower[j] > *box->upper[j]) return true;
    return false;
  }
  if (std::holds_alternative<Singleton>(set.data()) || std::holds_alternative<AffineFixed>(set.data())) return false;
  if (const auto* prod = std::get_if<Product>(&set.data())) {
    return std::any_of(prod->parts.begin(), prod->parts.end(), [](const ConvexSet& p) { return is_empty_t<T>(p); });
  }
  std::vector<std::size_t> vars(d);
  std::iota(vars.begin(), vars.end(), 0);
  if (has_ball(set) || !ScalarTraits<T>::exact) {
    LinearProgram<double> lp(d);
    std::vector<BallConstraint> balls;
    append_set_rows(lp, set, vars, &balls);
    return solve_lp_with_cuts(lp, balls).lp.status == LpStatus::infeasible;
  }
  LinearProgram<Rational> lp(d);
  append_set_rows(lp, set, vars, nullptr);
  return solve_lp(lp).status == LpStatus::infeasible;
}

template bool is_empty_t<double>(const ConvexSet&);
template bool is_empty_t<Rational>(const ConvexSet&);

bool is_empty(const ConvexSet& set) { return is_empty_t<Rational>(set); }

template <class T>
Extended<T> support_function(const ConvexSet& set, const Vec<T>& dir) {
  const std::size_t d = set.dim();
  if (dir.size() != d) throw std::invalid_argument("support_function: dimension mismatch");
  auto conv = [](const Rational& r) { return ScalarTraits<T>::from_rational(r); };
  return std::visit(
      Overloaded{
          [&](const Box& b) -> Extended<T> {
            if (is_empty_t<T>(set)) return Extended<T>::neg_inf();
            T sum(0);
            for (std::size_t j = 0; j < d; ++j) {
              if (dir[j] > T(0)) {
                if (!b.upper[j]) return Extended<T>::pos_inf();
                sum += dir[j] * conv(*b.upper[j]);
              } else if (dir[j] < T(0)) {
                if (!b.lower[j]) return Extended<T>::pos_inf();
                sum += dir[j] * conv(*b.lower[j]);
              }
            }
            return Extended<T>(sum);
          },
          [&](const Ball& b) -> Extended<T> {
            if (b.radius < 0) return Extended<T>::neg_inf();
            const Vec<double> dd = to_double_vec(dir);
            const double val = dot(to_doubles(b.center), dd) + b.radius.convert_to<double>() * norm2(dd);
            if constexpr (ScalarTraits<T>::exact) {
              return Extended<T>(rational_from_double(val));
            } else {
              return Extended<T>(val);
            }
          },
          [&](const AffineFixed& a) -> Extended<T> {
            T sum(0);
            for (std::size_t j = 0; j < d; ++j) {
              if (!a.fixed[j]) {
                if (dir[j] != T(0)) return Extended<T>::pos_inf();
              } else {
                sum += dir[j] * conv(*a.fixed[j]);
              }
            }
            return Extended<T>(sum);
          },
          [&](const Singleton& s) -> Extended<T> {
            T sum(0);
            for (std::size_t j = 0; j < d; ++j) sum += dir[j] * conv(s.point[j]);
            return Extended<T>(sum);
          },
          [&](const Product& p) -> Extended<T> {
            const auto off = product_offsets(p);
            Extended<T> total(T(0));
            for (std::size_t k = 0; k < p.parts.size(); ++k) {
              const auto part = support_function(p.parts[k], slice(dir, off[k], p.parts[k].dim()));
              if (part.is_neg_inf()) return part;
              if (part.is_pos_inf()) total = Extended<T>::pos_inf();
              if (!total.is_pos_inf()) total += part;
            }
            return total;
          },
          [&](const auto&) -> Extended<T> { return lp_support<T>(set, dir); }},
      set.data());
}

template Extended<double> support_function<double>(const ConvexSet&, const Vec<double>&);
template Extended<Rational> support_function<Rational>(const ConvexSet&, const Vec<Rational>&);

std::optional<Vec<Rational>> support_argmax(const ConvexSet& set, const Vec<Rational>& dir) {
  const std::size_t d = set.dim();
  if (dir.size() != d) throw std::invalid_argument("support_argmax: dimension mismatch");
  return std::visit(
      Overloaded{
          [&](const Box& b) -> std::optional<Vec<Rational>> {
            Vec<Rational> h(d);
            for (std::size_t j = 0; j < d; ++j) {
              if (dir[j] > 0) {
                if (!b.upper[j]) return std::nullopt;
                h[j] = *b.upper[j];
              } else if (dir[j] < 0) {
                if (!b.lower[j]) return std::nullopt;
                h[j] = *b.lower[j];
              } else {
                Rational v(0);
                if (b.lower[j] && v < *b.lower[j]) v = *b.lower[j];
                if (b.upper[j] && v > *b.upper[j]) v = *b.upper[j];
                h[j] = v;
              }
            }
            return h;
          },
          [&](const Ball& b) -> std::optional<Vec<Rational>> {
            const Vec<double> dd = to_doubles(dir);
            const double n = norm2(dd);
            Vec<double> c = to_doubles(b.center);
            if (n > 0)
              for (std::size_t j = 0; j < d; ++j) c[j] += b.radius.convert_to<double>() * dd[j] / n;
            return to_rationals(c);
          },
          [&](const AffineFixed& a) -> std::optional<Vec<Rational>> {
            Vec<Rational> h(d, Rational(0));
            for (std::size_t j = 0; j < d; ++j) {
              if (a.fixed[j]) {
                h[j] = *a.fixed[j];
              } else if (dir[j] != 0) {
                return std::nullopt;
              }
            }
            return h;
          },
          [&](const Singleton& s) -> std::optional<Vec<Rational>> { return s.point; },
          [&](const Product& p) -> std::optional<Vec<Rational>> {
            const auto off = product_offsets(p);
            Vec<Rational> h;
            for (std::size_t k = 0; k < p.parts.size(); ++k) {
              auto part = support_argmax(p.parts[k], slice(dir, off[k], p.parts[k].dim()));
              if (!part) return std::nullopt;
              h.insert(h.end(), part->begin(), part->end());
            }
            return h;
          },
          [&](const auto&) -> std::optional<Vec<Rational>> {
            std::vector<std::size_t> vars(d);
            std::iota(vars.begin(), vars.end(), 0);
            if (has_ball(set)) {
              LinearProgram<double> lp(d);
              lp.objective = to_doubles(dir);
              std::vector<BallConstraint> balls;
              append_set_rows(lp, set, vars, &balls);
              const auto res = solve_lp_with_cuts(lp, balls);
              if (res.lp.status != LpStatus::optimal) return std::nullopt;
              return to_rationals(res.lp.x);
            }
            LinearProgram<Rational> lp(d);
            lp.objective = dir;
            append_set_rows(lp, set, vars, nullptr);
            const auto res = solve_lp(lp);
            if (res.status != LpStatus::optimal) return std::nullopt;
            return res.x;
          }},
      set.data());
}

namespace {

template <class T>
bool contains_impl(const ConvexSet& set, const Vec<T>& point, const T& tol) {
  const std::size_t d = set.dim();
  if (point.size() != d) throw std::invalid_argument("contains: dimension mismatch");
  auto conv = [](const Rational& r) { return ScalarTraits<T>::from_rational(r); };
  return std::visit(
      Overloaded{[&](const Polyhedron& p) {
                   for (std::size_t r = 0; r < p.a.size(); ++r) {
                     T lhs(0);
                     for (std::size_t j = 0; j < d; ++j) lhs += conv(p.a[r][j]) * point[j];
                     if (lhs > conv(p.b[r]) + tol) return false;
                   }
                   return true;
                 },
                 [&](const Box& b) {
                   for (std::size_t j = 0; j < d; ++j) {
                     if (b.lower[j] && point[j] < conv(*b.lower[j]) - tol) return false;
                     if (b.upper[j] && point[j] > conv(*b.upper[j]) + tol) return false;
                   }
                   return true;
                 },
                 [&](const Ball& b) {
                   double s = 0.0;
                   for (std::size_t j = 0; j < d; ++j) {
                     const double diff = to_double(point[j]) - b.center[j].template convert_to<double>();
                     s += diff * diff;
                   }
                   const double slack = std::max(1e-10, to_double(tol));
                   return std::sqrt(s) <= b.radius.template convert_to<double>() + slack;
                 },
                 [&](const AffineFixed& a) {
                   for (std::size_t j = 0; j < d; ++j)
                     if (a.fixed[j] && abs_value(T(point[j] - conv(*a.fixed[j]))) > tol) return false;
                   return true;
                 },
                 [&](const Singleton& s) {
                   for (std::size_t j = 0; j < d; ++j)
                     if (abs_value(T(point[j] - conv(s.point[j]))) > tol) return false;
                   return true;
                 },
                 [&](const Intersection& i) {
                   return std::all_of(i.parts.begin(), i.parts.end(),
                                      [&](const ConvexSet& p) { return contains_impl(p, point, tol); });
                 },
                 [&](const Product& p) {
                   const auto off = product_offsets(p);
                   for (std::size_t k = 0; k < p.parts.size(); ++k)
                     if (!contains_impl(p.parts[k], slice(point, off[k], p.parts[k].dim()), tol)) return false;
                   return true;
                 }},
      set.data());
}

}  // namespace

bool contains(const ConvexSet& set, const Vec<Rational>& point) { return contains_impl(set, point, Rational(0)); }

bool contains(const ConvexSet& set, const Vec<double>& point, double tol) { return contains_impl(set, point, tol); }

Vec<Rational> interior_witness(const ConvexSet& set) {
  const std::size_t d = set.dim();
  return std::visit(
      Overloaded{[&](const Box& b) {
                   Vec<Rational> h(d);
                   for (std::size_t j = 0; j < d; ++j) {
                     if (b.lower[j] && b.upper[j]) {
                       h[j] = (*b.lower[j] + *b.upper[j]) / 2;
                     } else {
                       Rational v(0);
                       if (b.lower[j] && v < *b.lower[j]) v = *b.lower[j];
                       if (b.upper[j] && v > *b.upper[j]) v = *b.upper[j];
                       h[j] = v;
                     }
                   }
                   return h;
                 },
                 [&](const Ball& b) { return b.center; },
                 [&](const AffineFixed& a) {
                   Vec<Rational> h(d, Rational(0));
                   for (std::size_t j = 0; j < d; ++j)
                     if (a.fixed[j]) h[j] = *a.fixed[j];
                   return h;
                 },
                 [&](const Singleton& s) { return s.point; },
                 [&](const Product& p) {
                   Vec<Rational> h;
                   for (const auto& part : p.parts) {
                     auto w = interior_witness(part);
                     h.insert(h.end(), w.begin(), w.end());
                   }
                   return h;
                 },
                 [&](const auto&) {
                   if (has_ball(set)) {
                     const auto* inter = std::get_if<Intersection>(&set.data());
                     if (inter == nullptr) throw std::logic_error("interior_witness: unexpected variant");
                     return to_rationals(dykstra(inter->parts, Vec<double>(d, 0.0)));
                   }
                   // Largest l-inf ball inside {a h <= b}, radius capped at 1.
                   const Polyhedron poly = to_polyhedron(set);
                   LinearProgram<Rational> lp(d + 1);
                   lp.nonneg[d] = true;
                   lp.objective[d] = 1;
                   for (std::size_t r = 0; r < poly.a.size(); ++r) {
                     Vec<Rational> row(d + 1, Rational(0));
                     Rational l1(0);
                     for (std::size_t j = 0; j < d; ++j) {
                       row[j] = poly.a[r][j];
                       l1 += abs_value(poly.a[r][j]);
                     }
                     row[d] = l1;
                     lp.add_row(std::move(row), RowSense::le, poly.b[r]);
                   }
                   Vec<Rational> cap(d + 1, Rational(0));
                   cap[d] = 1;
                   lp.add_row(cap, RowSense::le, Rational(1));
                   const auto res = solve_lp(lp);
                   if (res.status != LpStatus::optimal) throw InputError("interior_witness: empty set");
                   return Vec<Rational>(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(d));
                 }},
      set.data());
}

Vec<double> project(const ConvexSet& set, const Vec<double>& z) {
  const std::size_t d = set.dim();
  if (z.size() != d) throw std::invalid_argument("project: dimension mismatch");
  return std::visit(
      Overloaded{[&](const Box& b) {
                   Vec<double> h = z;
                   for (std::size_t j = 0; j < d; ++j) {
                     if (b.lower[j]) h[j] = std::max(h[j], b.lower[j]->convert_to<double>());
                     if (b.upper[j]) h[j] = std::min(h[j], b.upper[j]->convert_to<double>());
                   }
                   return h;
                 },
                 [&](const Ball& b) {
                   Vec<double> c = to_doubles(b.center);
                   Vec<double> diff(d);
                   for (std::size_t j = 0; j < d; ++j) diff[j] = z[j] - c[j];
                   const double n = norm2(diff);
                   const double r = b.radius.convert_to<double>();
                   if (n <= r) return z;
                   for (std::size_t j = 0; j < d; ++j) c[j] += diff[j] * r / n;
                   return c;
                 },
                 [&](const AffineFixed& a) {
                   Vec<double> h = z;
                   for (std::size_t j = 0; j < d; ++j)
                     if (a.fixed[j]) h[j] = a.fixed[j]->convert_to<double>();
                   return h;
                 },
                 [&](const Singleton& s) { return to_doubles(s.point); },
                 [&](const Product& p) {
                   const auto off = product_offsets(p);
                   Vec<double> h;
                   for (std::size_t k = 0; k < p.parts.size(); ++k) {
                     auto part = project(p.parts[k], slice(z, off[k], p.parts[k].dim()));
                     h.insert(h.end(), part.begin(), part.end());
                   }
                   return h;
                 },
                 [&](const Intersection& i) {
                   if (has_ball(set)) return dykstra(i.parts, z);
                   const Polyhedron poly = to_polyhedron(set);
                   Matrix<double> a;
                   for (const auto& row : poly.a) a.push_back(to_doubles(row));
                   if (contains(set, z, 0.0)) return z;
                   return project_polyhedron(a, to_doubles(poly.b), z, to_doubles(interior_witness(set)));
                 },
                 [&](const Polyhedron& poly) {
                   if (contains(set, z, 0.0)) return z;
                   Matrix<double> a;
                   for (const auto& row : poly.a) a.push_back(to_doubles(row));
                   return project_polyhedron(a, to_doubles(poly.b), z, to_doubles(interior_witness(set)));
                 }},
      set.data());
}

// --- cones ------------------------------------------------------------------

Cone recession_cone(const ConvexSet& set) {
  const std::size_t d = set.dim();
  Cone cone;
  cone.form = Cone::Form::inequality;
  cone.dim = d;
  auto pin = [&](std::size_t j) {
    cone.rows.push_back(unit_vector(d, j));
    cone.rows.push_back(unit_vector(d, j, -1));
  };
  std::visit(Overloaded{[&](const Polyhedron& p) { cone.rows = p.a; },
                        [&](const Box& b) {
                          for (std::size_t j = 0; j < d; ++j) {
                            if (b.upper[j]) cone.rows.push_back(unit_vector(d, j));
                            if (b.lower[j]) cone.rows.push_back(unit_vector(d, j, -1));
                          }
                        },
                        [&](const Ball&) {
                          for (std::size_t j = 0; j < d; ++j) pin(j);
                        },
                        [&](const AffineFixed& a) {
                          for (std::size_t j = 0; j < d; ++j)
                            if (a.fixed[j]) pin(j);
                        },
                        [&](const Singleton&) {
                          for (std::size_t j = 0; j < d; ++j) pin(j);
                        },
                        [&](const Intersection& i) {
                          for (const auto& p : i.parts) {
                            auto sub = recession_cone(p);
                            cone.rows.insert(cone.rows.end(), sub.rows.begin(), sub.rows.end());
                          }
                        },
                        [&](const Product& p) {
                          const auto off = product_offsets(p);
                          for (std::size_t k = 0; k < p.parts.size(); ++k) {
                            auto sub = recession_cone(p.parts[k]);
                            for (const auto& r : sub.rows) {
                              Vec<Rational> row(d, Rational(0));
                              for (std::size_t j = 0; j < r.size(); ++j) row[off[k] + j] = r[j];
                              cone.rows.push_back(std::move(row));
                            }
                          }
                        }},
             set.data());
  return cone;
}

Cone polar_cone(const Cone& cone) {
  Cone out = cone;
  out.form = cone.form == Cone::Form::inequality ? Cone::Form::generators : Cone::Form::inequality;
  return out;
}

namespace {

Vec<Rational> normalized(Vec<Rational> v) {
  Rational m(0);
  for (const auto& x : v) m = std::max(m, abs_value(x));
  if (m != 0)
    for (auto& x : v) x /= m;
  return v;
}

bool is_zero_vec(const Vec<Rational>& v) {
  return std::all_of(v.begin(), v.end(), [](const Rational& x) { return x == 0; });
}

/// Double description: generators of {h : rows h <= 0}.
Matrix<Rational> double_description(const Matrix<Rational>& rows, std::size_t d) {
  Matrix<Rational> lineality;
  for (std::size_t j = 0; j < d; ++j) lineality.push_back(unit_vector(d, j));
  struct Ray {
    Vec<Rational> v;
    std::set<std::size_t> tight;
  };
  std::vector<Ray> rays;

  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& a = rows[k];
    std::size_t pivot = lineality.size();
    for (std::size_t i = 0; i < lineality.size(); ++i)
      if (dot(a, lineality[i]) != 0) {
        pivot = i;
        break;
      }
    if (pivot < lineality.size()) {
      const Vec<Rational> l0 = lineality[pivot];
      const Rational s0 = dot(a, l0);
      Matrix<Rational> next_lin;
      for (std::size_t i = 0; i < lineality.size(); ++i) {
        if (i == pivot) continue;
        Vec<Rational> l = lineality[i];
        const Rational c = dot(a, l) / s0;
        for (std::size_t j = 0; j < d; ++j) l[j] -= c * l0[j];
        next_lin.push_back(std::move(l));
      }
      for (auto& r : rays) {
        const Rational c = dot(a, r.v) / s0;
        for (std::size_t j = 0; j < d; ++j) r.v[j] -= c * l0[j];
        r.v = normalized(std::move(r.v));
        r.tight.insert(k);
      }
      Ray fresh;
      fresh.v = l0;
      if (s0 > 0)
        for (auto& x : fresh.v) x = -x;
      fresh.v = normalized(std::move(fresh.v));
      for (std::size_t q = 0; q < k; ++q) fresh.tight.insert(q);
      rays.push_back(std::move(fresh));
      lineality = std::move(next_lin);
      continue;
    }
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    std::vector<Rational> val(rays.size());
    for (std::size_t i = 0; i < rays.size(); ++i) {
      val[i] = dot(a, rays[i].v);
      if (val[i] > 0) pos.push_back(i);
      if (val[i] < 0) neg.push_back(i);
    }
    std::vector<Ray> next;
    const std::size_t pointed_dim = d - lineality.size();
    for (std::size_t p : pos) {
      for (std::size_t n : neg) {
        std::set<std::size_t> common;
        std::set_intersection(rays[p].tight.begin(), rays[p].tight.end(), rays[n].tight.begin(), rays[n].tight.end(),
                              std::inserter(common, common.begin()));
        if (pointed_dim >= 2 && common.size() + 2 < pointed_dim) continue;
        bool adjacent = true;
        for (std::size_t r = 0; r < rays.size() && adjacent; ++r) {
          if (r == p || r == n) continue;
          if (std::includes(rays[r].tight.begin(), rays[r].tight.end(), common.begin(), common.end())) adjacent = false;
        }
        if (!adjacent) continue;
        Ray combo;
        combo.v.resize(d);
        for (std::size_t j = 0; j < d; ++j) combo.v[j] = val[p] * rays[n].v[j] - val[n] * rays[p].v[j];
        if (is_zero_vec(combo.v)) continue;
        combo.v = normalized(std::move(combo.v));
        combo.tight = common;
        combo.tight.insert(k);
        next.push_back(std::move(combo));
      }
    }
    for (std::size_t i = 0; i < rays.size(); ++i) {
      if (val[i] > 0) continue;
      Ray r = rays[i];
      if (val[i] == 0) r.tight.insert(k);
      next.push_back(std::move(r));
    }
    rays = std::move(next);
  }
  Matrix<Rational> gens;
  std::set<Vec<Rational>> seen;
  for (const auto& r : rays)
    if (!is_zero_vec(r.v) && seen.insert(r.v).second) gens.push_back(r.v);
  for (const auto& l : lineality) {
    Vec<Rational> n = normalized(l);
    Vec<Rational> m = n;
    for (auto& x : m) x = -x;
    gens.push_back(n);
    gens.push_back(m);
  }
  return gens;
}

}  // namespace

Matrix<Rational> cone_generators(const Cone& cone) {
  if (cone.form == Cone::Form::generators) return cone.rows;
  return double_description(cone.rows, cone.dim);
}

Matrix<Rational> cone_inequalities(const Cone& cone) {
  if (cone.form == Cone::Form::inequality) return cone.rows;
  return double_description(cone.rows, cone.dim);
}

Matrix<Rational> canonical_inequalities(const Cone& cone) {
  const std::size_t d = cone.dim;
  std::set<Vec<Rational>> uniq;
  for (auto row : cone_inequalities(cone)) {
    if (is_zero_vec(row)) continue;
    uniq.insert(normalized(std::move(row)));
  }
  Matrix<Rational> kept(uniq.begin(), uniq.end());
  for (std::size_t i = 0; i < kept.size();) {
    LinearProgram<Rational> lp(d);
    lp.objective = kept[i];
    for (std::size_t r = 0; r < kept.size(); ++r)
      if (r != i) lp.add_row(kept[r], RowSense::le, Rational(0));
    lp.add_row(kept[i], RowSense::le, Rational(1));
    const auto res = solve_lp(lp);
    const bool redundant = res.status == LpStatus::optimal && res.objective <= 0;
    if (redundant) {
      kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

bool cone_contains(const Cone& cone, const Vec<Rational>& v) {
  if (v.size() != cone.dim) throw std::invalid_argument("cone_contains: dimension mismatch");
  if (cone.form == Cone::Form::inequality) {
    return std::all_of(cone.rows.begin(), cone.rows.end(), [&](const Vec<Rational>& r) { return dot(r, v) <= 0; });
  }
  if (is_zero_vec(v)) return true;
  LinearProgram<Rational> lp(0);
  for (std::size_t i = 0; i < cone.rows.size(); ++i) lp.add_var(true);
  for (std::size_t j = 0; j < cone.dim; ++j) {
    Vec<Rational> row(cone.rows.size());
    for (std::size_t i = 0; i < cone.rows.size(); ++i) row[i] = cone.rows[i][j];
    lp.add_row(std::move(row), RowSense::eq, v[j]);
  }
  return solve_lp(lp).status == LpStatus::optimal;
}

bool cone_equal(const Cone& a, const Cone& b) {
  if (a.dim != b.dim) return false;
  for (const auto& g : cone_generators(a))
    if (!cone_contains(b, g)) return false;
  for (const auto& g : cone_generators(b))
    if (!cone_contains(a, g)) return false;
  return true;
}

// --- projections and linear solves -----------------------------------------

template <class T>
ProjectionMatrix<T> predictable_range_projection(const Matrix<T>& increments, std::size_t dim) {
  ProjectionMatrix<T> out;
  for (const auto& v : increments) {
    if (v.size() != dim) throw std::invalid_argument("predictable_range_projection: dimension mismatch");
    Vec<T> w = v;
    // Two Gram-Schmidt sweeps; the second only matters in floating point.
    for (int sweep = 0; sweep < (ScalarTraits<T>::exact ? 1 : 2); ++sweep) {
      for (const auto& u : out.basis) {
        const T c = dot(w, u) / dot(u, u);
        for (std::size_t j = 0; j < dim; ++j) w[j] -= c * u[j];
      }
    }
    bool keep = false;
    if constexpr (ScalarTraits<T>::exact) {
      keep = std::any_of(w.begin(), w.end(), [](const T& x) { return x != 0; });
    } else {
      keep = norm2(w) > 1e-12 * std::max(1.0, norm2(v));
    }
    if (keep) out.basis.push_back(std::move(w));
  }
  out.entries.assign(dim, Vec<T>(dim, T(0)));
  for (const auto& u : out.basis) {
    const T uu = dot(u, u);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) out.entries[i][j] += u[i] * u[j] / uu;
  }
  return out;
}

template ProjectionMatrix<double> predictable_range_projection<double>(const Matrix<double>&, std::size_t);
template ProjectionMatrix<Rational> predictable_range_projection<Rational>(const Matrix<Rational>&, std::size_t);

ClosednessResult projected_set_closed(const ProjectionMatrix<double>& projection, const ConvexSet& set) {
  const std::size_t d = set.dim();
  if (projection.rank() == d) return {Verdict::yes, "projection is the identity; the set is closed"};
  if (projection.rank() == 0) return {Verdict::yes, "projection is zero; the image is a single point"};
  if (is_polyhedral(set)) return {Verdict::yes, "polyhedral set; linear images of polyhedra are polyhedra"};
  if (is_bounded(set)) return {Verdict::yes, "compact set; linear images of compact sets are compact"};
  if (const auto* p = std::get_if<Product>(&set.data())) {
    const bool each = std::all_of(p->parts.begin(), p->parts.end(),
                                  [](const ConvexSet& s) { return is_polyhedral(s) || is_bounded(s); });
    if (each) return {Verdict::yes, "product of polyhedral and compact factors; image is polyhedron plus compact"};
  }
  return {Verdict::unknown, "no sufficient closedness criterion applies to this " + set.type_name()};
}

template <class T>
Vec<T> min_norm_solution(const Matrix<T>& m, std::size_t cols, const Vec<T>& target) {
  if (m.size() != target.size()) throw std::invalid_argument("min_norm_solution: dimension mismatch");
  const auto ech = row_echelon(m, cols);
  const std::size_t r = ech.pivots.size();
  Vec<T> x(cols, T(0));
  if (r == 0) return x;
  // M = F G with F = pivot columns of M and G = nonzero rows of the RREF.
  const Matrix<T>& g = ech.reduced;
  Matrix<T> f(m.size(), Vec<T>(r));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t k = 0; k < r; ++k) f[i][k] = m[i][ech.pivots[k]];
  Matrix<T> ftf(r, Vec<T>(r, T(0)));
  Matrix<T> ggt(r, Vec<T>(r, T(0)));
  Vec<T> ft_t(r, T(0));
  for (std::size_t a = 0; a < r; ++a) {
    for (std::size_t b = 0; b < r; ++b) {
      for (std::size_t i = 0; i < m.size(); ++i) ftf[a][b] += f[i][a] * f[i][b];
      for (std::size_t j = 0; j < cols; ++j) ggt[a][b] += g[a][j] * g[b][j];
    }
    for (std::size_t i = 0; i < m.size(); ++i) ft_t[a] += f[i][a] * target[i];
  }
  const Vec<T> w = solve_square(ggt, solve_square(ftf, ft_t));
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t a = 0; a < r; ++a) x[j] += g[a][j] * w[a];
  return x;
}

template Vec<double> min_norm_solution<double>(const Matrix<double>&, std::size_t, const Vec<double>&);
template Vec<Rational> min_norm_solution<Rational>(const Matrix<Rational>&, std::size_t, const Vec<Rational>&);

}  // namespace condual
