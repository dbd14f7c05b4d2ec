#include "condual/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "condual/linear_algebra.hpp"

namespace condual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class T>
struct LinTerm {
  std::size_t var;
  T coeff;
};
template <class T>
using LinExpr = std::vector<LinTerm<T>>;

struct BallTerm {
  std::vector<LinExpr<double>> beta;
  Vec<double> center;
  double radius;
};

/// alpha(Q) = min { cost.z : equalities, z >= 0 on nonneg vars } + ball
/// terms, where the first `leaves` variables are Q itself. This is the LP
/// dual of the support function of the feasible holding set evaluated at
/// the node drifts beta_n(Q).
template <class T>
struct SupportModel {
  std::size_t leaves = 0;
  std::vector<bool> nonneg;
  std::vector<std::pair<LinExpr<T>, T>> equalities;
  Vec<T> cost;
  std::vector<BallTerm> balls;

  std::size_t size() const { return nonneg.size(); }
  std::size_t add_var(bool nn) {
    nonneg.push_back(nn);
    cost.push_back(T(0));
    return nonneg.size() - 1;
  }
  Vec<T> dense(const LinExpr<T>& e, std::size_t width) const {
    Vec<T> row(width, T(0));
    for (const auto& t : e) row[t.var] += t.coeff;
    return row;
  }
};

/// Rows of a nonempty polyhedron that hold with equality on all of it.
std::vector<bool> implicit_equalities(const Polyhedron& poly, std::size_t dim) {
  std::vector<bool> tight(poly.a.size(), false);
  for (std::size_t r = 0; r < poly.a.size(); ++r) {
    LinearProgram<Rational> lp(dim);
    for (std::size_t j = 0; j < dim; ++j) lp.objective[j] = -poly.a[r][j];
    for (std::size_t k = 0; k < poly.a.size(); ++k) lp.add_row(poly.a[k], RowSense::le, poly.b[k]);
    const auto res = solve_lp(lp);
    tight[r] = res.status == LpStatus::optimal && -res.objective == poly.b[r];
  }
  return tight;
}

template <class T>
void build_support(SupportModel<T>& model, const ConvexSet& set, const std::vector<LinExpr<T>>& beta) {
  auto conv = [](const Rational& r) { return ScalarTraits<T>::from_rational(r); };
  const std::size_t d = set.dim();
  if (const auto* prod = std::get_if<Product>(&set.data())) {
    std::size_t off = 0;
    for (const auto& part : prod->parts) {
      std::vector<LinExpr<T>> sub(beta.begin() + static_cast<std::ptrdiff_t>(off),
                                  beta.begin() + static_cast<std::ptrdiff_t>(off + part.dim()));
      build_support(model, part, sub);
      off += part.dim();
    }
    return;
  }
  if (is_polyhedral(set)) {
    const Polyhedron poly = to_polyhedron(set);
    // Rows tight on the whole set get free multipliers so that the
    // multiplier set has no zero-cost recession direction.
    const std::vector<bool> tight = implicit_equalities(poly, d);
    std::vector<std::size_t> lam;
    for (std::size_t r = 0; r < poly.a.size(); ++r) {
      lam.push_back(model.add_var(!tight[r]));
      model.cost[lam.back()] = conv(poly.b[r]);
    }
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr<T> e;
      for (std::size_t r = 0; r < poly.a.size(); ++r)
        if (poly.a[r][j] != 0) e.push_back({lam[r], conv(poly.a[r][j])});
      for (const auto& t : beta[j]) e.push_back({t.var, T(-t.coeff)});
      model.equalities.push_back({std::move(e), T(0)});
    }
    return;
  }
  if (const auto* ball = std::get_if<Ball>(&set.data())) {
    if constexpr (ScalarTraits<T>::exact) {
      throw UnsupportedError("ball constraints are not available in exact arithmetic");
    } else {
      BallTerm term{beta, convert_vec<double>(ball->center), ball->radius.convert_to<double>()};
      for (std::size_t j = 0; j < d; ++j)
        for (const auto& t : beta[j]) model.cost[t.var] += term.center[j] * t.coeff;
      model.balls.push_back(std::move(term));
    }
    return;
  }
  if (const auto* inter = std::get_if<Intersection>(&set.data())) {
    // Support of an intersection as the infimal convolution of the members'.
    std::vector<LinExpr<T>> sum(d);
    for (const auto& part : inter->parts) {
      std::vector<LinExpr<T>> w(d);
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t v = model.add_var(false);
        w[j].push_back({v, T(1)});
        sum[j].push_back({v, T(1)});
      }
      build_support(model, part, w);
    }
    for (std::size_t j = 0; j < d; ++j) {
      LinExpr<T> e = sum[j];
      for (const auto& t : beta[j]) e.push_back({t.var, T(-t.coeff)});
      model.equalities.push_back({std::move(e), T(0)});
    }
    return;
  }
  throw std::logic_error("build_support: unexpected set variant");
}

template <class T>
SupportModel<T> support_model(const MarketModel& market) {
  SupportModel<T> model;
  const auto& tree = market.tree();
  model.leaves = tree.leaves().size();
  for (std::size_t l = 0; l < model.leaves; ++l) model.add_var(true);
  const PortfolioLayout layout(market);
  std::vector<LinExpr<T>> beta(layout.size);
  for (NodeId n : tree.internal_nodes()) {
    for (NodeId c : tree.node(n).children) {
      for (std::size_t j = 0; j < market.dim(); ++j) {
        const Rational& inc = market.increment(c)[j];
        if (inc == 0) continue;
        for (std::size_t l : tree.leaves_below(c))
          beta[*layout.offset[n] + j].push_back({l, ScalarTraits<T>::from_rational(inc)});
      }
    }
  }
  build_support(model, feasible_holdings(market), beta);
  return model;
}

/// Gaussian elimination with partial pivoting; nullopt on an exactly
/// singular pivot. Barrier systems are badly scaled, so no relative cutoff.
std::optional<Vec<double>> solve_kkt(Matrix<double> a, Vec<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t best = c;
    for (std::size_t i = c + 1; i < n; ++i)
      if (std::abs(a[i][c]) > std::abs(a[best][c])) best = i;
    if (a[best][c] == 0.0) return std::nullopt;
    std::swap(a[c], a[best]);
    std::swap(b[c], b[best]);
    for (std::size_t i = c + 1; i < n; ++i) {
      const double f = a[i][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t j = c; j < n; ++j) a[i][j] -= f * a[c][j];
      b[i] -= f * b[c];
    }
  }
  Vec<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
    if (!std::isfinite(x[i])) return std::nullopt;
  }
  return x;
}

double eval_expr(const LinExpr<double>& e, const Vec<double>& z) {
  double s = 0.0;
  for (const auto& t : e) s += t.coeff * z[t.var];
  return s;
}

/// maximize lead.Q - weight * alpha(Q) over probabilities Q. Ball terms are
/// handled by tangent cuts on auxiliary norm variables.
template <class T>
struct AlphaLpResult {
  LpStatus status = LpStatus::infeasible;
  T objective{0};
  Vec<T> z;
};

template <class T>
AlphaLpResult<T> maximize_lead_minus_alpha(const SupportModel<T>& model, const Vec<T>& lead) {
  const std::size_t n = model.size();
  LinearProgram<T> lp(n);
  for (std::size_t i = 0; i < n; ++i) {
    lp.nonneg[i] = model.nonneg[i];
    lp.objective[i] = (i < model.leaves ? lead[i] : T(0)) - model.cost[i];
  }
  Vec<T> simplex(n, T(0));
  for (std::size_t l = 0; l < model.leaves; ++l) simplex[l] = T(1);
  lp.add_row(simplex, RowSense::eq, T(1));
  for (const auto& [e, rhs] : model.equalities) lp.add_row(model.dense(e, n), RowSense::eq, rhs);
  AlphaLpResult<T> out;
  if constexpr (ScalarTraits<T>::exact) {
    if (!model.balls.empty()) throw UnsupportedError("ball constraints are not available in exact arithmetic");
    const auto res = solve_lp(lp);
    out.status = res.status;
    out.objective = res.objective;
    out.z = res.x;
    return out;
  } else {
    std::vector<std::size_t> tau;
    for (const auto& b : model.balls) {
      tau.push_back(lp.add_var(true, -b.radius));
      // Initial cuts tau >= |beta_k|.
      for (std::size_t k = 0; k < b.beta.size(); ++k) {
        for (int sign : {1, -1}) {
          Vec<double> row(lp.num_vars(), 0.0);
          for (const auto& t : b.beta[k]) row[t.var] += sign * t.coeff;
          row[tau.back()] = -1.0;
          lp.add_row(std::move(row), RowSense::le, 0.0);
        }
      }
    }
    for (int round = 0; round < 2000; ++round) {
      const auto res = solve_lp(lp);
      out.status = res.status;
      out.objective = res.objective;
      out.z = res.x;
      if (res.status != LpStatus::optimal || model.balls.empty()) return out;
      bool cut = false;
      for (std::size_t bi = 0; bi < model.balls.size(); ++bi) {
        const auto& b = model.balls[bi];
        Vec<double> beta;
        for (const auto& e : b.beta) beta.push_back(eval_expr(e, res.x));
        const double nb = norm2(beta);
        if (nb <= res.x[tau[bi]] + 1e-12 * (1.0 + nb)) continue;
        Vec<double> row(lp.num_vars(), 0.0);
        for (std::size_t k = 0; k < beta.size(); ++k)
          for (const auto& t : b.beta[k]) row[t.var] += beta[k] / nb * t.coeff;
        row[tau[bi]] = -1.0;
        lp.add_row(std::move(row), RowSense::le, 0.0);
        cut = true;
      }
      if (!cut) break;
    }
    out.z.resize(n);
    return out;
  }
}

double alpha_of(const SupportModel<double>& model, const Vec<double>& z) {
  double a = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) a += model.cost[i] * z[i];
  for (const auto& b : model.balls) {
    Vec<double> beta;
    for (const auto& e : b.beta) beta.push_back(eval_expr(e, z));
    a += b.radius * norm2(beta);
  }
  return a;
}

/// Barrier method for the smooth-utility dual over the support model.
class DualBarrier {
 public:
  DualBarrier(const MarketModel& market, const UtilityFunction& u, double y, const SupportModel<double>& model)
      : market_(market), u_(u), y_(y), model_(model), n_(model.size()) {}

  /// Returns false when alpha = +inf on the whole simplex.
  bool prepare(bool& forced_leaf) {
    fixed_.assign(n_, false);
    for (int round = 0; round < 4; ++round) {
      const auto interior = phase_one();
      if (!interior) return false;
      if (interior->second > 1e-9) {
        z_ = interior->first;
        break;
      }
      // Some nonnegative variable vanishes on the whole feasible face.
      for (std::size_t i = 0; i < n_; ++i) {
        if (!model_.nonneg[i] || fixed_[i]) continue;
        if (!can_be_positive(i)) {
          fixed_[i] = true;
          if (i < model_.leaves) forced_leaf = true;
        }
      }
      if (forced_leaf) return true;
    }
    if (z_.empty()) return false;
    for (std::size_t i = 0; i < n_; ++i)
      if (fixed_[i]) z_[i] = 0.0;
    reduce_equalities();
    return true;
  }

  /// Follows the central path until the barrier gap drops below target.
  void run(double target) {
    std::size_t barrier_vars = 0;
    for (std::size_t i = 0; i < n_; ++i)
      if (model_.nonneg[i] && !fixed_[i]) ++barrier_vars;
    double t = 1.0;
    for (int outer = 0; outer < 40; ++outer) {
      mu_ = std::min(1e-3, 1.0 / t);
      centre(t);
      if (static_cast<double>(barrier_vars) / t <= target) break;
      t *= 10.0;
    }
    mu_ = std::min(1e-3, 1.0 / t);
  }

  const Vec<double>& z() const { return z_; }
  double mu() const { return mu_; }
  int steps() const { return steps_; }
  const std::vector<bool>& fixed() const { return fixed_; }

  /// J_mu(z) and its gradient (no barrier).
  double smoothed_value(const Vec<double>& z, Vec<double>* grad) const {
    double val = 0.0;
    if (grad) grad->assign(n_, 0.0);
    for (std::size_t l = 0; l < model_.leaves; ++l) {
      const double p = market_.tree().path_prob_d(l);
      const double arg = y_ * z[l] / p;
      const ExtReal v = u_.conjugate(std::max(arg, 0.0));
      if (!v.is_finite()) return kInf;
      val += p * v.value();
      if (grad && arg > 0) (*grad)[l] += y_ * u_.conjugate_derivative(arg);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      val += y_ * model_.cost[i] * z[i];
      if (grad) (*grad)[i] += y_ * model_.cost[i];
    }
    for (const auto& b : model_.balls) {
      Vec<double> beta;
      for (const auto& e : b.beta) beta.push_back(eval_expr(e, z));
      const double s = std::sqrt(dot(beta, beta) + mu_ * mu_);
      val += y_ * b.radius * s;
      if (grad)
        for (std::size_t k = 0; k < beta.size(); ++k)
          for (const auto& t : b.beta[k]) (*grad)[t.var] += y_ * b.radius * beta[k] / s * t.coeff;
    }
    return val;
  }

 private:
  std::optional<std::pair<Vec<double>, double>> phase_one() const {
    LinearProgram<double> lp(n_ + 1);
    for (std::size_t i = 0; i < n_; ++i) lp.nonneg[i] = model_.nonneg[i];
    lp.objective[n_] = 1.0;
    add_feasibility_rows(lp);
    for (std::size_t i = 0; i < n_; ++i) {
      if (!model_.nonneg[i] || fixed_[i]) continue;
      Vec<double> row(n_ + 1, 0.0);
      row[n_] = 1.0;
      row[i] = -1.0;
      lp.add_row(std::move(row), RowSense::le, 0.0);
    }
    Vec<double> cap(n_ + 1, 0.0);
    cap[n_] = 1.0;
    lp.add_row(std::move(cap), RowSense::le, 1.0);
    const auto res = solve_lp(lp);
    if (res.status != LpStatus::optimal) return std::nullopt;
    return std::make_pair(Vec<double>(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(n_)), res.objective);
  }

  bool can_be_positive(std::size_t i) const {
    LinearProgram<double> lp(n_);
    for (std::size_t k = 0; k < n_; ++k) lp.nonneg[k] = model_.nonneg[k];
    lp.objective[i] = 1.0;
    add_feasibility_rows(lp);
    Vec<double> cap(n_, 0.0);
    cap[i] = 1.0;
    lp.add_row(std::move(cap), RowSense::le, 1.0);
    const auto res = solve_lp(lp);
    return res.status == LpStatus::optimal && res.objective > 1e-9;
  }

  void add_feasibility_rows(LinearProgram<double>& lp) const {
    const std::size_t w = lp.num_vars();
    Vec<double> simplex(w, 0.0);
    for (std::size_t l = 0; l < model_.leaves; ++l) simplex[l] = 1.0;
    lp.add_row(simplex, RowSense::eq, 1.0);
    for (const auto& [e, rhs] : model_.equalities) lp.add_row(model_.dense(e, w), RowSense::eq, rhs);
    for (std::size_t i = 0; i < n_; ++i) {
      if (!fixed_[i]) continue;
      Vec<double> row(w, 0.0);
      row[i] = 1.0;
      lp.add_row(std::move(row), RowSense::eq, 0.0);
    }
  }

  void reduce_equalities() {
    active_.clear();
    for (std::size_t i = 0; i < n_; ++i)
      if (!fixed_[i]) active_.push_back(i);
    const std::size_t na = active_.size();
    Matrix<double> rows;
    Vec<double> simplex(na + 1, 0.0);
    for (std::size_t k = 0; k < na; ++k)
      if (active_[k] < model_.leaves) simplex[k] = 1.0;
    simplex[na] = 1.0;
    rows.push_back(simplex);
    for (const auto& [e, rhs] : model_.equalities) {
      const Vec<double> full = model_.dense(e, n_);
      Vec<double> row(na + 1, 0.0);
      for (std::size_t k = 0; k < na; ++k) row[k] = full[active_[k]];
      row[na] = rhs;
      rows.push_back(std::move(row));
    }
    const auto ech = row_echelon(rows, na + 1);
    eq_.clear();
    for (std::size_t r = 0; r < ech.reduced.size(); ++r)
      if (ech.pivots[r] < na) eq_.push_back(Vec<double>(ech.reduced[r].begin(), ech.reduced[r].begin() + static_cast<std::ptrdiff_t>(na)));
  }

  double barrier_value(const Vec<double>& z, double t) const {
    const double j = smoothed_value(z, nullptr);
    if (!std::isfinite(j)) return kInf;
    double b = 0.0;
    for (std::size_t i : active_) {
      if (!model_.nonneg[i]) continue;
      if (z[i] <= 0) return kInf;
      b -= std::log(z[i]);
    }
    return j + b / t;
  }

  void centre(double t) {
    const std::size_t na = active_.size();
    const std::size_t m = eq_.size();
    int small_steps = 0;
    for (int it = 0; it < 100; ++it) {
      Vec<double> grad;
      const double f0 = smoothed_value(z_, &grad);
      if (!std::isfinite(f0)) return;
      // Hessian of J_mu plus barrier, on the active variables.
      Matrix<double> kkt(na + m, Vec<double>(na + m, 0.0));
      Vec<double> rhs(na + m, 0.0);
      std::vector<std::ptrdiff_t> pos(n_, -1);
      for (std::size_t k = 0; k < na; ++k) pos[active_[k]] = static_cast<std::ptrdiff_t>(k);
      for (std::size_t k = 0; k < na; ++k) {
        const std::size_t i = active_[k];
        double g = grad[i];
        if (i < model_.leaves) {
          const double p = market_.tree().path_prob_d(i);
          kkt[k][k] += y_ * y_ / p * u_.conjugate_second_derivative(y_ * z_[i] / p);
        }
        if (model_.nonneg[i]) {
          g -= 1.0 / (t * z_[i]);
          kkt[k][k] += 1.0 / (t * z_[i] * z_[i]);
        }
        rhs[k] = -g;
      }
      for (const auto& b : model_.balls) {
        Vec<double> beta;
        for (const auto& e : b.beta) beta.push_back(eval_expr(e, z_));
        const double s = std::sqrt(dot(beta, beta) + mu_ * mu_);
        const double scale = y_ * b.radius;
        // d^2 s = (I / s - beta beta' / s^3) composed with the linear map.
        for (std::size_t a = 0; a < beta.size(); ++a) {
          for (std::size_t c = 0; c < beta.size(); ++c) {
            const double h = scale * ((a == c ? 1.0 / s : 0.0) - beta[a] * beta[c] / (s * s * s));
            if (h == 0.0) continue;
            for (const auto& ta : b.beta[a])
              for (const auto& tc : b.beta[c]) {
                if (pos[ta.var] < 0 || pos[tc.var] < 0) continue;
                kkt[static_cast<std::size_t>(pos[ta.var])][static_cast<std::size_t>(pos[tc.var])] += h * ta.coeff * tc.coeff;
              }
          }
        }
      }
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t k = 0; k < na; ++k) {
          kkt[na + r][k] = eq_[r][k];
          kkt[k][na + r] = eq_[r][k];
        }
      // Free variables without curvature get a small proximal term.
      double diag = 0.0;
      for (std::size_t k = 0; k < na; ++k) diag = std::max(diag, kkt[k][k]);
      for (std::size_t k = 0; k < na; ++k)
        if (kkt[k][k] == 0.0) kkt[k][k] = 1e-10 * std::max(1.0, diag);
      const auto solved = solve_kkt(kkt, rhs);
      if (!solved) return;
      const Vec<double>& sol = *solved;
      Vec<double> dz(n_, 0.0);
      double decrement = 0.0;
      for (std::size_t k = 0; k < na; ++k) {
        dz[active_[k]] = sol[k];
        decrement -= rhs[k] * sol[k];
      }
      decrement = -decrement;  // = -g.dz >= 0
      decrement = std::abs(decrement);
      if (decrement <= 1e-30 || small_steps >= 3) return;
      double step = 1.0;
      for (std::size_t i : active_)
        if (model_.nonneg[i] && dz[i] < 0) step = std::min(step, -0.99 * z_[i] / dz[i]);
      if (decrement < 1e-12) {
        // Inside the quadratic region the merit test drowns in rounding.
        for (std::size_t i = 0; i < n_; ++i) z_[i] += step * dz[i];
        ++small_steps;
        ++steps_;
        continue;
      }
      const double fb = barrier_value(z_, t);
      Vec<double> trial(n_);
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
        for (std::size_t i = 0; i < n_; ++i) trial[i] = z_[i] + step * dz[i];
        const double ft = barrier_value(trial, t);
        if (ft <= fb - 0.25 * step * decrement) {
          z_ = trial;
          moved = true;
          break;
        }
      }
      ++steps_;
      if (!moved) return;
    }
  }

  const MarketModel& market_;
  const UtilityFunction& u_;
  double y_;
  const SupportModel<double>& model_;
  std::size_t n_;
  std::vector<bool> fixed_;
  std::vector<std::size_t> active_;
  Matrix<double> eq_;
  Vec<double> z_;
  double mu_ = 1e-3;
  int steps_ = 0;
};

template <class T>
DualSolution piecewise_dual(const MarketModel& market, const UtilityFunction& u, double y) {
  auto conv = [](double v) {
    if constexpr (ScalarTraits<T>::exact) {
      return rational_from_double(v);
    } else {
      return v;
    }
  };
  const SupportModel<T> model = support_model<T>(market);
  if (!model.balls.empty()) throw UnsupportedError("piecewise utilities with ball constraints in the dual");
  const std::size_t n = model.size();
  const std::size_t leaves = model.leaves;
  const T yt = conv(y);
  LinearProgram<T> lp(n);
  for (std::size_t i = 0; i < n; ++i) {
    lp.nonneg[i] = model.nonneg[i];
    lp.objective[i] = -yt * model.cost[i];
  }
  Vec<T> simplex(n, T(0));
  for (std::size_t l = 0; l < leaves; ++l) simplex[l] = T(1);
  lp.add_row(simplex, RowSense::eq, T(1));
  for (const auto& [e, rhs] : model.equalities) lp.add_row(model.dense(e, n), RowSense::eq, rhs);
  std::vector<std::size_t> tau;
  for (std::size_t l = 0; l < leaves; ++l) {
    T prob;
    if constexpr (ScalarTraits<T>::exact) {
      prob = market.tree().path_prob(l);
    } else {
      prob = market.tree().path_prob_d(l);
    }
    tau.push_back(lp.add_var(false, T(-prob)));
  }
  const auto& knots = u.knots();
  const auto& vals = u.knot_values();
  for (std::size_t l = 0; l < leaves; ++l) {
    T prob;
    if constexpr (ScalarTraits<T>::exact) {
      prob = market.tree().path_prob(l);
    } else {
      prob = market.tree().path_prob_d(l);
    }
    for (std::size_t k = 0; k < knots.size(); ++k) {
      // tau_l >= U(k) - k y Q_l / P_l
      Vec<T> row(lp.num_vars(), T(0));
      row[l] = -conv(knots[k]) * yt / prob;
      row[tau[l]] = T(-1);
      lp.add_row(std::move(row), RowSense::le, T(-conv(vals[k])));
    }
    Vec<T> dom(lp.num_vars(), T(0));
    dom[l] = yt / prob;
    lp.add_row(std::move(dom), RowSense::ge, conv(u.slopes().back()));
  }
  const auto res = solve_lp(lp);
  DualSolution sol;
  sol.method = ScalarTraits<T>::exact ? "epigraph-lp-exact" : "epigraph-lp";
  if (res.status == LpStatus::infeasible) {
    sol.status = DualStatus::infinite;
    sol.value = ExtReal::pos_inf();
    return sol;
  }
  if (res.status == LpStatus::unbounded) throw std::logic_error("piecewise dual LP unbounded");
  sol.value = ExtReal(-to_double(res.objective));
  sol.q.resize(leaves);
  for (std::size_t l = 0; l < leaves; ++l) sol.q[l] = to_double(res.x[l]);
  T alpha(0);
  for (std::size_t i = 0; i < n; ++i) alpha += model.cost[i] * res.x[i];
  sol.measure = make_dual_measure(market, sol.q, y, ExtReal(to_double(alpha)));
  sol.attained = true;
  return sol;
}

}  // namespace

DualMeasure make_dual_measure(const MarketModel& market, const Vec<double>& probability, double y,
                              const ExtReal& alpha) {
  DualMeasure m;
  m.mass = y;
  m.alpha = alpha;
  for (std::size_t l = 0; l < probability.size(); ++l) {
    m.weights.push_back(y * probability[l]);
    m.densities.push_back(y * probability[l] / market.tree().path_prob_d(l));
  }
  return m;
}

template <class T>
Extended<T> support_alpha(const MarketModel& market, const Vec<T>& q) {
  const auto& tree = market.tree();
  if (q.size() != tree.leaves().size()) throw std::invalid_argument("support_alpha: leaf count mismatch");
  for (const auto& v : q)
    if (v < T(0)) throw std::invalid_argument("support_alpha: negative leaf weight");
  const Vec<T> w = node_weights(market, q);
  if (!market.floor()) {
    // Separable: alpha is the sum of the node support functions.
    Extended<T> total(T(0));
    for (NodeId n : tree.internal_nodes()) {
      const Vec<T> beta = weighted_drift(market, n, w);
      const Extended<T> s = support_function(market.constraint(n), beta);
      total += s;
    }
    return total;
  }
  const ConvexSet all = feasible_holdings(market);
  const PortfolioLayout layout(market);
  Vec<T> dir(layout.size, T(0));
  for (NodeId n : tree.internal_nodes()) {
    const Vec<T> beta = weighted_drift(market, n, w);
    for (std::size_t j = 0; j < market.dim(); ++j) dir[*layout.offset[n] + j] = beta[j];
  }
  return support_function(all, dir);
}

template Extended<double> support_alpha<double>(const MarketModel&, const Vec<double>&);
template Extended<Rational> support_alpha<Rational>(const MarketModel&, const Vec<Rational>&);

std::string to_string(DualStatus s) {
  switch (s) {
    case DualStatus::optimal: return "optimal";
    case DualStatus::infinite: return "infinite";
    default: return "unsupported";
  }
}

DualSolution solve_dual(const MarketModel& market, const UtilityFunction& u, double y, double tol) {
  if (!(y > 0)) throw std::invalid_argument("solve_dual: y must be positive");
  if (!(tol > 0)) throw std::invalid_argument("solve_dual: tol must be positive");
  if (!u.smooth_strictly_concave()) {
    if (market.exact() && !has_ball_constraint(market)) return piecewise_dual<Rational>(market, u, y);
    return piecewise_dual<double>(market, u, y);
  }
  const SupportModel<double> model = support_model<double>(market);
  DualBarrier barrier(market, u, y, model);
  DualSolution sol;
  sol.method = "barrier-newton";
  bool forced_leaf = false;
  if (!barrier.prepare(forced_leaf) || forced_leaf) {
    // Either alpha is infinite on the simplex, or every finite-alpha
    // measure charges some leaf with zero mass where V(0) = sup U = inf.
    sol.status = DualStatus::infinite;
    sol.value = ExtReal::pos_inf();
    sol.attained = false;
    return sol;
  }
  barrier.run(std::max(1e-13, 1e-4 * tol));
  const Vec<double>& z = barrier.z();
  sol.newton_steps = barrier.steps();
  sol.q.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(model.leaves));
  const double alpha = alpha_of(model, z);
  double value = y * alpha;
  for (std::size_t l = 0; l < model.leaves; ++l) {
    const double p = market.tree().path_prob_d(l);
    value += p * u.conjugate(y * sol.q[l] / p).value();
  }
  sol.value = ExtReal(value);
  sol.measure = make_dual_measure(market, sol.q, y, ExtReal(alpha));

  // Certified lower bound: linearize the conjugate term at q and minimize
  // the linearization plus y alpha exactly (ball norms by cuts from below).
  double conj = 0.0;
  Vec<double> lead(model.leaves);
  for (std::size_t l = 0; l < model.leaves; ++l) {
    const double p = market.tree().path_prob_d(l);
    conj += p * u.conjugate(y * sol.q[l] / p).value();
    lead[l] = -y * u.conjugate_derivative(y * sol.q[l] / p);
  }
  SupportModel<double> lin = model;
  for (auto& c : lin.cost) c *= y;
  for (auto& b : lin.balls) b.radius *= y;
  for (std::size_t i = 0; i < model.size(); ++i)
    if (barrier.fixed()[i]) lin.equalities.push_back({{{i, 1.0}}, 0.0});
  const auto lp = maximize_lead_minus_alpha(lin, lead);
  if (lp.status == LpStatus::optimal) {
    double lq = 0.0;
    for (std::size_t l = 0; l < model.leaves; ++l) lq += lead[l] * sol.q[l];
    const double lower = conj + lq - lp.objective;
    sol.gap = std::max(0.0, value - lower);
  } else {
    sol.gap = kInf;
  }
  sol.attained = sol.gap <= tol;
  return sol;
}

double dual_derivative(const MarketModel& market, const UtilityFunction& u, double y, const DualSolution& sol) {
  if (!sol.value.is_finite()) throw std::invalid_argument("dual_derivative: infinite dual value");
  double d = sol.measure.alpha.value();
  for (std::size_t l = 0; l < sol.q.size(); ++l) {
    if (sol.q[l] <= 0) continue;
    const double p = market.tree().path_prob_d(l);
    d += sol.q[l] * u.conjugate_derivative(y * sol.q[l] / p);
  }
  return d;
}

template <class T>
SuperhedgeResult<T> superhedge_price(const MarketModel& market, const Vec<T>& payoff) {
  const auto& tree = market.tree();
  if (payoff.size() != tree.leaves().size()) throw std::invalid_argument("superhedge_price: payoff size mismatch");
  if constexpr (ScalarTraits<T>::exact) {
    if (has_ball_constraint(market)) {
      // Balls leave exact LPs; solve in floating point and convert.
      const auto approx = superhedge_price<double>(market, to_double_vec(payoff));
      auto back = [](const ExtReal& e) {
        if (e.is_pos_inf()) return Extended<T>::pos_inf();
        if (e.is_neg_inf()) return Extended<T>::neg_inf();
        return Extended<T>(rational_from_double(e.value()));
      };
      SuperhedgeResult<T> out;
      out.price = back(approx.price);
      out.dual_price = back(approx.dual_price);
      out.bound = back(approx.bound);
      for (double v : approx.holdings) out.holdings.push_back(rational_from_double(v));
      for (double v : approx.q) out.q.push_back(rational_from_double(v));
      return out;
    }
  }
  SuperhedgeResult<T> out;
  // Primal: maximize -x subject to x + gains_l >= f_l.
  MarketLp<T> mlp = market_lp<T>(market);
  const std::size_t xv = mlp.lp.add_var(false, T(-1));
  for (std::size_t l = 0; l < tree.leaves().size(); ++l) {
    Vec<T> row = gains_coefficients(market, mlp, tree.leaves()[l]);
    row[xv] = T(1);
    mlp.lp.add_row(std::move(row), RowSense::ge, payoff[l]);
  }
  const auto primal = solve_market_lp(mlp);
  if (primal.status == LpStatus::unbounded) {
    out.price = Extended<T>::neg_inf();
  } else if (primal.status == LpStatus::infeasible) {
    out.price = Extended<T>::pos_inf();
  } else {
    out.price = T(-primal.objective);
    out.holdings.assign(primal.x.begin(), primal.x.begin() + static_cast<std::ptrdiff_t>(mlp.layout.size));
  }
  // Dual: sup over probabilities of E^Q[f] - alpha(Q).
  const SupportModel<T> model = support_model<T>(market);
  const auto dual = maximize_lead_minus_alpha(model, payoff);
  if (dual.status == LpStatus::infeasible) {
    out.dual_price = Extended<T>::neg_inf();
  } else if (dual.status == LpStatus::unbounded) {
    out.dual_price = Extended<T>::pos_inf();
  } else {
    out.dual_price = dual.objective;
    out.q.assign(dual.z.begin(), dual.z.begin() + static_cast<std::ptrdiff_t>(model.leaves));
  }
  const auto zero = min_support<T>(market);
  out.bound = zero.sup_essinf.is_finite() ? Extended<T>(abs_value(zero.sup_essinf.value())) : Extended<T>::pos_inf();
  return out;
}

template SuperhedgeResult<double> superhedge_price<double>(const MarketModel&, const Vec<double>&);
template SuperhedgeResult<Rational> superhedge_price<Rational>(const MarketModel&, const Vec<Rational>&);

template <class T>
MinSupportResult<T> min_support(const MarketModel& market) {
  if constexpr (ScalarTraits<T>::exact) {
    if (has_ball_constraint(market)) {
      const auto approx = min_support<double>(market);
      auto back = [](const ExtReal& e) {
        if (e.is_pos_inf()) return Extended<T>::pos_inf();
        if (e.is_neg_inf()) return Extended<T>::neg_inf();
        return Extended<T>(rational_from_double(e.value()));
      };
      MinSupportResult<T> out;
      out.inf_alpha = back(approx.inf_alpha);
      out.sup_essinf = back(approx.sup_essinf);
      out.xbar = back(approx.xbar);
      for (double v : approx.q) out.q.push_back(rational_from_double(v));
      return out;
    }
  }
  MinSupportResult<T> out;
  const SupportModel<T> model = support_model<T>(market);
  const auto lp = maximize_lead_minus_alpha(model, Vec<T>(model.leaves, T(0)));
  if (lp.status == LpStatus::infeasible) {
    out.inf_alpha = Extended<T>::pos_inf();
  } else if (lp.status == LpStatus::unbounded) {
    out.inf_alpha = Extended<T>::neg_inf();
  } else {
    out.inf_alpha = T(-lp.objective);
    out.q.assign(lp.z.begin(), lp.z.begin() + static_cast<std::ptrdiff_t>(model.leaves));
  }
  out.xbar = -out.inf_alpha;
  out.sup_essinf = maximin_gain<T>(market).value;
  return out;
}

template MinSupportResult<double> min_support<double>(const MarketModel&);
template MinSupportResult<Rational> min_support<Rational>(const MarketModel&);

}  // namespace condual
