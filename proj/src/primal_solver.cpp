#include "condual/primal_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace condual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Objective {
  const MarketModel& market;
  const UtilityFunction& u;
  const PortfolioLayout& layout;
  double x;
  double margin;

  /// Expected utility; -inf outside the domain margin.
  double value(const Vec<double>& flat, Vec<double>* terminal = nullptr) const {
    const Vec<double> g = leaf_gains(market, layout, flat);
    double total = 0.0;
    for (std::size_t l = 0; l < g.size(); ++l) {
      const double f = x + g[l];
      if (terminal) terminal->push_back(f);
      if (f <= margin && u.minus_infinite_at_zero()) return -kInf;
      if (f < 0) return -kInf;
      total += market.tree().path_prob_d(l) * u.value(f).value();
    }
    return total;
  }

  /// Gradient with respect to the flat holdings (f > 0 on all leaves).
  Vec<double> gradient(const Vec<double>& flat) const {
    const auto& tree = market.tree();
    const Vec<double> g = leaf_gains(market, layout, flat);
    Vec<double> mass(tree.size(), 0.0);
    for (std::size_t l = 0; l < g.size(); ++l)
      mass[tree.leaves()[l]] = tree.path_prob_d(l) * u.derivative(std::max(x + g[l], margin));
    for (NodeId n = tree.size(); n-- > 1;) mass[*tree.node(n).parent] += mass[n];
    Vec<double> grad(layout.size, 0.0);
    for (NodeId n = 1; n < tree.size(); ++n) {
      const NodeId p = *tree.node(n).parent;
      for (std::size_t j = 0; j < market.dim(); ++j) grad[*layout.offset[p] + j] += mass[n] * market.increment_d(n)[j];
    }
    return grad;
  }
};

void finish(PrimalSolution& sol, const MarketModel& market, const UtilityFunction& u, const PortfolioLayout& layout,
            const Vec<double>& flat, double x) {
  sol.holdings = layout.unflatten(flat);
  sol.terminal.clear();
  const Vec<double> g = leaf_gains(market, layout, flat);
  double total = 0.0;
  bool minus_inf = false;
  for (std::size_t l = 0; l < g.size(); ++l) {
    const double f = x + g[l];
    sol.terminal.push_back(f);
    const ExtReal uf = u.value(std::max(f, 0.0));
    if (!uf.is_finite()) {
      minus_inf = true;
    } else {
      total += market.tree().path_prob_d(l) * uf.value();
    }
  }
  sol.value = minus_inf ? ExtReal::neg_inf() : ExtReal(total);
}

template <class T>
PrimalSolution piecewise_lp(const MarketModel& market, const UtilityFunction& u, double x) {
  auto conv = [](double v) {
    if constexpr (ScalarTraits<T>::exact) {
      return rational_from_double(v);
    } else {
      return v;
    }
  };
  MarketLp<T> mlp = market_lp<T>(market);
  const auto& tree = market.tree();
  const T xt = conv(x);
  std::vector<Vec<T>> gains;
  for (NodeId leaf : tree.leaves()) gains.push_back(gains_coefficients(market, mlp, leaf));
  std::vector<std::size_t> tvar;
  for (std::size_t l = 0; l < gains.size(); ++l) {
    T prob;
    if constexpr (ScalarTraits<T>::exact) {
      prob = tree.path_prob(l);
    } else {
      prob = tree.path_prob_d(l);
    }
    tvar.push_back(mlp.lp.add_var(false, prob));
  }
  const auto& knots = u.knots();
  const auto& vals = u.knot_values();
  const auto& slopes = u.slopes();
  for (std::size_t l = 0; l < gains.size(); ++l) {
    Vec<T> g = gains[l];
    g.resize(mlp.lp.num_vars(), T(0));
    for (std::size_t k = 0; k < knots.size(); ++k) {
      // t_l <= U(knot_k) + slope_k (x + gains - knot_k)
      const T s = conv(slopes[k]);
      Vec<T> row(mlp.lp.num_vars(), T(0));
      for (std::size_t j = 0; j < g.size(); ++j) row[j] = -s * g[j];
      row[tvar[l]] = T(1);
      mlp.lp.add_row(std::move(row), RowSense::le, T(conv(vals[k]) + s * (xt - conv(knots[k]))));
    }
    Vec<T> dom(mlp.lp.num_vars(), T(0));
    for (std::size_t j = 0; j < g.size(); ++j) dom[j] = -g[j];
    mlp.lp.add_row(std::move(dom), RowSense::le, xt);
  }
  const auto res = solve_market_lp(mlp);
  PrimalSolution sol;
  sol.method = ScalarTraits<T>::exact ? "hypograph-lp-exact" : "hypograph-lp";
  const PortfolioLayout& layout = mlp.layout;
  if (res.status == LpStatus::infeasible) {
    sol.status = PrimalStatus::infeasible;
    return sol;
  }
  if (res.status == LpStatus::unbounded) {
    sol.status = PrimalStatus::unbounded;
    sol.value = ExtReal::pos_inf();
    return sol;
  }
  Vec<double> flat(layout.size);
  for (std::size_t j = 0; j < layout.size; ++j) flat[j] = to_double(res.x[j]);
  sol.status = PrimalStatus::optimal;
  finish(sol, market, u, layout, flat, x);
  return sol;
}

}  // namespace

std::string to_string(PrimalStatus s) {
  switch (s) {
    case PrimalStatus::optimal: return "optimal";
    case PrimalStatus::unbounded: return "unbounded";
    case PrimalStatus::infeasible: return "infeasible";
    default: return "max-iterations";
  }
}

PrimalSolution solve_primal(const MarketModel& market, const UtilityFunction& u, double x, double tol,
                            const PrimalOptions& options) {
  if (!(tol > 0)) throw std::invalid_argument("solve_primal: tol must be positive");
  if (!std::isfinite(x)) throw std::invalid_argument("solve_primal: x must be finite");
  const PortfolioLayout layout(market);
  PrimalSolution sol;

  const MaximinGain<double> start = maximin_gain<double>(market);
  if (start.value.is_neg_inf()) {
    sol.method = "maximin-lp";
    return sol;
  }
  if (!u.bounded_above() && improving_recession_direction(market)) {
    sol.status = PrimalStatus::unbounded;
    sol.value = ExtReal::pos_inf();
    sol.method = "recession-lp";
    return sol;
  }
  if (start.value.is_finite()) {
    const double worst = x + start.value.value();
    const double slack = 1e-12 * std::max(1.0, std::abs(x));
    const bool infeasible = u.minus_infinite_at_zero() ? worst <= options.domain_margin : worst < -slack;
    if (infeasible) {
      sol.method = "maximin-lp";
      return sol;
    }
    if (u.smooth_strictly_concave() && worst <= slack) {
      // Every admissible H leaves some leaf at zero wealth.
      sol.status = PrimalStatus::optimal;
      sol.method = "feasibility-boundary";
      finish(sol, market, u, layout, start.holdings, x);
      return sol;
    }
  }
  if (!u.smooth_strictly_concave()) {
    if (market.exact() && !has_ball_constraint(market)) return piecewise_lp<Rational>(market, u, x);
    return piecewise_lp<double>(market, u, x);
  }

  sol.method = "projected-gradient";
  const ConvexSet feasible = feasible_holdings(market);
  const Objective obj{market, u, layout, x, options.domain_margin};
  Vec<double> h = start.holdings;
  if (start.value.is_pos_inf()) {
    // Unbounded worst-case gains with U unbounded above.
    sol.status = PrimalStatus::unbounded;
    sol.value = ExtReal::pos_inf();
    return sol;
  }
  double fh = obj.value(h);
  double step = 1.0;
  constexpr double kSufficient = 0.5;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Vec<double> g = obj.gradient(h);
    Vec<double> probe(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) probe[j] = h[j] + g[j];
    const Vec<double> ph = project(feasible, probe);
    double stat = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) stat += (ph[j] - h[j]) * (ph[j] - h[j]);
    stat = std::sqrt(stat);
    sol.iterations = it;
    sol.stationarity = stat;
    if (sol.trace.size() < 1000) sol.trace.push_back(fh);
    if (stat <= tol) {
      sol.status = PrimalStatus::optimal;
      finish(sol, market, u, layout, h, x);
      return sol;
    }
    // Backtracking along the projection arc; the step actually taken is
    // half the accepted one, so on quadratic models the distance to the
    // optimum contracts by a factor in [1/2, 3/4) per iteration.
    double t = 2.0 * step;
    // Once f barely moves its differences are rounding noise; the trapezoid
    // rule on the gradients still measures the change to full precision.
    auto improvement = [&](const Vec<double>& to, double fto) {
      const double diff = fto - fh;
      if (std::abs(diff) > 1e-10 * (1.0 + std::abs(fh))) return diff;
      const Vec<double> gt = obj.gradient(to);
      double s = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) s += 0.5 * (g[j] + gt[j]) * (to[j] - h[j]);
      return s;
    };
    Vec<double> next;
    double fnext = -kInf;
    for (int k = 0; k < 200; ++k, t *= 0.5) {
      for (std::size_t j = 0; j < h.size(); ++j) probe[j] = h[j] + t * g[j];
      next = project(feasible, probe);
      fnext = obj.value(next);
      if (!std::isfinite(fnext)) continue;
      double lin = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) lin += g[j] * (next[j] - h[j]);
      if (improvement(next, fnext) >= kSufficient * lin) break;
    }
    step = t;
    for (std::size_t j = 0; j < h.size(); ++j) probe[j] = h[j] + 0.5 * t * g[j];
    Vec<double> half = project(feasible, probe);
    const double fhalf = obj.value(half);
    if (std::isfinite(fhalf) && improvement(half, fhalf) >= 0.0) {
      h = std::move(half);
      fh = fhalf;
    } else if (std::isfinite(fnext)) {
      h = std::move(next);
      fh = fnext;
    }
  }
  sol.status = PrimalStatus::max_iterations;
  finish(sol, market, u, layout, h, x);
  return sol;
}

std::vector<PrimalGridPoint> primal_value_grid(const MarketModel& market, const UtilityFunction& u,
                                               const std::vector<double>& xs, double tol) {
  if (!std::is_sorted(xs.begin(), xs.end())) throw std::invalid_argument("primal_value_grid: xs must be sorted");
  std::vector<PrimalGridPoint> out;
  for (double x : xs) {
    const auto sol = solve_primal(market, u, x, tol);
    out.push_back({x, sol.value, sol.status});
  }
  return out;
}

BruteForceResult brute_force_primal(const MarketModel& market, const UtilityFunction& u, double x,
                                    const BruteForceGrid& grid) {
  if (!(grid.step > 0) || !(grid.upper >= grid.lower)) throw std::invalid_argument("brute_force_primal: bad grid");
  const PortfolioLayout layout(market);
  const auto& tree = market.tree();
  if (!grid.endowment.empty() && grid.endowment.size() != tree.leaves().size())
    throw std::invalid_argument("brute_force_primal: endowment size mismatch");
  const std::size_t m = layout.size;
  BruteForceResult best;

  auto evaluate = [&](const Vec<double>& flat) {
    best.evaluations += 1;
    const auto p = layout.unflatten(flat);
    if (!is_admissible(market, p, 1e-9).admissible) return;
    const Vec<double> g = leaf_gains(market, layout, flat);
    double total = 0.0;
    for (std::size_t l = 0; l < g.size(); ++l) {
      const double f = x + g[l] + (grid.endowment.empty() ? 0.0 : grid.endowment[l]);
      const ExtReal uf = u.value(f);
      if (!uf.is_finite()) return;
      total += tree.path_prob_d(l) * uf.value();
    }
    if (best.value < ExtReal(total)) {
      best.value = total;
      best.holdings = flat;
    }
  };
  auto sweep = [&](const Vec<double>& lo, double step, std::size_t points) {
    const double total = std::pow(static_cast<double>(points), static_cast<double>(m));
    if (best.evaluations + total > BruteForceGrid::kMaxEvaluations)
      throw std::length_error("brute_force_primal: evaluation cap of 1e7 exceeded");
    std::vector<std::size_t> idx(m, 0);
    Vec<double> flat(m);
    for (;;) {
      for (std::size_t j = 0; j < m; ++j) flat[j] = lo[j] + step * static_cast<double>(idx[j]);
      evaluate(flat);
      std::size_t k = 0;
      while (k < m && ++idx[k] == points) idx[k++] = 0;
      if (k == m) break;
    }
  };

  const auto points = static_cast<std::size_t>(std::floor((grid.upper - grid.lower) / grid.step + 0.5)) + 1;
  sweep(Vec<double>(m, grid.lower), grid.step, points);
  double step = grid.step;
  const int zp = std::max(3, grid.zoom_points | 1);
  for (int r = 0; r < grid.zoom_rounds && !best.holdings.empty(); ++r) {
    const double fine = 4.0 * step / (zp - 1);
    Vec<double> lo(m);
    for (std::size_t j = 0; j < m; ++j) lo[j] = best.holdings[j] - fine * (zp - 1) / 2.0;
    sweep(lo, fine, static_cast<std::size_t>(zp));
    step = fine;
  }
  return best;
}

}  // namespace condual
