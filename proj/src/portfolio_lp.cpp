#include "condual/portfolio_lp.hpp"

#include <numeric>

namespace condual {

PortfolioLayout::PortfolioLayout(const MarketModel& market) : dim(market.dim()) {
  offset.assign(market.tree().size(), std::nullopt);
  for (NodeId n : market.tree().internal_nodes()) {
    offset[n] = size;
    size += dim;
  }
}

template <class T>
MarketLp<T> market_lp(const MarketModel& market) {
  MarketLp<T> out;
  out.layout = PortfolioLayout(market);
  out.lp = LinearProgram<T>(out.layout.size);
  for (NodeId n : market.tree().internal_nodes()) {
    std::vector<std::size_t> vars(market.dim());
    std::iota(vars.begin(), vars.end(), *out.layout.offset[n]);
    append_set_rows(out.lp, market.constraint(n), vars, ScalarTraits<T>::exact ? nullptr : &out.balls);
  }
  if (market.floor()) {
    const T floor = ScalarTraits<T>::from_rational(*market.floor());
    for (NodeId n = 1; n < market.tree().size(); ++n)
      out.lp.add_row(gains_coefficients(market, out, n), RowSense::ge, T(-floor));
  }
  return out;
}

template <class T>
Vec<T> gains_coefficients(const MarketModel& market, const MarketLp<T>& mlp, NodeId n) {
  Vec<T> row(mlp.lp.num_vars(), T(0));
  const auto& tree = market.tree();
  for (NodeId c = n; tree.node(c).parent; c = *tree.node(c).parent) {
    const NodeId p = *tree.node(c).parent;
    for (std::size_t j = 0; j < market.dim(); ++j)
      row[*mlp.layout.offset[p] + j] += ScalarTraits<T>::from_rational(market.increment(c)[j]);
  }
  return row;
}

template <class T>
LpResult<T> solve_market_lp(const MarketLp<T>& mlp) {
  if constexpr (ScalarTraits<T>::exact) {
    return solve_lp(mlp.lp);
  } else {
    return solve_lp_with_cuts(mlp.lp, mlp.balls).lp;
  }
}

template MarketLp<double> market_lp<double>(const MarketModel&);
template MarketLp<Rational> market_lp<Rational>(const MarketModel&);
template Vec<double> gains_coefficients<double>(const MarketModel&, const MarketLp<double>&, NodeId);
template Vec<Rational> gains_coefficients<Rational>(const MarketModel&, const MarketLp<Rational>&, NodeId);
template LpResult<double> solve_market_lp<double>(const MarketLp<double>&);
template LpResult<Rational> solve_market_lp<Rational>(const MarketLp<Rational>&);

template <class T>
MaximinGain<T> maximin_gain(const MarketModel& market) {
  MarketLp<T> mlp = market_lp<T>(market);
  const std::size_t m = mlp.lp.add_var(false, T(1));
  for (NodeId leaf : market.tree().leaves()) {
    Vec<T> row = gains_coefficients(market, mlp, leaf);
    for (auto& v : row) v = -v;
    row[m] = T(1);
    mlp.lp.add_row(std::move(row), RowSense::le, T(0));
  }
  const auto res = solve_market_lp(mlp);
  MaximinGain<T> out;
  if (res.status == LpStatus::infeasible) {
    out.value = Extended<T>::neg_inf();
  } else if (res.status == LpStatus::unbounded) {
    out.value = Extended<T>::pos_inf();
  } else {
    out.value = res.objective;
    out.holdings.assign(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(mlp.layout.size));
  }
  return out;
}

template MaximinGain<double> maximin_gain<double>(const MarketModel&);
template MaximinGain<Rational> maximin_gain<Rational>(const MarketModel&);

std::optional<Vec<Rational>> improving_recession_direction(const MarketModel& market) {
  const PortfolioLayout layout(market);
  MarketLp<Rational> mlp;
  mlp.layout = layout;
  mlp.lp = LinearProgram<Rational>(layout.size);
  for (NodeId n : market.tree().internal_nodes()) {
    const Cone rec = recession_cone(market.constraint(n));
    for (const auto& r : rec.rows) {
      Vec<Rational> row(layout.size, Rational(0));
      for (std::size_t j = 0; j < market.dim(); ++j) row[*layout.offset[n] + j] = r[j];
      mlp.lp.add_row(std::move(row), RowSense::le, Rational(0));
    }
  }
  if (market.floor()) {
    for (NodeId n = 1; n < market.tree().size(); ++n)
      if (!market.tree().is_leaf(n)) mlp.lp.add_row(gains_coefficients(market, mlp, n), RowSense::ge, Rational(0));
  }
  for (NodeId leaf : market.tree().leaves()) {
    const std::size_t slack = mlp.lp.add_var(true, Rational(1));
    // 0 <= slack <= gain and slack <= 1.
    Vec<Rational> row = gains_coefficients(market, mlp, leaf);
    for (auto& v : row) v = -v;
    row[slack] = 1;
    mlp.lp.add_row(std::move(row), RowSense::le, Rational(0));
    Vec<Rational> cap(mlp.lp.num_vars(), Rational(0));
    cap[slack] = 1;
    mlp.lp.add_row(std::move(cap), RowSense::le, Rational(1));
  }
  const auto res = solve_lp(mlp.lp);
  if (res.status != LpStatus::optimal || res.objective <= 0) return std::nullopt;
  return Vec<Rational>(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(layout.size));
}

bool has_ball_constraint(const MarketModel& market) {
  for (NodeId n : market.tree().internal_nodes())
    if (!is_polyhedral(market.constraint(n))) return true;
  return false;
}

ConvexSet feasible_holdings(const MarketModel& market) {
  std::vector<ConvexSet> parts;
  for (NodeId n : market.tree().internal_nodes()) parts.push_back(market.constraint(n));
  ConvexSet prod = ConvexSet::product(std::move(parts));
  if (!market.floor()) return prod;
  const PortfolioLayout layout(market);
  Matrix<Rational> a;
  Vec<Rational> b;
  const auto& tree = market.tree();
  for (NodeId n = 1; n < tree.size(); ++n) {
    Vec<Rational> row(layout.size, Rational(0));
    for (NodeId c = n; tree.node(c).parent; c = *tree.node(c).parent) {
      const NodeId p = *tree.node(c).parent;
      for (std::size_t j = 0; j < market.dim(); ++j) row[*layout.offset[p] + j] -= market.increment(c)[j];
    }
    a.push_back(std::move(row));
    b.push_back(*market.floor());
  }
  return ConvexSet::intersection({prod, ConvexSet::polyhedron(std::move(a), std::move(b), layout.size)});
}

Vec<double> leaf_gains(const MarketModel& market, const PortfolioLayout& layout, const Vec<double>& flat) {
  const auto& tree = market.tree();
  Vec<double> node_gain(tree.size(), 0.0);
  for (NodeId n = 1; n < tree.size(); ++n) {
    const NodeId p = *tree.node(n).parent;
    double g = 0.0;
    for (std::size_t j = 0; j < market.dim(); ++j) g += flat[*layout.offset[p] + j] * market.increment_d(n)[j];
    node_gain[n] = node_gain[p] + g;
  }
  Vec<double> out;
  for (NodeId leaf : tree.leaves()) out.push_back(node_gain[leaf]);
  return out;
}

}  // namespace condual
