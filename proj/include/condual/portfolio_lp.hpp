#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "condual/convex_geometry.hpp"
#include "condual/linear_program.hpp"
#include "condual/market.hpp"

namespace condual {

/// Where each internal node's holding lives in a flat variable vector.
struct PortfolioLayout {
  std::vector<std::optional<std::size_t>> offset;  // per node; nullopt for leaves
  std::size_t dim = 0;
  std::size_t size = 0;  // total number of holding coordinates

  explicit PortfolioLayout(const MarketModel& market);
  PortfolioLayout() = default;

  template <class T>
  PortfolioProcess<T> unflatten(const Vec<T>& flat) const {
    PortfolioProcess<T> p;
    p.holdings.resize(offset.size());
    for (std::size_t n = 0; n < offset.size(); ++n)
      if (offset[n]) p.holdings[n] = Vec<T>(flat.begin() + static_cast<std::ptrdiff_t>(*offset[n]),
                                            flat.begin() + static_cast<std::ptrdiff_t>(*offset[n] + dim));
    return p;
  }

  template <class T>
  Vec<T> flatten(const PortfolioProcess<T>& p) const {
    Vec<T> flat(size, T(0));
    for (std::size_t n = 0; n < offset.size(); ++n)
      if (offset[n])
        for (std::size_t j = 0; j < dim; ++j) flat[*offset[n] + j] = p.holdings[n][j];
    return flat;
  }
};

/// LP whose first variables are the (free) holdings, constrained to the
/// constraint sets and, when the market has one, the wealth floor.
template <class T>
struct MarketLp {
  LinearProgram<T> lp;
  PortfolioLayout layout;
  std::vector<BallConstraint> balls;
};

template <class T>
MarketLp<T> market_lp(const MarketModel& market);

/// Coefficients of the gains (H.S) accrued at node n, padded to the current
/// LP width.
template <class T>
Vec<T> gains_coefficients(const MarketModel& market, const MarketLp<T>& mlp, NodeId n);

/// Solves with tangent cuts for balls; Rational LPs with balls throw
/// UnsupportedError.
template <class T>
LpResult<T> solve_market_lp(const MarketLp<T>& mlp);

template <class T>
struct MaximinGain {
  Extended<T> value;  // sup over admissible H of the worst leaf gain
  Vec<T> holdings;    // flat maximizer when value is finite
};

/// sup_{H} min_leaf (H.S)_T as an LP in the holdings and one free scalar;
/// -inf when no admissible H exists.
template <class T>
MaximinGain<T> maximin_gain(const MarketModel& market);

/// A holding direction D with D(n) in the recession cone of every
/// constraint set, gains (D.S)_T >= 0 on all leaves and > 0 on some; with
/// a floor, gains along D are also nonnegative at every node. Computed in
/// exact arithmetic; nullopt when none exists.
std::optional<Vec<Rational>> improving_recession_direction(const MarketModel& market);

bool has_ball_constraint(const MarketModel& market);

/// Product of all node constraint sets, intersected with the floor
/// polyhedron if any, over the flat holding vector.
ConvexSet feasible_holdings(const MarketModel& market);

/// Gains per leaf of a flat holding vector, in double.
Vec<double> leaf_gains(const MarketModel& market, const PortfolioLayout& layout, const Vec<double>& flat);

}  // namespace condual
