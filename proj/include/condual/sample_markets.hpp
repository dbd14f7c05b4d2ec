#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "condual/market.hpp"

namespace condual::samples {

/// (-inf, upper] in one dimension.
ConvexSet half_line(const Rational& upper);
/// [lo, hi] in one dimension.
ConvexSet interval(const Rational& lo, const Rational& hi);

/// One period, S0 = 1, increments +1 and -1/2 with probability 1/2 each.
MarketSpec binomial_spec(const ConvexSet& kappa);
MarketModel binomial(const ConvexSet& kappa);
/// B1 with no constraint.
MarketModel b1();

/// S_t = t for t = 0, 1, 2 on a single path, constraint (-inf, 1].
MarketModel d1();

/// One period with increments +1 and 0 (a free lunch when unconstrained).
MarketModel arbitrage();

/// Two periods of the B1 increments, the same constraint at every node.
MarketModel two_period_binomial(const ConvexSet& kappa);

/// Named fixtures used by the acceptance and property suites.
struct NamedMarket {
  std::string name;
  MarketModel market;
};
std::vector<NamedMarket> golden_markets();

struct RandomMarketOptions {
  int max_periods = 3;
  std::size_t max_dim = 2;
  int max_branching = 3;
  /// Allow ball constraints (which leave the exact LP path).
  bool allow_balls = false;
  /// Force every constraint to be a cone (polyhedral cone through 0).
  bool conic = false;
};

/// Random tree with rational probabilities, rational prices and random
/// constraint sets that contain the origin.
MarketModel random_market(std::mt19937_64& rng, const RandomMarketOptions& options = {});

/// Random rational in [lo, hi] with the given denominator.
Rational random_rational(std::mt19937_64& rng, int lo, int hi, int denominator);

}  // namespace condual::samples
