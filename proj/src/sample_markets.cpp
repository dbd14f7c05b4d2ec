#include "condual/sample_markets.hpp"

#include <functional>

namespace condual::samples {

namespace {

using Bound = std::optional<Rational>;

MarketSpec::NodeSpec node(std::string id, int time, std::optional<std::string> parent, Rational prob,
                          Vec<Rational> prices) {
  return {std::move(id), time, std::move(parent), std::move(prob), std::move(prices)};
}

}  // namespace

ConvexSet half_line(const Rational& upper) { return ConvexSet::box({Bound{}}, {Bound{upper}}); }

ConvexSet interval(const Rational& lo, const Rational& hi) { return ConvexSet::box({Bound{lo}}, {Bound{hi}}); }

MarketSpec binomial_spec(const ConvexSet& kappa) {
  MarketSpec spec;
  spec.horizon = 1;
  spec.dimension = 1;
  spec.exact = true;
  spec.nodes = {node("root", 0, std::nullopt, Rational(1), {Rational(1)}),
                node("up", 1, "root", Rational(1, 2), {Rational(2)}),
                node("down", 1, "root", Rational(1, 2), {Rational(1, 2)})};
  spec.constraints = {{"root", kappa}};
  return spec;
}

MarketModel binomial(const ConvexSet& kappa) { return build_market(binomial_spec(kappa)); }

MarketModel b1() { return binomial(ConvexSet::whole_space(1)); }

MarketModel d1() {
  MarketSpec spec;
  spec.horizon = 2;
  spec.dimension = 1;
  spec.exact = true;
  spec.nodes = {node("t0", 0, std::nullopt, Rational(1), {Rational(0)}),
                node("t1", 1, "t0", Rational(1), {Rational(1)}),
                node("t2", 2, "t1", Rational(1), {Rational(2)})};
  spec.constraints = {{"t0", half_line(Rational(1))}, {"t1", half_line(Rational(1))}};
  return build_market(spec);
}

MarketModel arbitrage() {
  MarketSpec spec;
  spec.horizon = 1;
  spec.dimension = 1;
  spec.exact = true;
  spec.nodes = {node("root", 0, std::nullopt, Rational(1), {Rational(1)}),
                node("up", 1, "root", Rational(1, 2), {Rational(2)}),
                node("flat", 1, "root", Rational(1, 2), {Rational(1)})};
  spec.constraints = {{"root", ConvexSet::whole_space(1)}};
  return build_market(spec);
}

MarketModel two_period_binomial(const ConvexSet& kappa) {
  MarketSpec spec;
  spec.horizon = 2;
  spec.dimension = 1;
  spec.exact = true;
  spec.nodes = {node("r", 0, std::nullopt, Rational(1), {Rational(2)}),
                node("u", 1, "r", Rational(1, 2), {Rational(3)}),
                node("d", 1, "r", Rational(1, 2), {Rational(3, 2)}),
                node("uu", 2, "u", Rational(1, 2), {Rational(4)}),
                node("ud", 2, "u", Rational(1, 2), {Rational(5, 2)}),
                node("du", 2, "d", Rational(1, 2), {Rational(5, 2)}),
                node("dd", 2, "d", Rational(1, 2), {Rational(1)})};
  spec.constraints = {{"r", kappa}, {"u", kappa}, {"d", kappa}};
  return build_market(spec);
}

std::vector<NamedMarket> golden_markets() {
  std::vector<NamedMarket> out;
  out.push_back({"b1", b1()});
  out.push_back({"d1", d1()});
  out.push_back({"singleton", binomial(ConvexSet::singleton({Rational(1)}))});
  out.push_back({"box", binomial(interval(Rational(-1), Rational(1)))});
  return out;
}

Rational random_rational(std::mt19937_64& rng, int lo, int hi, int denominator) {
  std::uniform_int_distribution<int> dist(lo * denominator, hi * denominator);
  return Rational(dist(rng), denominator);
}

MarketModel random_market(std::mt19937_64& rng, const RandomMarketOptions& options) {
  std::uniform_int_distribution<int> period_dist(1, options.max_periods);
  std::uniform_int_distribution<std::size_t> dim_dist(1, options.max_dim);
  std::uniform_int_distribution<int> branch_dist(2, options.max_branching);
  const int horizon = period_dist(rng);
  const std::size_t d = dim_dist(rng);

  MarketSpec spec;
  spec.horizon = horizon;
  spec.dimension = d;
  spec.exact = !options.allow_balls;
  auto random_constraint = [&]() -> ConvexSet {
    std::uniform_int_distribution<int> kind(0, options.conic ? 2 : (options.allow_balls ? 4 : 3));
    switch (kind(rng)) {
      case 0: return ConvexSet::whole_space(d);
      case 1: {
        // Cone {a h <= 0} with one or two random rows.
        Matrix<Rational> a;
        std::uniform_int_distribution<int> rows(1, 2);
        const int k = rows(rng);
        for (int r = 0; r < k; ++r) {
          Vec<Rational> row;
          for (std::size_t j = 0; j < d; ++j) row.push_back(random_rational(rng, -2, 2, 1));
          a.push_back(std::move(row));
        }
        return ConvexSet::polyhedron(std::move(a), Vec<Rational>(static_cast<std::size_t>(k), Rational(0)), d);
      }
      case 2: {
        // Orthant-like cone.
        std::vector<Bound> lo(d);
        std::vector<Bound> hi(d);
        for (std::size_t j = 0; j < d; ++j) {
          if (rng() % 2) {
            lo[j] = Rational(0);
          } else {
            hi[j] = Rational(0);
          }
        }
        return ConvexSet::box(lo, hi);
      }
      case 3: {
        std::vector<Bound> lo(d);
        std::vector<Bound> hi(d);
        for (std::size_t j = 0; j < d; ++j) {
          if (rng() % 3 != 0) lo[j] = -random_rational(rng, 0, 2, 4);
          if (rng() % 3 != 0) hi[j] = random_rational(rng, 0, 2, 4);
        }
        return ConvexSet::box(lo, hi);
      }
      default: {
        Vec<Rational> c;
        for (std::size_t j = 0; j < d; ++j) c.push_back(random_rational(rng, -1, 1, 4));
        Rational r(2);
        return ConvexSet::ball(std::move(c), r);
      }
    }
  };

  int counter = 0;
  std::function<void(const std::string&, int, const Vec<Rational>&)> grow = [&](const std::string& id, int t,
                                                                                 const Vec<Rational>& price) {
    if (t == horizon) return;
    spec.constraints.push_back({id, random_constraint()});
    const int b = branch_dist(rng);
    // Random positive weights normalized to rational probabilities.
    std::vector<int> w(static_cast<std::size_t>(b));
    int total = 0;
    for (auto& x : w) {
      x = 1 + static_cast<int>(rng() % 4);
      total += x;
    }
    for (int k = 0; k < b; ++k) {
      Vec<Rational> child = price;
      for (auto& v : child) v += random_rational(rng, -1, 1, 4);
      const std::string cid = "n" + std::to_string(++counter);
      spec.nodes.push_back(node(cid, t + 1, id, Rational(w[static_cast<std::size_t>(k)], total), child));
      grow(cid, t + 1, child);
    }
  };
  Vec<Rational> s0(d, Rational(1));
  spec.nodes.push_back(node("root", 0, std::nullopt, Rational(1), s0));
  grow("root", 0, s0);
  return build_market(spec);
}

}  // namespace condual::samples
