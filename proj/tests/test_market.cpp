#include "doctest.h"

#include "condual/market.hpp"
#include "condual/sample_markets.hpp"

using namespace condual;

namespace {

MarketSpec one_period(const Rational& p_up, const Rational& p_down) {
  MarketSpec spec;
  spec.horizon = 1;
  spec.dimension = 1;
  spec.exact = true;
  spec.nodes.push_back({"root", 0, std::nullopt, Rational(1), {Rational(1)}});
  spec.nodes.push_back({"up", 1, std::string("root"), p_up, {Rational(2)}});
  spec.nodes.push_back({"down", 1, std::string("root"), p_down, {Rational(1, 2)}});
  spec.constraints = {{"root", ConvexSet::whole_space(1)}};
  return spec;
}

}  // namespace

TEST_CASE("binomial tree structure and path probabilities") {
  const MarketModel m = samples::b1();
  const EventTree& t = m.tree();
  CHECK(t.size() == 3);
  CHECK(t.horizon() == 1);
  REQUIRE(t.leaves().size() == 2);
  CHECK(t.internal_nodes() == std::vector<NodeId>{0});
  CHECK(t.path_prob(0) == Rational(1, 2));
  CHECK(t.path_prob(1) == Rational(1, 2));
  CHECK(m.increment(t.leaves()[0]) == Vec<Rational>{Rational(1)});
  CHECK(m.increment(t.leaves()[1]) == Vec<Rational>{Rational(-1, 2)});
  CHECK(m.increment(0) == Vec<Rational>{Rational(0)});
  CHECK(t.leaves_below(0).size() == 2);
  CHECK_FALSE(t.leaf_position(0).has_value());
}

TEST_CASE("wealth is x plus accumulated gains, exactly") {
  const MarketModel m = samples::two_period_binomial(ConvexSet::whole_space(1));
  PortfolioProcess<Rational> h = constant_portfolio(m, Vec<Rational>{Rational(1, 2)});
  const Vec<Rational> w = terminal_wealth(m, h, Rational(1));
  // Leaves in storage order: uu, ud, du, dd.
  REQUIRE(w.size() == 4);
  std::vector<Rational> gains;
  for (NodeId leaf : m.tree().leaves()) {
    Rational g(0);
    for (NodeId n = leaf; m.tree().node(n).parent; n = *m.tree().node(n).parent)
      g += Rational(1, 2) * m.increment(n)[0];
    gains.push_back(Rational(1) + g);
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(w[i] == gains[i]);
  const WealthProcess<Rational> wp = wealth_process(m, h, Rational(1));
  CHECK(wp.initial == Rational(1));
  CHECK(wp.values[0] == Rational(1));
}

TEST_CASE("validation reports probability defects by node") {
  CHECK_NOTHROW(build_market(one_period(Rational(1, 2), Rational(1, 2))));
  const MarketModel bad = assemble_market(one_period(Rational(1, 2), Rational(2, 5)));
  const auto diags = validate_market(bad);
  REQUIRE_FALSE(diags.empty());
  CHECK(diags.front().check == "probability_sum");
  CHECK(diags.front().node == "root");
  CHECK_THROWS_AS(build_market(one_period(Rational(1, 2), Rational(2, 5))), InputError);
}

TEST_CASE("admissibility names the violating node") {
  const MarketModel m = samples::binomial(samples::interval(Rational(-1), Rational(1)));
  CHECK(is_admissible(m, constant_portfolio(m, Vec<Rational>{Rational(1)})).admissible);
  const auto r = is_admissible(m, constant_portfolio(m, Vec<Rational>{Rational(2)}));
  CHECK_FALSE(r.admissible);
  REQUIRE(r.node.has_value());
  CHECK(*r.node == 0);
  CHECK_FALSE(r.reason.empty());
}

TEST_CASE("node weights aggregate leaf weights") {
  const MarketModel m = samples::two_period_binomial(ConvexSet::whole_space(1));
  const Vec<Rational> q{Rational(1, 10), Rational(2, 10), Rational(3, 10), Rational(4, 10)};
  const Vec<Rational> w = node_weights(m, q);
  CHECK(w[0] == Rational(1));
  // The martingale drift vanishes only for the martingale measure; here it is
  // the weighted mean increment over the children of the root.
  const Vec<Rational> drift = weighted_drift(m, 0, w);
  Rational expect(0);
  for (NodeId c : m.tree().node(0).children) expect += w[c] * m.increment(c)[0];
  CHECK(drift[0] == expect);
}

TEST_CASE("endowment embedding adds one pinned asset") {
  const MarketModel m = samples::b1();
  const Vec<Rational> pricing{Rational(1, 3), Rational(2, 3)};
  const auto zero = embed_endowment(m, {Rational(0), Rational(0)}, pricing);
  CHECK(zero.offset == Rational(0));
  CHECK(zero.augmented.dim() == 2);
  const auto e = embed_endowment(m, {Rational(1), Rational(-1, 2)}, pricing);
  CHECK(e.offset == Rational(0));  // E^Q = 1/3 - 1/3
  const auto f = embed_endowment(m, {Rational(3), Rational(0)}, pricing);
  CHECK(f.offset == Rational(-1));
  // Holding the extra asset at 1 reproduces the endowment at the leaves.
  PortfolioProcess<Rational> h = constant_portfolio(f.augmented, Vec<Rational>{Rational(0), Rational(1)});
  const Vec<Rational> w = terminal_wealth(f.augmented, h, Rational(0));
  CHECK(w[0] - f.offset == Rational(3));
  CHECK(w[1] - f.offset == Rational(0));
}
