#include "doctest.h"

#include "condual/duality_verifier.hpp"
#include "condual/sample_markets.hpp"

using namespace condual;

TEST_CASE("conjugacy holds on the binomial log instance") {
  const MarketModel m = samples::b1();
  const auto r = verify_conjugacy(m, UtilityFunction::log(), {0.5, 1.0, 2.0}, {0.5, 1.0, 2.0});
  CHECK(r.verdict == CheckVerdict::pass);
  REQUIRE(r.v_checks.size() == 3);
  REQUIRE(r.u_checks.size() == 3);
  for (const auto& c : r.v_checks) {
    CHECK(c.verdict == CheckVerdict::pass);
    CHECK(c.residual <= c.tolerance + c.grid_bound);
  }
  CHECK(r.worst_weak_violation <= r.weak_tolerance);
  CHECK(r.shape_ok);
  REQUIRE(r.xbar.has_value());
  CHECK(r.xbar->verdict == CheckVerdict::pass);
}

TEST_CASE("conjugacy rejects grids at or below the feasibility boundary") {
  const MarketModel single = samples::binomial(ConvexSet::singleton({Rational(1)}));
  CHECK_THROWS_AS(verify_conjugacy(single, UtilityFunction::log(), {0.5, 1.0, 2.0}, {0.5, 1.0, 2.0}),
                  std::invalid_argument);
  CHECK_NOTHROW(verify_conjugacy(single, UtilityFunction::log(), {0.75, 1.0, 2.0}, {0.5, 1.0, 2.0}));
}

TEST_CASE("xbar agrees across the three computations") {
  for (const auto& [name, market] : samples::golden_markets()) {
    INFO(name);
    const XbarTriple t = verify_xbar(market);
    CHECK(t.verdict == CheckVerdict::pass);
    CHECK(t.spread <= 1e-6);
  }
  const XbarTriple single = verify_xbar(samples::binomial(ConvexSet::singleton({Rational(1)})));
  REQUIRE(single.exact.has_value());
  CHECK(*single.exact == Rational(1, 2));
  // D1 can guarantee gains of 2.
  CHECK(verify_xbar(samples::d1()).from_support.to_double() == doctest::Approx(-2.0));
}

TEST_CASE("primal-dual link on the binomial log instance") {
  const MarketModel m = samples::b1();
  CHECK(locate_y_hat(m, UtilityFunction::log(), 1.0) == doctest::Approx(1.0).epsilon(1e-6));
  const LinkReport r = verify_primal_dual_link(m, UtilityFunction::log(), 1.0);
  CHECK(r.verdict == CheckVerdict::pass);
  CHECK(r.dual_attained);
  REQUIRE(r.leaves.size() == 2);
  CHECK(r.leaves[0].terminal == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(r.max_residual <= 1e-5);
}

TEST_CASE("link refuses utilities without a smooth conjugate") {
  const MarketModel m = samples::binomial(samples::interval(Rational(-1), Rational(1)));
  CHECK_THROWS_AS(verify_primal_dual_link(m, UtilityFunction::linear(), 1.0), std::invalid_argument);
}
