#include "doctest.h"

#include "condual/condition_checker.hpp"
#include "condual/sample_markets.hpp"

using namespace condual;

TEST_CASE("D1 certificate has unit compensator increments") {
  const MarketModel m = samples::d1();
  const ConditionCertificate c = check_supermartingale_condition(m);
  CHECK(c.nonempty == Verdict::yes);
  CHECK(c.supermartingale == Verdict::yes);
  REQUIRE(c.steps.size() == 2);
  for (const auto& s : c.steps) CHECK(s.increment == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.terminal_compensator() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(supermartingale_violation(m, c, constant_portfolio(m, Vec<double>{1.0})) <= 1e-10);
  CHECK(supermartingale_violation(m, c, constant_portfolio(m, Vec<double>{-5.0})) <= 1e-10);
  const auto compact = check_convex_compactness(m, 1.0);
  CHECK(compact.compact == Verdict::yes);
}

TEST_CASE("martingale stage certifies the free binomial market") {
  const MarketModel m = samples::b1();
  const ConditionCertificate c = check_supermartingale_condition(m);
  CHECK(c.supermartingale == Verdict::yes);
  CHECK(c.stage == "martingale");
  CHECK(c.terminal_compensator() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.q[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("conic certificates rescale") {
  const MarketModel m = samples::d1();
  const ConditionCertificate c = check_supermartingale_condition(m);
  const ConditionCertificate s = scale_certificate(c, 2.0);
  CHECK(s.terminal_compensator() == doctest::Approx(2.0 * c.terminal_compensator()));
}

TEST_CASE("the free lunch market has no certificate") {
  const MarketModel m = samples::arbitrage();
  const ConditionCertificate c = check_supermartingale_condition(m);
  CHECK(c.supermartingale != Verdict::yes);
  CHECK(check_convex_compactness(m, 1.0).compact == Verdict::no);
}

TEST_CASE("empty constraints and floors are located") {
  const MarketModel m = [] {
    MarketSpec spec = samples::binomial_spec(samples::interval(Rational(1), Rational(0)));
    return assemble_market(spec);
  }();
  const NonemptyResult r = check_nonempty(m);
  CHECK_FALSE(r.nonempty);
  REQUIRE(r.failing_node.has_value());
  CHECK(*r.failing_node == 0);

  const NonemptyResult ok = check_nonempty(samples::binomial(ConvexSet::singleton({Rational(1)})));
  CHECK(ok.nonempty);
  CHECK(ok.witness.holdings[0] == Vec<Rational>{Rational(1)});
}

TEST_CASE("drift condition on a hand instance") {
  // I = span{e1}, mu = (1, 1).
  const Matrix<Rational> sigma{{Rational(1)}, {Rational(0)}};
  const Vec<Rational> mu{Rational(1), Rational(1)};
  const Cone orthant{Cone::Form::inequality, {{Rational(-1), Rational(0)}, {Rational(0), Rational(-1)}}, 2};
  const DriftResult yes = check_drift_condition(sigma, mu, orthant);
  CHECK(yes.holds);
  REQUIRE(yes.mu_hat.size() == 2);
  CHECK(yes.mu_hat[1] == Rational(0));
  CHECK(cone_contains(orthant, yes.beta));
  CHECK(mat_vec(sigma, yes.nu) == yes.mu_hat);
  CHECK_FALSE(check_drift_condition(sigma, mu, Cone::zero(2)).holds);
  CHECK(check_drift_condition(sigma, {Rational(3), Rational(0)}, Cone::zero(2)).holds);
  CHECK_THROWS_AS(check_drift_condition(sigma, mu, Cone::zero(3)), std::invalid_argument);
}

TEST_CASE("projected closedness on fixtures") {
  for (const auto& [name, market] : samples::golden_markets()) {
    INFO(name);
    CHECK(check_projected_closedness(market).overall == Verdict::yes);
  }
}
