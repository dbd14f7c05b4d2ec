#include "doctest.h"

#include <cmath>

#include "condual/dual_solver.hpp"
#include "condual/primal_solver.hpp"
#include "condual/sample_markets.hpp"

using namespace condual;

TEST_CASE("primal on the binomial log instance matches the closed form") {
  const MarketModel m = samples::b1();
  const PrimalSolution s = solve_primal(m, UtilityFunction::log(), 1.0);
  REQUIRE(s.status == PrimalStatus::optimal);
  // First-order condition 1/(1+H) = 1/(2-H) gives H = 1/2.
  CHECK(s.value.value() == doctest::Approx(0.5 * std::log(1.5) + 0.5 * std::log(0.75)).epsilon(1e-9));
  CHECK(s.holdings.holdings[0][0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(s.terminal[0] == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("primal scales with wealth for power utility") {
  const MarketModel m = samples::b1();
  const UtilityFunction u = UtilityFunction::power(0.5);
  const auto a = solve_primal(m, u, 1.0);
  const auto b = solve_primal(m, u, 4.0);
  // Unconstrained and homogeneous: u(4) = 4^p u(1).
  CHECK(b.value.value() == doctest::Approx(2.0 * a.value.value()).epsilon(1e-8));
}

TEST_CASE("primal statuses on degenerate markets") {
  CHECK(solve_primal(samples::arbitrage(), UtilityFunction::log(), 1.0).status == PrimalStatus::unbounded);
  // D1: deterministic gains H0 + H1 <= 2.
  const auto d = solve_primal(samples::d1(), UtilityFunction::log(), 1.0);
  REQUIRE(d.status == PrimalStatus::optimal);
  CHECK(d.value.value() == doctest::Approx(std::log(3.0)).epsilon(1e-8));
  // kappa = {1}: terminal wealth x + 1 and x - 1/2.
  const MarketModel single = samples::binomial(ConvexSet::singleton({Rational(1)}));
  const auto s = solve_primal(single, UtilityFunction::log(), 1.0);
  CHECK(s.value.value() == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(0.5)).epsilon(1e-9));
  const auto below = solve_primal(single, UtilityFunction::log(), 0.25);
  CHECK(below.status == PrimalStatus::infeasible);
  CHECK(below.value.is_neg_inf());
}

TEST_CASE("primal agrees with brute force on the box market") {
  const MarketModel m = samples::binomial(samples::interval(Rational(-1), Rational(1)));
  const UtilityFunction u = UtilityFunction::power(0.5);
  for (double x : {0.6, 1.0, 3.0}) {
    BruteForceGrid grid;
    grid.lower = -1.0;
    grid.upper = 1.0;
    grid.zoom_rounds = 4;
    const auto brute = brute_force_primal(m, u, x, grid);
    const auto s = solve_primal(m, u, x);
    CHECK(s.value.value() == doctest::Approx(brute.value.value()).epsilon(1e-8));
    CHECK(s.value.value() >= brute.value.value() - 1e-10);
  }
  const auto grid = primal_value_grid(m, u, {0.5, 1.0, 2.0, 4.0});
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i].value.value() > grid[i - 1].value.value());
}

TEST_CASE("dual on the complete binomial market uses the martingale measure") {
  const MarketModel m = samples::b1();
  const UtilityFunction u = UtilityFunction::log();
  for (double y : {0.5, 1.0, 2.0}) {
    const DualSolution s = solve_dual(m, u, y);
    REQUIRE(s.status == DualStatus::optimal);
    // Q = (1/3, 2/3) is the only martingale measure.
    const double expect = 0.5 * (-std::log(y * 2.0 / 3.0) - 1.0) + 0.5 * (-std::log(y * 4.0 / 3.0) - 1.0);
    CHECK(s.value.value() == doctest::Approx(expect).epsilon(1e-9));
    CHECK(s.q[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(s.gap <= 1e-8);
    const double h = 1e-5;
    const double fd = (solve_dual(m, u, y + h).value.value() - solve_dual(m, u, y - h).value.value()) / (2 * h);
    CHECK(dual_derivative(m, u, y, s) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("weak duality between the solvers") {
  const MarketModel m = samples::binomial(samples::interval(Rational(-1), Rational(1)));
  const UtilityFunction u = UtilityFunction::power(0.5);
  for (double x : {0.5, 1.0, 2.0})
    for (double y : {0.25, 1.0, 4.0})
      CHECK(solve_primal(m, u, x).value.value() <= solve_dual(m, u, y).value.value() + x * y + 1e-9);
}

TEST_CASE("support function of the admissible gains") {
  const MarketModel free = samples::b1();
  CHECK(support_alpha(free, Vec<Rational>{Rational(1, 3), Rational(2, 3)}) == Extended<Rational>(Rational(0)));
  CHECK(support_alpha(free, Vec<Rational>{Rational(1, 2), Rational(1, 2)}).is_pos_inf());
  // |h| <= 1: alpha(Q) = |E^Q[dS]|.
  const MarketModel box = samples::binomial(samples::interval(Rational(-1), Rational(1)));
  CHECK(support_alpha(box, Vec<Rational>{Rational(1, 2), Rational(1, 2)}) == Extended<Rational>(Rational(1, 4)));
  CHECK(support_alpha(box, Vec<Rational>{Rational(0), Rational(1)}) == Extended<Rational>(Rational(1, 2)));
}

TEST_CASE("superhedging prices and the minimal support value") {
  const MarketModel m = samples::b1();
  const auto call = superhedge_price(m, Vec<Rational>{Rational(1), Rational(0)});
  CHECK(call.price == Extended<Rational>(Rational(1, 3)));
  CHECK(call.dual_price == call.price);
  const auto shifted = superhedge_price(m, Vec<Rational>{Rational(3), Rational(2)});
  CHECK(shifted.price == Extended<Rational>(Rational(7, 3)));

  const MarketModel single = samples::binomial(ConvexSet::singleton({Rational(1)}));
  const auto ms = min_support<Rational>(single);
  CHECK(ms.inf_alpha == Extended<Rational>(Rational(-1, 2)));
  CHECK(ms.sup_essinf == ms.inf_alpha);
  CHECK(ms.xbar == Extended<Rational>(Rational(1, 2)));
  // Q = (0, 1) charges only the flat leaf.
  CHECK(min_support<Rational>(samples::arbitrage()).inf_alpha == Extended<Rational>(Rational(0)));
}

TEST_CASE("dual measures carry densities and mass") {
  const MarketModel m = samples::b1();
  const DualMeasure dm = make_dual_measure(m, {0.25, 0.75}, 2.0, ExtReal(0.0));
  CHECK(dm.mass == 2.0);
  CHECK(dm.weights[0] == doctest::Approx(0.5));
  CHECK(dm.densities[1] == doctest::Approx(3.0));
}
