#include "doctest.h"

#include <cmath>

#include "condual/utility.hpp"

using namespace condual;

namespace {

/// sup over a dense x grid of U(x) - x y.
double grid_conjugate(const UtilityFunction& u, double y, double x_max) {
  double best = -INFINITY;
  const int n = 400000;
  for (int i = 0; i <= n; ++i) {
    const double x = x_max * i / n;
    best = std::max(best, u.value(x).value() - x * y);
  }
  return best;
}

}  // namespace

TEST_CASE("closed-form conjugates of the smooth families") {
  const UtilityFunction lg = UtilityFunction::log();
  for (double y : {0.1, 0.5, 1.0, 3.0}) {
    CHECK(lg.conjugate(y).value() == doctest::Approx(-std::log(y) - 1.0).epsilon(1e-12));
    CHECK(lg.conjugate_derivative(y) == doctest::Approx(-1.0 / y).epsilon(1e-12));
  }
  const double p = 0.3;
  const UtilityFunction pw = UtilityFunction::power(p);
  for (double y : {0.2, 1.0, 2.5}) {
    const double expect = (1.0 / p - 1.0) * std::pow(y, p / (p - 1.0));
    CHECK(pw.conjugate(y).value() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(pw.conjugate_derivative(y) == doctest::Approx(-std::pow(y, 1.0 / (p - 1.0))).epsilon(1e-10));
  }
  CHECK(pw.value(0.0).value() == 0.0);
  CHECK(lg.value(0.0).is_neg_inf());
  CHECK(lg.value(-1.0).is_neg_inf());
  CHECK(lg.conjugate(0.0).is_pos_inf());
}

TEST_CASE("piecewise utility values, kinks and conjugate against a dense grid") {
  const UtilityFunction u = UtilityFunction::piecewise({0.0, 1.0, 3.0}, {2.0, 1.0, 0.25}, 0.5);
  CHECK(u.value(0.0).value() == 0.5);
  CHECK(u.value(1.0).value() == doctest::Approx(2.5));
  CHECK(u.value(4.0).value() == doctest::Approx(2.5 + 2.0 + 0.25));
  const auto [left, right] = u.marginal(1.0);
  CHECK(left == 2.0);
  CHECK(right == 1.0);
  CHECK(u.asymptotic_slope() == 0.25);
  CHECK_FALSE(u.smooth_strictly_concave());
  CHECK_FALSE(u.bounded_above());
  for (double y : {0.3, 0.5, 1.5, 2.5}) CHECK(u.conjugate(y).value() == doctest::Approx(grid_conjugate(u, y, 20.0)).epsilon(1e-6));
  // Below the asymptotic slope the conjugate is infinite.
  CHECK(u.conjugate(0.1).is_pos_inf());
  CHECK(u.conjugate(2.5).value() == doctest::Approx(0.5));
}

TEST_CASE("tabulated utility interpolates linearly") {
  const UtilityFunction u = UtilityFunction::table({0.0, 1.0, 2.0}, {0.0, 1.0, 1.5});
  CHECK(u.value(0.5).value() == doctest::Approx(0.5));
  CHECK(u.value(1.5).value() == doctest::Approx(1.25));
  CHECK(u.value(3.0).value() == doctest::Approx(2.0));
  CHECK(u.conjugate(0.75).value() == doctest::Approx(grid_conjugate(u, 0.75, 10.0)).epsilon(1e-6));
}

TEST_CASE("construction rejects invalid shapes") {
  CHECK_THROWS_AS(UtilityFunction::power(1.0), InputError);
  CHECK_THROWS_AS(UtilityFunction::power(0.0), InputError);
  CHECK_THROWS_AS(UtilityFunction::piecewise({0.0, 1.0}, {1.0, 2.0}), InputError);
  CHECK_THROWS_AS(UtilityFunction::piecewise({0.5}, {1.0}), InputError);
  CHECK_THROWS_AS(UtilityFunction::piecewise({0.0}, {-1.0}), InputError);
  CHECK_THROWS_AS(UtilityFunction::table({0.0}, {0.0}), InputError);
}

TEST_CASE("reasonable asymptotic elasticity verdicts") {
  std::vector<double> grid;
  for (int i = 0; i < 200; ++i) grid.push_back(10.0 * std::pow(1.1, i));
  const double p = 0.5;
  CHECK(check_rae(UtilityFunction::power(p), 10.0, std::pow(2.0, p) + 1e-3, grid).holds_on_grid);
  CHECK_FALSE(check_rae(UtilityFunction::power(p), 10.0, std::pow(2.0, p) - 1e-3, grid).holds_on_grid);
  CHECK_FALSE(check_rae(UtilityFunction::linear(), 10.0, 1.999, grid).holds_on_grid);
  CHECK(check_rae(UtilityFunction::log(), 10.0, 1.5, grid).holds_on_grid);
  const auto analytic = check_rae(UtilityFunction::power(p), 10.0, std::pow(2.0, p) + 1e-3, grid).analytic;
  REQUIRE(analytic.has_value());
  CHECK(*analytic);
  CHECK(check_inada_zero(UtilityFunction::log()));
  CHECK(check_inada_zero(UtilityFunction::power(0.4)));
  CHECK_FALSE(check_inada_zero(UtilityFunction::linear()));
}

TEST_CASE("Fenchel-Young holds with equality at the marginal utility") {
  for (const UtilityFunction& u : {UtilityFunction::log(), UtilityFunction::power(0.2), UtilityFunction::power(0.7)})
    for (double x : {0.1, 1.0, 7.0}) {
      const double y = u.derivative(x);
      CHECK(std::abs(u.conjugate(y).value() - (u.value(x).value() - x * y)) <= 1e-8);
      CHECK(u.conjugate(2.0 * y).value() >= u.value(x).value() - x * 2.0 * y);
    }
}
