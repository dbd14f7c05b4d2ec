#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condual/numeric.hpp"

namespace condual {

enum class UtilityFamily { power, log, piecewise, table };

std::string to_string(UtilityFamily f);

/// Nondecreasing concave utility on (0, inf), extended by U(0) = inf U and
/// U(x) = -inf for x < 0. Piecewise and tabulated utilities share one
/// representation: knots k_0 = 0 < k_1 < ... with values and right slopes.
class UtilityFunction {
 public:
  /// x^p / p with p in (0, 1).
  static UtilityFunction power(double p);
  static UtilityFunction log();
  /// U(0) = u0; slope slopes[i] on [breakpoints[i], breakpoints[i+1]).
  /// breakpoints[0] must be 0; slopes nonincreasing and nonnegative.
  static UtilityFunction piecewise(std::vector<double> breakpoints, std::vector<double> slopes, double u0 = 0.0);
  /// Linear interpolation of (x, u); extended with the end slopes.
  static UtilityFunction table(std::vector<double> x, std::vector<double> u);
  /// U(x) = x.
  static UtilityFunction linear() { return piecewise({0.0}, {1.0}); }

  UtilityFamily family() const { return family_; }
  double exponent() const { return p_; }

  ExtReal value(double x) const;
  /// (left, right) derivatives at x > 0.
  std::pair<double, double> marginal(double x) const;
  /// Right derivative; the supergradient used by the primal solver.
  double derivative(double x) const { return marginal(x).second; }
  double second_derivative(double x) const;

  /// V(y) = sup_{x >= 0} U(x) - x y; y = 0 gives sup U.
  ExtReal conjugate(double y) const;
  /// V'(y) for y > 0 (right derivative for piecewise families).
  double conjugate_derivative(double y) const;
  double conjugate_second_derivative(double y) const;

  /// Strictly concave and continuously differentiable on (0, inf).
  bool smooth_strictly_concave() const { return family_ == UtilityFamily::power || family_ == UtilityFamily::log; }
  bool bounded_above() const;
  bool minus_infinite_at_zero() const { return family_ == UtilityFamily::log; }
  /// lim U'(x) as x -> inf.
  double asymptotic_slope() const;

  /// Knot representation for piecewise families (empty otherwise).
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& knot_values() const { return knot_values_; }
  const std::vector<double>& slopes() const { return slopes_; }
  /// Inputs preserved for serialization of tabulated utilities.
  const std::vector<double>& table_x() const { return table_x_; }
  const std::vector<double>& table_u() const { return table_u_; }

  std::string describe() const;

 private:
  UtilityFamily family_ = UtilityFamily::log;
  double p_ = 0.0;
  std::vector<double> knots_;
  std::vector<double> knot_values_;
  std::vector<double> slopes_;
  std::vector<double> table_x_;
  std::vector<double> table_u_;
};

struct RaeReport {
  bool holds_on_grid = true;
  /// False when U(x0) <= 0, where the ratio test says nothing.
  bool meaningful = true;
  double worst_ratio = 0.0;
  double worst_x = 0.0;
  /// Closed-form verdict for all x >= x0 when the family admits one.
  std::optional<bool> analytic;
  std::string note;
};

/// Tests U(2x) <= c U(x) on the grid points (all >= x0).
RaeReport check_rae(const UtilityFunction& u, double x0, double c, const std::vector<double>& grid);

/// Whether U'(0+) = inf.
bool check_inada_zero(const UtilityFunction& u);

}  // namespace condual
