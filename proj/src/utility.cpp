#include "condual/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace condual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_concave_knots(const std::vector<double>& knots, const std::vector<double>& slopes) {
  if (knots.empty() || knots.size() != slopes.size()) throw InputError("utility: breakpoints and slopes differ in length");
  if (knots.front() != 0.0) throw InputError("utility: first breakpoint must be 0");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!std::isfinite(knots[i]) || !std::isfinite(slopes[i])) throw InputError("utility: non-finite breakpoint or slope");
    if (i > 0 && knots[i] <= knots[i - 1]) throw InputError("utility: breakpoints must increase strictly");
    if (slopes[i] < 0) throw InputError("utility: slopes must be nonnegative (U nondecreasing)");
    if (i > 0 && slopes[i] > slopes[i - 1]) throw InputError("utility: slopes must be nonincreasing (U concave)");
  }
}

}  // namespace

std::string to_string(UtilityFamily f) {
  switch (f) {
    case UtilityFamily::power: return "power";
    case UtilityFamily::log: return "log";
    case UtilityFamily::piecewise: return "piecewise";
    default: return "table";
  }
}

UtilityFunction UtilityFunction::power(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("power utility: p must lie in (0, 1)");
  UtilityFunction u;
  u.family_ = UtilityFamily::power;
  u.p_ = p;
  return u;
}

UtilityFunction UtilityFunction::log() {
  UtilityFunction u;
  u.family_ = UtilityFamily::log;
  return u;
}

UtilityFunction UtilityFunction::piecewise(std::vector<double> breakpoints, std::vector<double> slopes, double u0) {
  check_concave_knots(breakpoints, slopes);
  UtilityFunction u;
  u.family_ = UtilityFamily::piecewise;
  u.knots_ = std::move(breakpoints);
  u.slopes_ = std::move(slopes);
  u.knot_values_.assign(u.knots_.size(), u0);
  for (std::size_t i = 1; i < u.knots_.size(); ++i)
    u.knot_values_[i] = u.knot_values_[i - 1] + u.slopes_[i - 1] * (u.knots_[i] - u.knots_[i - 1]);
  return u;
}

UtilityFunction UtilityFunction::table(std::vector<double> x, std::vector<double> values) {
  if (x.size() < 2 || x.size() != values.size()) throw InputError("table utility: need at least two (x, u) pairs");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(values[i])) throw InputError("table utility: non-finite entry");
    if (x[i] < 0) throw InputError("table utility: grid must be nonnegative");
    if (i > 0 && x[i] <= x[i - 1]) throw InputError("table utility: grid must increase strictly");
  }
  std::vector<double> knots;
  std::vector<double> slopes;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) slopes.push_back((values[i + 1] - values[i]) / (x[i + 1] - x[i]));
  for (std::size_t i = 1; i < slopes.size(); ++i)
    if (slopes[i] > slopes[i - 1] + 1e-12 * std::max(1.0, std::abs(slopes[i - 1])))
      throw InputError("table utility: values are not concave");
  if (slopes.back() < 0) throw InputError("table utility: values decrease");
  for (auto& s : slopes) s = std::max(s, 0.0);
  for (std::size_t i = 1; i < slopes.size(); ++i) slopes[i] = std::min(slopes[i], slopes[i - 1]);
  double u0 = values.front();
  if (x.front() > 0) {
    // Extend the first segment down to 0.
    u0 = values.front() - slopes.front() * x.front();
    knots.push_back(0.0);
    slopes.insert(slopes.begin(), slopes.front());
  }
  for (std::size_t i = 0; i + 1 < x.size(); ++i) knots.push_back(x[i]);
  UtilityFunction u = piecewise(std::move(knots), std::move(slopes), u0);
  u.family_ = UtilityFamily::table;
  u.table_x_ = std::move(x);
  u.table_u_ = std::move(values);
  return u;
}

ExtReal UtilityFunction::value(double x) const {
  if (std::isnan(x)) throw std::invalid_argument("utility: NaN argument");
  if (x < 0) return ExtReal::neg_inf();
  switch (family_) {
    case UtilityFamily::power: return ExtReal(std::pow(x, p_) / p_);
    case UtilityFamily::log: return x == 0 ? ExtReal::neg_inf() : ExtReal(std::log(x));
    default: {
      if (std::isinf(x)) return slopes_.back() > 0 ? ExtReal::pos_inf() : ExtReal(knot_values_.back());
      const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
      const std::size_t k = static_cast<std::size_t>(it - knots_.begin()) - 1;
      return ExtReal(knot_values_[k] + slopes_[k] * (x - knots_[k]));
    }
  }
}

std::pair<double, double> UtilityFunction::marginal(double x) const {
  if (!(x > 0)) throw std::invalid_argument("utility marginal: x must be positive");
  switch (family_) {
    case UtilityFamily::power: {
      const double d = std::pow(x, p_ - 1.0);
      return {d, d};
    }
    case UtilityFamily::log: return {1.0 / x, 1.0 / x};
    default: {
      const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
      const std::size_t k = static_cast<std::size_t>(it - knots_.begin()) - 1;
      const double right = slopes_[k];
      const double left = (knots_[k] == x && k > 0) ? slopes_[k - 1] : right;
      return {left, right};
    }
  }
}

double UtilityFunction::second_derivative(double x) const {
  switch (family_) {
    case UtilityFamily::power: return (p_ - 1.0) * std::pow(x, p_ - 2.0);
    case UtilityFamily::log: return -1.0 / (x * x);
    default: return 0.0;
  }
}

ExtReal UtilityFunction::conjugate(double y) const {
  if (std::isnan(y) || y < 0) throw std::invalid_argument("conjugate: y must be nonnegative");
  switch (family_) {
    case UtilityFamily::power:
      if (y == 0) return ExtReal::pos_inf();
      return ExtReal((1.0 - p_) / p_ * std::pow(y, p_ / (p_ - 1.0)));
    case UtilityFamily::log:
      if (y == 0) return ExtReal::pos_inf();
      return ExtReal(-std::log(y) - 1.0);
    default: {
      if (y < slopes_.back()) return ExtReal::pos_inf();
      double best = -kInf;
      for (std::size_t k = 0; k < knots_.size(); ++k) best = std::max(best, knot_values_[k] - knots_[k] * y);
      return ExtReal(best);
    }
  }
}

double UtilityFunction::conjugate_derivative(double y) const {
  if (!(y > 0)) throw std::invalid_argument("conjugate derivative: y must be positive");
  switch (family_) {
    case UtilityFamily::power: return -std::pow(y, 1.0 / (p_ - 1.0));
    case UtilityFamily::log: return -1.0 / y;
    default: {
      // -argmax; the largest knot whose left slope exceeds y is optimal, and
      // the right derivative picks the smallest maximizer.
      if (y < slopes_.back()) return -kInf;
      std::size_t k = 0;
      while (k + 1 < knots_.size() && slopes_[k] > y) ++k;
      return -knots_[k];
    }
  }
}

double UtilityFunction::conjugate_second_derivative(double y) const {
  switch (family_) {
    case UtilityFamily::power: return std::pow(y, (2.0 - p_) / (p_ - 1.0)) / (1.0 - p_);
    case UtilityFamily::log: return 1.0 / (y * y);
    default: return 0.0;
  }
}

bool UtilityFunction::bounded_above() const {
  if (family_ == UtilityFamily::power || family_ == UtilityFamily::log) return false;
  return slopes_.back() == 0.0;
}

double UtilityFunction::asymptotic_slope() const {
  if (family_ == UtilityFamily::power || family_ == UtilityFamily::log) return 0.0;
  return slopes_.back();
}

std::string UtilityFunction::describe() const {
  std::ostringstream os;
  switch (family_) {
    case UtilityFamily::power: os << "power(p=" << p_ << ")"; break;
    case UtilityFamily::log: os << "log"; break;
    default:
      os << to_string(family_) << "(" << knots_.size() << " knots)";
      break;
  }
  return os.str();
}

RaeReport check_rae(const UtilityFunction& u, double x0, double c, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("check_rae: empty grid");
  if (!(x0 > 0)) throw std::invalid_argument("check_rae: x0 must be positive");
  RaeReport rep;
  const ExtReal at_x0 = u.value(x0);
  rep.meaningful = at_x0.is_finite() && at_x0.value() > 0;
  if (!rep.meaningful) rep.note = "U(x0) <= 0; the ratio test is not informative";
  rep.worst_ratio = -kInf;
  for (double x : grid) {
    if (x < x0) throw std::invalid_argument("check_rae: grid point below x0");
    const ExtReal ux = u.value(x);
    const ExtReal u2x = u.value(2 * x);
    const bool ok = u2x.to_double() <= c * ux.to_double();
    if (!ok) rep.holds_on_grid = false;
    if (ux.is_finite() && ux.value() > 0 && u2x.is_finite()) {
      const double ratio = u2x.value() / ux.value();
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.worst_x = x;
      }
    }
  }
  switch (u.family()) {
    case UtilityFamily::power:
      // U(2x) = 2^p U(x) for every x.
      rep.analytic = c >= std::pow(2.0, u.exponent());
      break;
    case UtilityFamily::log:
      // U(2x)/U(x) = 1 + log 2 / log x, decreasing for x > 1.
      rep.analytic = x0 > 1.0 && 1.0 + std::log(2.0) / std::log(x0) <= c;
      break;
    default:
      if (u.knots().size() == 1 && u.knot_values().front() == 0.0) rep.analytic = c >= 2.0;
      break;
  }
  return rep;
}

bool check_inada_zero(const UtilityFunction& u) {
  return u.family() == UtilityFamily::power || u.family() == UtilityFamily::log;
}

}  // namespace condual
