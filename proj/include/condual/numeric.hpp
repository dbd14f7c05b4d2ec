#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/gmp.hpp>

namespace condual {

using Rational = boost::multiprecision::mpq_rational;

template <class T>
using Vec = std::vector<T>;

/// Per-scalar constants used by the templated LP and geometry code. Exact
/// arithmetic compares against zero, floating point against a tolerance.
template <class T>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static double eps() { return 1e-9; }
  static double from_rational(const Rational& r) { return r.convert_to<double>(); }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static Rational eps() { return Rational(0); }
  static Rational from_rational(const Rational& r) { return r; }
};

inline double to_double(double v) { return v; }
inline double to_double(const Rational& v) { return v.convert_to<double>(); }

template <class T>
T abs_value(const T& v) {
  return v < T(0) ? T(-v) : v;
}

/// Parses "p/q", "p", or a decimal literal into an exact rational. Decimal
/// literals are read digit by digit so "0.1" becomes exactly 1/10.
Rational parse_rational(std::string_view text);

/// Exact binary value of a finite double.
Rational rational_from_double(double v);

std::string rational_to_string(const Rational& r);

template <class T>
Vec<T> convert_vec(const Vec<Rational>& v) {
  Vec<T> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(ScalarTraits<T>::from_rational(x));
  return out;
}

template <class T>
Vec<double> to_double_vec(const Vec<T>& v) {
  Vec<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(to_double(x));
  return out;
}

template <class T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  T s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

/// Extended real number: finite, +inf or -inf. Arithmetic follows the
/// convex-analysis conventions: +inf absorbs finite summands, and adding
/// +inf to -inf is rejected.
template <class T>
class Extended {
 public:
  enum class Kind { finite, pos_inf, neg_inf };

  Extended() : kind_(Kind::finite), value_(0) {}
  Extended(T v) : kind_(Kind::finite), value_(std::move(v)) {}  // NOLINT: implicit by intent

  static Extended pos_inf() { return Extended(Kind::pos_inf); }
  static Extended neg_inf() { return Extended(Kind::neg_inf); }

  bool is_finite() const { return kind_ == Kind::finite; }
  bool is_pos_inf() const { return kind_ == Kind::pos_inf; }
  bool is_neg_inf() const { return kind_ == Kind::neg_inf; }
  Kind kind() const { return kind_; }

  const T& value() const {
    if (!is_finite()) throw std::logic_error("Extended::value on infinite value");
    return value_;
  }

  double to_double() const {
    switch (kind_) {
      case Kind::pos_inf: return std::numeric_limits<double>::infinity();
      case Kind::neg_inf: return -std::numeric_limits<double>::infinity();
      default: return condual::to_double(value_);
    }
  }

  friend Extended operator+(const Extended& a, const Extended& b) {
    if ((a.is_pos_inf() && b.is_neg_inf()) || (a.is_neg_inf() && b.is_pos_inf()))
      throw std::domain_error("Extended: inf - inf is undefined");
    if (a.is_pos_inf() || b.is_pos_inf()) return pos_inf();
    if (a.is_neg_inf() || b.is_neg_inf()) return neg_inf();
    return Extended(a.value_ + b.value_);
  }
  Extended& operator+=(const Extended& b) { return *this = *this + b; }

  friend Extended operator-(const Extended& a) {
    if (a.is_pos_inf()) return neg_inf();
    if (a.is_neg_inf()) return pos_inf();
    return Extended(T(-a.value_));
  }

  /// Nonnegative scaling with 0 * inf := 0 (positive homogeneity of support
  /// functions at the zero measure).
  Extended scaled(const T& lambda) const {
    if (lambda < T(0)) throw std::domain_error("Extended::scaled: negative factor");
    if (!is_finite()) return lambda == T(0) ? Extended(T(0)) : *this;
    return Extended(T(lambda * value_));
  }

  friend bool operator==(const Extended& a, const Extended& b) {
    if (a.kind_ != b.kind_) return false;
    return !a.is_finite() || a.value_ == b.value_;
  }
  friend bool operator<(const Extended& a, const Extended& b) {
    if (a.kind_ == b.kind_) return a.is_finite() && a.value_ < b.value_;
    return a.is_neg_inf() || b.is_pos_inf();
  }
  friend bool operator<=(const Extended& a, const Extended& b) { return a < b || a == b; }
  friend bool operator>(const Extended& a, const Extended& b) { return b < a; }
  friend bool operator>=(const Extended& a, const Extended& b) { return b <= a; }

 private:
  explicit Extended(Kind k) : kind_(k), value_(0) {}
  Kind kind_;
  T value_;
};

using ExtReal = Extended<double>;

inline ExtReal from_double(double v) {
  if (std::isinf(v)) return v > 0 ? ExtReal::pos_inf() : ExtReal::neg_inf();
  return ExtReal(v);
}

template <class T>
ExtReal to_ext_double(const Extended<T>& v) {
  return from_double(v.to_double());
}

/// "inf", "-inf" or a decimal rendering.
std::string ext_to_string(const ExtReal& v);

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace condual
