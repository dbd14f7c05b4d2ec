#include "condual/numeric.hpp"

#include <cctype>
#include <cstdio>

namespace condual {

namespace {

Rational parse_decimal(std::string_view s) {
  if (s.empty()) throw InputError("empty numeric literal");
  bool negative = false;
  std::size_t i = 0;
  if (s[i] == '+' || s[i] == '-') {
    negative = s[i] == '-';
    ++i;
  }
  boost::multiprecision::mpz_int mantissa = 0;
  long exponent = 0;
  bool seen_digit = false;
  bool seen_point = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      mantissa = mantissa * 10 + (c - '0');
      if (seen_point) --exponent;
      seen_digit = true;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (c == 'e' || c == 'E') {
      ++i;
      if (i >= s.size()) throw InputError("malformed exponent in '" + std::string(s) + "'");
      try {
        exponent += std::stol(std::string(s.substr(i)));
      } catch (const std::exception&) {
        throw InputError("malformed exponent in '" + std::string(s) + "'");
      }
      i = s.size();
      break;
    } else {
      throw InputError("malformed number '" + std::string(s) + "'");
    }
  }
  if (!seen_digit) throw InputError("malformed number '" + std::string(s) + "'");
  Rational r(mantissa);
  boost::multiprecision::mpz_int ten_pow = 1;
  for (long k = 0; k < std::labs(exponent); ++k) ten_pow *= 10;
  if (exponent >= 0) {
    r *= Rational(ten_pow);
  } else {
    r /= Rational(ten_pow);
  }
  return negative ? Rational(-r) : r;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_decimal(text);
  const Rational num = parse_decimal(text.substr(0, slash));
  const Rational den = parse_decimal(text.substr(slash + 1));
  if (den == 0) throw InputError("zero denominator in '" + std::string(text) + "'");
  return num / den;
}

Rational rational_from_double(double v) {
  if (!std::isfinite(v)) throw InputError("non-finite value cannot be made exact");
  return Rational(v);
}

std::string rational_to_string(const Rational& r) { return r.str(); }

std::string ext_to_string(const ExtReal& v) {
  if (v.is_pos_inf()) return "inf";
  if (v.is_neg_inf()) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v.value());
  return buf;
}

}  // namespace condual
