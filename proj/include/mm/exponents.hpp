#pragma once

#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace mm {

using Rational = boost::multiprecision::cpp_rational;

// Exact parse of "3", "-2.75", "5.9", "1.5e-2" or "10/3".
Rational parse_rational(const std::string& s);
// Nearest rational with denominator 10^12; only for values that arrive as f64.
Rational rational_from_double(double v);
double to_double(const Rational& r);
std::string to_string(const Rational& r);

// Gain factor nu = 1 - (q-5)/(5q) of the I_1 / I_2 Morrey bounds.
Rational gain_nu(const Rational& q);
// sigma = min(p/nu, q).
Rational gain_sigma(const Rational& p, const Rational& q);

}  // namespace mm
