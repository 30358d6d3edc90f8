#include "mm/exponents.hpp"

#include <cctype>
#include <cmath>

#include "mm/core.hpp"

namespace mm {

namespace {

Rational pow10(int e) {
    Rational r = 1;
    for (int i = 0; i < std::abs(e); ++i) r *= 10;
    return e >= 0 ? r : Rational(1) / r;
}

Rational parse_decimal(const std::string& s) {
    std::size_t i = 0;
    bool neg = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) neg = s[i++] == '-';
    boost::multiprecision::cpp_int mant = 0;
    int scale = 0, digits = 0;
    bool dot = false;
    for (; i < s.size(); ++i) {
        const char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            mant = mant * 10 + (c - '0');
            ++digits;
            if (dot) --scale;
        } else if (c == '.' && !dot) {
            dot = true;
        } else {
            break;
        }
    }
    if (digits == 0) throw ExponentError("not a number: '" + s + "'");
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        const std::string rest = s.substr(i + 1);
        std::size_t used = 0;
        int e = 0;
        try {
            e = std::stoi(rest, &used);
        } catch (const std::exception&) {
            throw ExponentError("bad exponent in '" + s + "'");
        }
        if (used != rest.size()) throw ExponentError("trailing characters in '" + s + "'");
        scale += e;
    } else if (i != s.size()) {
        throw ExponentError("trailing characters in '" + s + "'");
    }
    Rational r = Rational(mant) * pow10(scale);
    return neg ? Rational(-r) : r;
}

}  // namespace

Rational parse_rational(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return parse_decimal(s);
    const Rational den = parse_decimal(s.substr(slash + 1));
    if (den == 0) throw ExponentError("zero denominator in '" + s + "'");
    return parse_decimal(s.substr(0, slash)) / den;
}

Rational rational_from_double(double v) {
    if (!std::isfinite(v)) throw ExponentError("non-finite exponent");
    const double scale = 1e12;
    const long long n = std::llround(v * scale);
    return Rational(n) / Rational(static_cast<long long>(scale));
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::string to_string(const Rational& r) {
    const auto n = boost::multiprecision::numerator(r);
    const auto d = boost::multiprecision::denominator(r);
    if (d == 1) return n.str();
    return n.str() + "/" + d.str();
}

Rational gain_nu(const Rational& q) { return Rational(1) - (q - 5) / (5 * q); }

Rational gain_sigma(const Rational& p, const Rational& q) {
    const Rational pn = p / gain_nu(q);
    return pn < q ? pn : q;
}

}  // namespace mm
