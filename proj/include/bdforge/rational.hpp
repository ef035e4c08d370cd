#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace bdforge {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Canonical "p/q" (or "p" when q == 1) text form used by every JSON surface.
inline std::string rat_to_string(const Rational& r) {
    const Int num = boost::multiprecision::numerator(r);
    const Int den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

inline Rational rat_from_string(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(Int(s));
    Int num(s.substr(0, slash));
    Int den(s.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("rational with zero denominator: " + s);
    return Rational(num, den);
}

inline Rational rat_abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

// Exact power with a small non-negative integral exponent.
inline Rational rat_pow(const Rational& base, const Int& exp) {
    if (exp < 0) throw std::invalid_argument("rat_pow: negative exponent");
    Rational acc(1);
    Rational b = base;
    Int e = exp;
    while (e > 0) {
        if ((e & 1) != 0) acc *= b;
        b *= b;
        e >>= 1;
    }
    return acc;
}

}  // namespace bdforge
