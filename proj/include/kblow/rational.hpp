#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace kblow {

using Rational = boost::multiprecision::mpq_rational;
using Integer = boost::multiprecision::mpz_int;
using RationalVector = std::vector<Rational>;

// Always "num/den", also for integers, so files round-trip with a fixed shape.
std::string to_string(const Rational& q);

// Accepts "p", "p/q" and finite decimal literals such as "-0.125".
Rational parse_rational(std::string_view text);

Integer binomial(long n, long k);
Integer factorial(long n);

Rational dot(const RationalVector& a, const RationalVector& b);
double to_double(const Rational& q);

}  // namespace kblow
