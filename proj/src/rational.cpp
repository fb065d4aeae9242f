#include "kblow/rational.hpp"

#include <stdexcept>

namespace kblow {

std::string to_string(const Rational& q) {
    return numerator(q).str() + "/" + denominator(q).str();
}

namespace {

// Decimal only: GMP reads a leading 0 as an octal prefix.
Integer decimal_integer(std::string s) {
    std::string sign;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        if (s[0] == '-') sign = "-";
        s.erase(s.begin());
    }
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw std::runtime_error("not a decimal integer");
    const auto nz = s.find_first_not_of('0');
    s = nz == std::string::npos ? "0" : s.substr(nz);
    return Integer(sign + s);
}

}  // namespace

Rational parse_rational(std::string_view text) {
    std::string s(text);
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
    if (s.empty()) throw std::invalid_argument("empty rational literal");
    try {
        auto slash = s.find('/');
        if (slash != std::string::npos) {
            Integer num = decimal_integer(s.substr(0, slash));
            Integer den = decimal_integer(s.substr(slash + 1));
            if (den == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
            return Rational(num, den);
        }
        auto dotpos = s.find('.');
        if (dotpos != std::string::npos) {
            std::string digits = s.substr(0, dotpos) + s.substr(dotpos + 1);
            std::size_t frac = s.size() - dotpos - 1;
            Integer den = 1;
            for (std::size_t i = 0; i < frac; ++i) den *= 10;
            if (digits == "-" || digits == "+" || digits.empty()) digits += "0";
            return Rational(decimal_integer(digits), den);
        }
        return Rational(decimal_integer(s));
    } catch (const std::runtime_error&) {
        throw std::invalid_argument("malformed rational literal '" + s + "'");
    }
}

Integer binomial(long n, long k) {
    if (k < 0 || n < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    Integer r = 1;
    for (long i = 1; i <= k; ++i) {
        r *= n - k + i;
        r /= i;
    }
    return r;
}

Integer factorial(long n) {
    if (n < 0) throw std::invalid_argument("factorial of a negative integer");
    Integer r = 1;
    for (long i = 2; i <= n; ++i) r *= i;
    return r;
}

Rational dot(const RationalVector& a, const RationalVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    Rational s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

}  // namespace kblow
