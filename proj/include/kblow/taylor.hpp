#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace kblow {

// Truncated Taylor polynomial c[0] + c[1] d + ... + c[N] d^N in a small increment d.
// c[k] is f^(k)(x0) / k!.
template <int N>
struct Taylor {
    std::array<double, N + 1> c{};

    Taylor() = default;
    Taylor(double v) { c[0] = v; }

    static Taylor variable(double x0) {
        Taylor t(x0);
        if constexpr (N >= 1) t.c[1] = 1.0;
        return t;
    }

    double value() const { return c[0]; }

    double derivative(int k) const {
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return c[k] * f;
    }

    Taylor diff() const {
        Taylor r;
        for (int k = 0; k < N; ++k) r.c[k] = (k + 1) * c[k + 1];
        return r;
    }

    // Antiderivative with value c0 at the expansion point; the top coefficient is dropped.
    Taylor integral(double c0 = 0.0) const {
        Taylor r(c0);
        for (int k = 1; k <= N; ++k) r.c[k] = c[k - 1] / k;
        return r;
    }

    // Evaluate the polynomial at increment d.
    double at(double d) const {
        double v = 0.0;
        for (int k = N; k >= 0; --k) v = v * d + c[k];
        return v;
    }

    Taylor& operator+=(const Taylor& o) { for (int k = 0; k <= N; ++k) c[k] += o.c[k]; return *this; }
    Taylor& operator-=(const Taylor& o) { for (int k = 0; k <= N; ++k) c[k] -= o.c[k]; return *this; }
    Taylor& operator*=(double a) { for (auto& x : c) x *= a; return *this; }
    Taylor& operator/=(double a) { for (auto& x : c) x /= a; return *this; }
    Taylor& operator*=(const Taylor& o) { *this = *this * o; return *this; }
    Taylor& operator/=(const Taylor& o) { *this = *this / o; return *this; }

    Taylor operator-() const { Taylor r; for (int k = 0; k <= N; ++k) r.c[k] = -c[k]; return r; }

    friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
    friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
    friend Taylor operator+(Taylor a, double b) { a.c[0] += b; return a; }
    friend Taylor operator+(double b, Taylor a) { a.c[0] += b; return a; }
    friend Taylor operator-(Taylor a, double b) { a.c[0] -= b; return a; }
    friend Taylor operator-(double b, const Taylor& a) { Taylor r = -a; r.c[0] += b; return r; }
    friend Taylor operator*(Taylor a, double b) { return a *= b; }
    friend Taylor operator*(double b, Taylor a) { return a *= b; }
    friend Taylor operator/(Taylor a, double b) { return a /= b; }

    friend Taylor operator*(const Taylor& a, const Taylor& b) {
        Taylor r;
        for (int i = 0; i <= N; ++i) {
            if (a.c[i] == 0.0) continue;
            for (int j = 0; i + j <= N; ++j) r.c[i + j] += a.c[i] * b.c[j];
        }
        return r;
    }

    friend Taylor operator/(const Taylor& a, const Taylor& b) {
        if (b.c[0] == 0.0) throw std::domain_error("Taylor division by a series with zero constant term");
        Taylor q;
        for (int k = 0; k <= N; ++k) {
            double s = a.c[k];
            for (int j = 1; j <= k; ++j) s -= b.c[j] * q.c[k - j];
            q.c[k] = s / b.c[0];
        }
        return q;
    }
    friend Taylor operator/(double a, const Taylor& b) { return Taylor(a) / b; }
};

template <int N>
Taylor<N> exp(const Taylor<N>& a) {
    Taylor<N> r(std::exp(a.c[0]));
    for (int k = 1; k <= N; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += j * a.c[j] * r.c[k - j];
        r.c[k] = s / k;
    }
    return r;
}

template <int N>
Taylor<N> log(const Taylor<N>& a) {
    if (a.c[0] <= 0.0) throw std::domain_error("Taylor log of a non-positive value");
    Taylor<N> r(std::log(a.c[0]));
    for (int k = 1; k <= N; ++k) {
        double s = k * a.c[k];
        for (int j = 1; j < k; ++j) s -= j * r.c[j] * a.c[k - j];
        r.c[k] = s / (k * a.c[0]);
    }
    return r;
}

// log(1 + a), accurate when the constant term of a is small.
template <int N>
Taylor<N> log1p(const Taylor<N>& a) {
    Taylor<N> b = a;
    b.c[0] += 1.0;
    Taylor<N> r = log(b);
    r.c[0] = std::log1p(a.c[0]);
    return r;
}

// a^p for a positive constant term.
template <int N>
Taylor<N> pow(const Taylor<N>& a, double p) {
    if (a.c[0] <= 0.0) throw std::domain_error("Taylor pow of a non-positive value");
    Taylor<N> r(std::pow(a.c[0], p));
    for (int k = 1; k <= N; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += (p * j - (k - j)) * a.c[j] * r.c[k - j];
        r.c[k] = s / (k * a.c[0]);
    }
    return r;
}

template <int N>
Taylor<N> sqrt(const Taylor<N>& a) { return pow(a, 0.5); }

template <int N>
Taylor<N> ipow(const Taylor<N>& a, int n) {
    Taylor<N> r(1.0), b = a;
    bool neg = n < 0;
    unsigned e = neg ? -n : n;
    while (e) {
        if (e & 1u) r = r * b;
        b = b * b;
        e >>= 1u;
    }
    return neg ? 1.0 / r : r;
}

// outer(inner) where inner carries the increment of outer's variable: inner.c[0] is ignored.
template <int N>
Taylor<N> compose(const Taylor<N>& outer, Taylor<N> inner) {
    inner.c[0] = 0.0;
    Taylor<N> r(outer.c[N]);
    for (int k = N - 1; k >= 0; --k) r = r * inner + outer.c[k];
    return r;
}

// Series inverse of y(d) = a1 d + a2 d^2 + ...; returns d(y).
template <int N>
Taylor<N> revert(Taylor<N> y) {
    y.c[0] = 0.0;
    if constexpr (N < 1) return Taylor<N>();
    if (y.c[1] == 0.0) throw std::domain_error("series reversion needs a nonzero linear term");
    Taylor<N> d;
    if constexpr (N >= 1) d.c[1] = 1.0 / y.c[1];
    Taylor<N> ident;
    if constexpr (N >= 1) ident.c[1] = 1.0;
    for (int it = 1; it < N; ++it) {
        Taylor<N> higher = y;
        higher.c[1] = 0.0;
        d = (ident - compose(higher, d)) / y.c[1];
    }
    return d;
}

}  // namespace kblow
