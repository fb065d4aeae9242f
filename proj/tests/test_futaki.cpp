#include "doctest.h"
#include "kblow/futaki.hpp"
#include "oracles.hpp"

#include <array>
#include <random>

using kblow::Rational;
using kblow::RationalVector;
using kblow::factorial;
using namespace kblow::futaki;

TEST_CASE("jet dimension examples and errors") {
    CHECK(jet_dimension(2, 3) == 6);
    CHECK(jet_dimension(3, 1) == 1);
    CHECK(jet_dimension(3, 2) == 4);
    CHECK_THROWS(jet_dimension(0, 2));
    CHECK_THROWS(jet_dimension(2, 0));
}

TEST_CASE("jet weight examples and errors") {
    CHECK(jet_weight(1, 3, {1}) == 3);
    Rational w1(3, 7), w2(-5, 2);
    CHECK(jet_weight(2, 3, {w1, w2}) == 4 * (w1 + w2));
    CHECK(jet_weight(4, 1, {1, 2, 3, 4}) == 0);
    CHECK_THROWS(jet_weight(2, 3, {1}));
}

TEST_CASE("jets agree with monomial enumeration") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> num(-9, 9), den(1, 5);
    for (int m = 1; m <= 6; ++m)
        for (int l = 1; l <= 10; ++l) {
            CHECK(jet_dimension(m, l) == oracle::jet_count(m, l));
            RationalVector w(m);
            for (auto& x : w) x = Rational(num(rng), den(rng));
            CHECK(jet_weight(m, l, w) == oracle::jet_weight_sum(m, l, w));
        }
}

TEST_CASE("futaki arithmetic") {
    CHECK(futaki({2, 1, Rational(5, 3), 0, 0}) == 0);
    CHECK(futaki({2, 2, 3, 4, 5}) == 1);
    CHECK_THROWS(futaki({2, 0, 1, 1, 1}));
    // linear in (b0, b1)
    PolarizedData x{3, Rational(1, 6), Rational(2, 3), 5, 7}, y{3, Rational(1, 6), Rational(2, 3), -2, Rational(1, 9)};
    PolarizedData s = x;
    s.b0 = 3 * x.b0 - 2 * y.b0;
    s.b1 = 3 * x.b1 - 2 * y.b1;
    CHECK(futaki(s) == 3 * futaki(x) - 2 * futaki(y));
}

TEST_CASE("projective oracle") {
    auto d = projective_weight_data(1, {0, 0});
    CHECK(d.b0 == 0);
    CHECK(d.b1 == 0);
    CHECK(d.a0 == 1);
    CHECK(d.a1 == 1);
    auto e = projective_weight_data(2, {1, 1, 1});
    CHECK(e.b0 == e.a0);
    CHECK(e.b1 == e.a1);
    CHECK(e.a0 == Rational(1, 2));
    CHECK(projective_weight_data(1, {1, -1}).b0 == 0);
    for (int m = 1; m <= 5; ++m) {
        std::vector<long> w(m + 1, 0);
        w[0] = m;
        for (int i = 1; i <= m; ++i) w[i] = -1;
        auto p = projective_weight_data(m, w);
        CHECK(futaki(p) == 0);
        CHECK(Rational(factorial(m)) * p.a0 == 1);
    }
}

namespace {

// Leading coefficients in k of the section count and total weight of kL - lE with l = k / q on
// P^m blown up at a vertex: degree-k monomials whose exponent at the vertex is at most k - l.
std::array<Rational, 4> vertex_blowup_by_counting(const std::vector<long>& w, int vertex, int q) {
    const int m = static_cast<int>(w.size()) - 1;
    const int n = m + 2;
    std::vector<std::vector<Rational>> dA(n, std::vector<Rational>(n + 1)), wA = dA;
    for (int t = 1; t <= n; ++t) {
        const int k = q * t, l = t;
        Rational count = 0, weight = 0;
        oracle::monomials(m, k, [&](const std::vector<int>& e) {
            std::vector<int> full(e.begin(), e.end());
            int used = 0;
            for (int x : e) used += x;
            full.insert(full.begin() + vertex, k - used);
            if (full[vertex] > k - l) return;
            count += 1;
            for (int i = 0; i <= m; ++i) weight += Rational(full[i] * w[i]);
        });
        Rational p = 1;
        for (int j = 0; j < n; ++j) {
            dA[t - 1][j] = wA[t - 1][j] = p;
            p *= k;
        }
        dA[t - 1][n] = count;
        wA[t - 1][n] = weight;
    }
    auto solve = [n](std::vector<std::vector<Rational>> a) {
        for (int c = 0; c < n; ++c) {
            for (int r = 0; r < n; ++r) {
                if (r == c) continue;
                Rational f = a[r][c] / a[c][c];
                for (int j = c; j <= n; ++j) a[r][j] -= f * a[c][j];
            }
        }
        std::vector<Rational> out(n);
        for (int i = 0; i < n; ++i) out[i] = a[i][n] / a[i][i];
        return out;
    };
    auto dc = solve(dA), wc = solve(wA);
    return {dc[m], dc[m - 1], wc[m + 1], wc[m]};
}

}  // namespace

TEST_CASE("projective vertex data matches a direct count on the blowup") {
    const std::vector<std::pair<std::vector<long>, int>> cases = {
        {{3, -1, -1, -1}, 1}, {{5, -2, 1, 7}, 0}, {{0, 2, -3}, 2}, {{1, 4, -2, 0, 3}, 3}};
    for (const auto& [w, vertex] : cases) {
        const int m = static_cast<int>(w.size()) - 1;
        auto d = projective_weight_data(m, w);
        auto p = projective_vertex(w, vertex);
        for (int q : {3, 4}) {
            auto c = blowup_coefficients(d, p, m);
            const Rational eps(1, q);
            auto want = vertex_blowup_by_counting(w, vertex, q);
            CHECK(c.a0.evaluate(eps) == want[0]);
            CHECK(c.a1.evaluate(eps) == want[1]);
            CHECK(c.b0.evaluate(eps) == want[2]);
            CHECK(c.b1.evaluate(eps) == want[3]);
        }
    }
    CHECK_THROWS(projective_vertex({1, 2}, 2));
}

TEST_CASE("blowup coefficients at small dimension") {
    PolarizedData d{2, Rational(3, 2), Rational(1, 4), 0, 0};
    BlowupPoint p{Rational(2), Rational(5)};
    auto c = blowup_coefficients(d, p, 2);
    CHECK(c.a1 == ExactExpansion::constant(d.a1) - ExactExpansion::monomial(Rational(1, 2), 1));
    CHECK(c.a0 == ExactExpansion::constant(d.a0) - ExactExpansion::monomial(Rational(1, 2), 2));
    CHECK(c.a0.evaluate(0) == d.a0);
    CHECK(c.a1.evaluate(0) == d.a1);
    CHECK(c.b0.evaluate(0) == d.b0);
    CHECK(c.b1.evaluate(0) == d.b1);

    Rational q(7, 3);
    PolarizedData d3{3, 1, 2, 3, 4};
    auto c3 = blowup_coefficients(d3, {0, q}, 3);
    CHECK(c3.b0 == ExactExpansion::constant(3) + ExactExpansion::monomial(q / 24, 4));
    CHECK(c3.b1 == ExactExpansion::constant(4) + ExactExpansion::monomial(q / 12, 3));
    CHECK_THROWS(blowup_coefficients(d, p, 1));
}

TEST_CASE("sign convention lives in one conversion") {
    auto p = point_from_weights(Rational(-3), Rational(4));
    CHECK(p.h_p == 3);
    CHECK(p.lap_h_p == -4);
    CHECK(p.cotangent_weight() == 4);
    CHECK(p.fibre_weight() == -3);
}

TEST_CASE("blowup futaki series against quotient oracle") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> num(-6, 6), den(1, 4);
    for (int m = 2; m <= 6; ++m)
        for (int trial = 0; trial < 5; ++trial) {
            PolarizedData d{m, Rational(1 + std::abs(num(rng)), den(rng)), Rational(num(rng), den(rng)),
                            Rational(num(rng), den(rng)), Rational(num(rng), den(rng))};
            BlowupPoint p{Rational(num(rng), den(rng)), Rational(num(rng), den(rng))};
            BlowupFutaki bf(d, p, m);
            const auto& c = bf.coefficients();
            auto dense = [](const ExactExpansion& e) {
                oracle::Poly out;
                for (const auto& [k, v] : e.coefficients()) out = oracle::padd(out, oracle::term(v, k));
                return out;
            };
            auto numr = oracle::padd(oracle::pmul(dense(c.a1), dense(c.b0)),
                                     oracle::pscale(oracle::pmul(dense(c.a0), dense(c.b1)), -1));
            const int order = m + 3;
            auto q = oracle::series_quotient(numr, dense(c.a0), order);
            auto s = bf.series_to_order(order);
            for (int k = 0; k <= order; ++k) CHECK(s.coeff(k) == q[k]);
            // exact value against the definition
            Rational eps(1, 10);
            Rational ta0 = c.a0.evaluate(eps);
            CHECK(bf.value(eps) == c.a1.evaluate(eps) / ta0 * c.b0.evaluate(eps) - c.b1.evaluate(eps));
        }
}

TEST_CASE("blowup futaki invariant under Hamiltonian shift") {
    PolarizedData d{3, Rational(1, 6), Rational(2, 3), Rational(5, 7), Rational(1, 3)};
    BlowupPoint p{Rational(-2, 5), Rational(9, 4)};
    auto [nd, np] = normalize_hamiltonian(d, p);
    CHECK(nd.b0 == 0);
    CHECK(futaki(nd) == futaki(d));
    BlowupFutaki a(d, p, 3), b(nd, np, 3);
    for (Rational eps : {Rational(1, 3), Rational(1, 17), Rational(2, 9)}) CHECK(a.value(eps) == b.value(eps));
    CHECK(a.series_to_order(8) == b.series_to_order(8));
}

TEST_CASE("blowup futaki degenerate volume") {
    PolarizedData d{2, Rational(1, 2), 0, 0, 0};
    BlowupFutaki bf(d, {1, 1}, 2);
    CHECK_THROWS(bf.value(1));
}

TEST_CASE("expansion json round trip") {
    ExactExpansion e;
    e.set(3, Rational(-7, 12));
    e.set(0, 2);
    auto j = to_json(e);
    CHECK(j["coefficients"]["3"] == "-7/12");
    CHECK(expansion_from_json(j) == e);
    ExactExpansion z;
    z.set(4, 0);
    CHECK(z.is_zero());
    PolarizedData d{4, Rational(1, 24), Rational(5, 12), 0, 0};
    auto d2 = polarized_from_json(to_json(d));
    CHECK(d2.a1 == d.a1);
    CHECK(d2.m == 4);
    BlowupPoint p{Rational(1, 3), Rational(-2)};
    auto p2 = point_from_json(to_json(p));
    CHECK(p2.lap_h_p == p.lap_h_p);
    CHECK_THROWS(point_from_json(nlohmann::json{{"h_p", "1"}, {"lap_h_p", "1"}, {"w", "1"}}));
}

TEST_CASE("rational literals are decimal") {
    CHECK(kblow::parse_rational("0.25") == kblow::Rational(1, 4));
    CHECK(kblow::parse_rational("-0.075") == kblow::Rational(-3, 40));
    CHECK(kblow::parse_rational("010") == 10);
    CHECK(kblow::parse_rational("07/012") == kblow::Rational(7, 12));
    CHECK(kblow::parse_rational(" 3 ") == 3);
    CHECK_THROWS(kblow::parse_rational("0x10"));
    CHECK_THROWS(kblow::parse_rational("1/0"));
    CHECK_THROWS(kblow::parse_rational("1e3"));
}
