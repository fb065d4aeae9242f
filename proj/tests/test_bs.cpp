#include "doctest.h"
#include "kblow/bs.hpp"

#include <algorithm>
#include <cmath>

using kblow::Rational;
using namespace kblow::bs;
namespace radial = kblow::radial;

namespace {

Rational pow2(int k) {
    Rational r = 1;
    for (int i = 0; i < k; ++i) r *= 2;
    return r;
}

// Momentum-coordinate form of the same metric: with X = s f and Theta = s dX/ds,
// zero scalar curvature plus smooth closing on the divisor X = 1 forces
// Theta(X) = X - (m-1) X^{2-m} + (m-2) X^{1-m}.
double theta_oracle(int m, double X) { return X - (m - 1) * std::pow(X, 2 - m) + (m - 2) * std::pow(X, 1 - m); }

}  // namespace

TEST_CASE("series leading coefficients") {
    auto s3 = bs_series(3, 6);
    CHECK(s3.c[0] == Rational(1, 2));
    CHECK(s3.c[1] == 0);
    CHECK(s3.c[2] == 2);
    CHECK(s3.c[3] == Rational(-4, 3));
    auto s4 = bs_series(4, 6);
    CHECK(s4.c[3] == 4);
    CHECK(s4.c[4] == -4);
    for (int m = 3; m <= 6; ++m) {
        auto s = bs_series(m, 3 * m);
        for (int j = 1; j <= m - 2; ++j) CHECK(s.c[j] == 0);
        CHECK(s.c[m - 1] == pow2(m - 2));
        CHECK(s.c[m] == -Rational(m - 2, m) * pow2(m - 1));
        for (const auto& r : ode_residual(s)) CHECK(r == 0);
    }
}

TEST_CASE("series argument checks and the m = 2 closed form") {
    CHECK_THROWS(bs_series(3, 3));
    CHECK_THROWS(bs_series(1, 10));
    auto s2 = bs_series(2, 10);
    CHECK(s2.closed_form);
    CHECK(s2.c.size() == 2);
    for (const auto& r : ode_residual(s2)) CHECK(r == 0);
    BurnsSimanca b2(2);
    auto p = b2.profile(radial::geometric_grid(1e-3, 1e3, 30));
    for (double v : radial::radial_scalar_curvature(p)) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("numerical solution tracks the truncated series at the expected order") {
    for (int m = 3; m <= 6; ++m) {
        BurnsSimanca b(m);
        const int K = m + 3;
        auto trunc = bs_series(m, K);
        double t1 = 0.02, t2 = 0.04;
        double e1 = std::abs(b.xi(t1) - trunc.xi(t1)), e2 = std::abs(b.xi(t2) - trunc.xi(t2));
        double p = std::log(e2 / e1) / std::log(t2 / t1);
        CHECK(p >= K - 1);
        CHECK(std::abs(b.xi(1e-9) - 0.5) < 1e-15);
    }
}

TEST_CASE("numerical solution matches the momentum-coordinate closed form") {
    for (int m = 3; m <= 5; ++m) {
        BurnsSimanca b(m);
        for (double t : {0.01, 0.3, 1.0, 7.0, 300.0, 1e5}) {
            const double xi = b.xi(t), xp = b.xi_prime(t);
            const double X = xi / t, theta = (xi - t * xp) / t;
            CHECK(theta == doctest::Approx(theta_oracle(m, X)).epsilon(1e-9));
        }
    }
}

TEST_CASE("reconstructed metric is scalar flat") {
    BurnsSimanca b(3);
    auto grid = radial::geometric_grid(1e-6, 1e6, 400);
    auto p = b.profile(grid);
    CHECK(p.positive());
    double worst = 0;
    for (double v : radial::radial_scalar_curvature(p)) worst = std::max(worst, std::abs(v));
    CHECK(worst < 1e-6);
}

TEST_CASE("normalised expansion has leading coefficient -1 and positive a") {
    for (int m = 3; m <= 5; ++m) {
        BurnsSimanca b(m);
        auto a = asymptotics(b);
        CHECK(a.leading == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(a.a > 0);
        CHECK(a.a == doctest::Approx(a.a_series).epsilon(1e-4));
        CHECK(a.decay_exponent >= 4 * m - 6 - 0.5);
        CHECK(a.consistent);
        // moment at the divisor is 1/kappa^2
        CHECK(b.divisor_moment() == doctest::Approx(1.0 / (b.kappa() * b.kappa())));
    }
}

TEST_CASE("potential jets are consistent with values") {
    BurnsSimanca b(3);
    for (double s : {1e-5, 0.01, 1.0, 50.0}) {
        auto j = b.psi_jet(s);
        const double value = j.log_coeff * std::log(s) + j.smooth.value();
        const double slope = j.log_coeff / s + j.smooth.derivative(1);
        CHECK(value == doctest::Approx(b.psi_normalized(s)).epsilon(1e-12));
        const double h = 1e-5 * s;
        double fd = (b.psi_normalized(s + h) - b.psi_normalized(s - h)) / (2 * h);
        CHECK(slope == doctest::Approx(fd).epsilon(1e-6));
    }
    // the split-off logarithm carries the divisor moment
    CHECK(b.psi_jet(1e-5).log_coeff == doctest::Approx(b.divisor_moment()));
}

TEST_CASE("CSV export and metadata") {
    BurnsSimanca b(3);
    auto csv = profile_csv(b, radial::geometric_grid(0.1, 10, 5));
    CHECK(csv.rfind("s,f,scalar,psi\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    auto md = metadata(b, asymptotics(b));
    CHECK(md["schema"] == "kblow.bs_metadata/1");
    CHECK(md["series"][2] == "2/1");
}
