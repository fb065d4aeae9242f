#include "doctest.h"
#include "kblow/moment.hpp"

#include <cmath>
#include <random>

using namespace kblow;
using namespace kblow::moment;

namespace {

Point pt(std::initializer_list<std::complex<double>> v) {
    Point p(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (auto z : v) p(i++) = z;
    return p;
}

Vector vec(std::initializer_list<double> v) {
    Vector p(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double z : v) p(i++) = z;
    return p;
}

// S^1 on C with mu = |z|^2/2 - |x|^2/2 and a constant shift e: |exp(i xi) x| = exp(-xi)|x|, so
// |x|^2 exp(-2 xi)/2 - |x|^2/2 + e = 0.
double circle_xi(double e, double x2) { return -0.5 * std::log1p(-2.0 * e / x2); }

// Plain two-variable Newton for the diagonal T^2 problem, sharing nothing with the library:
// components 1/2 |x_i|^2 exp(-2 xi_i) - 1/2 + e_i with a difference-quotient Jacobian.
Vector diagonal_oracle(const Vector& e, const Vector& x2) {
    Vector xi = Vector::Zero(2);
    auto F = [&](const Vector& v) {
        Vector r(2);
        for (int i = 0; i < 2; ++i) r(i) = 0.5 * x2(i) * std::exp(-2 * v(i)) - 0.5 + e(i);
        return r;
    };
    for (int it = 0; it < 60; ++it) {
        Matrix J(2, 2);
        for (int k = 0; k < 2; ++k) {
            Vector d = Vector::Zero(2);
            d(k) = 1e-6;
            J.col(k) = (F(xi + d) - F(xi - d)) / 2e-6;
        }
        xi -= J.inverse() * F(xi);
    }
    return xi;
}

}  // namespace

TEST_CASE("stabilizer examples") {
    auto T2 = ActionModel::diagonal(2);
    CHECK(stabilizer_at(T2, pt({1.0, 1.0})).dim() == 0);
    auto s = stabilizer_at(T2, pt({1.0, 0.0}));
    REQUIRE(s.dim() == 1);
    CHECK(std::abs(s.basis(0, 0)) < 1e-15);
    CHECK(std::abs(std::abs(s.basis(1, 0)) - 1.0) < 1e-15);
    CHECK(stabilizer_at(T2, pt({0.0, 0.0})).dim() == 2);
}

TEST_CASE("stabilizer basis is orthonormal for a non-standard inner product") {
    ActionModel M({{1, 1, 0}, {0, 1, 1}, {1, 0, -1}}, {0, 0, 0},
                  {{2, Rational(1, 2), 0}, {Rational(1, 2), 1, 0}, {0, 0, 3}});
    auto s = stabilizer_at(M, pt({0.0, 1.0, 0.0}));
    REQUIRE(s.dim() == 2);
    for (int a = 0; a < 2; ++a) {
        // annihilates the weight column of the supported coordinate
        CHECK(std::abs(M.weights().col(1).dot(s.basis.col(a))) < 1e-14);
        for (int b = 0; b < 2; ++b) CHECK(M.dot(s.basis.col(a), s.basis.col(b)) == doctest::Approx(a == b ? 1.0 : 0.0));
    }
    auto c = orthogonal_complement(M, s);
    REQUIRE(c.dim() == 1);
    CHECK(std::abs(M.dot(c.basis.col(0), s.basis.col(0))) < 1e-14);
}

TEST_CASE("stabilizer dimension is upper semicontinuous under axis degenerations") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> w(-2, 2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<long>> W(3, std::vector<long>(3));
        for (auto& row : W)
            for (auto& v : row) v = w(rng);
        ActionModel M(W, {0, 0, 0}, {});
        Point generic = pt({0.7, 1.1, 0.4});
        const int d0 = stabilizer_at(M, generic).dim();
        for (int k = 0; k < 3; ++k) {
            Point degenerate = generic;
            degenerate(k) = 0.0;
            const int d1 = stabilizer_at(M, degenerate).dim();
            CHECK(d1 >= d0);
            degenerate(k) = 1e-3;  // nearby point off the axis
            CHECK(stabilizer_at(M, degenerate).dim() == d0);
        }
    }
}

TEST_CASE("moment components satisfy d mu = iota_X omega") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    ActionModel M({{1, -2, 0}, {3, 1, 1}}, {Rational(1, 3), -1}, {{1, 0}, {0, 2}});
    std::vector<Point> sample;
    for (int k = 0; k < 20; ++k) sample.push_back(pt({{g(rng), g(rng)}, {g(rng), g(rng)}, {g(rng), g(rng)}}));
    CHECK(M.moment_property_defect(sample) < 1e-8);
}

TEST_CASE("action model validation and JSON") {
    CHECK_THROWS(ActionModel({{1}}, {0}, {{-1}}));
    CHECK_THROWS(ActionModel({{1, 0}, {0, 1}}, {0, 0}, {{1, 2}, {2, 1}}));  // indefinite
    CHECK_THROWS(ActionModel({{1, 0}, {0, 1}}, {0, 0}, {{1, 0}, {1, 1}}));  // not symmetric
    CHECK_THROWS(ActionModel({{1, 0}, {0}}, {0, 0}, {}));
    CHECK_THROWS(ActionModel({{1}}, {0, 0}, {}));
    ActionModel M({{1, 2}}, {Rational(3, 4)}, {{Rational(5, 2)}}, 3.0);
    auto j = M.to_json();
    CHECK(j["schema"] == "kblow.action_model/1");
    auto back = ActionModel::from_json(j);
    CHECK(back.to_json() == j);
    nlohmann::json bad = j;
    bad["torus_rank"] = 2;
    CHECK_THROWS(ActionModel::from_json(bad));
    nlohmann::json dec = {{"weight_matrix", {{1}}}, {"moment_offset", {0.25}}};
    CHECK(ActionModel::from_json(dec).moment_components(pt({1.0}))(0) == doctest::Approx(0.25));
}

TEST_CASE("projected map examples") {
    auto S1 = ActionModel::circle();
    CHECK(projected_map(S1, pt({1.0}), vec({0.0})).value.norm() == 0.0);
    for (double t : {-0.3, 0.1, 0.7}) {
        auto p = projected_map(S1, pt({1.0}), vec({t}));
        CHECK(p.value(0) == doctest::Approx(0.5 * std::exp(-2 * t) - 0.5).epsilon(1e-14));
        CHECK(p.xi_norm == doctest::Approx(std::abs(t)));
    }
    // mu(x) in h_x for x on an axis: projection removes it
    ActionModel T2({{1, 0}, {0, 1}}, {Rational(1, 2), 2}, {});
    Point x = pt({1.0, 0.0});
    CHECK(T2.moment(x).norm() > 1.0);
    CHECK(projected_map(T2, x, vec({0.0, 0.0})).value.norm() < 1e-15);
    // leaving the chart is flagged
    ActionModel small({{1}}, {Rational(1, 2)}, {}, 2.0);
    auto far = projected_map(small, pt({1.0}), vec({-5.0}));
    CHECK_FALSE(far.in_chart);
    CHECK(far.xi_norm == doctest::Approx(5.0));
}

TEST_CASE("polynomial perturbation grammar") {
    auto p = parse_polynomial("0.5 - 2*q1*q2^2 + q2 + 3*q1", 2);
    CHECK(p.size() == 4);
    Point z = pt({std::complex<double>(1, 1), 0.5});  // q1 = 2, q2 = 0.25
    CHECK(evaluate(p, z) == doctest::Approx(0.5 - 2 * 2 * 0.0625 + 0.25 + 6));
    CHECK_THROWS(parse_polynomial("", 2));
    CHECK_THROWS(parse_polynomial("q3", 2));
    CHECK_THROWS(parse_polynomial("1 +", 2));
    CHECK_THROWS(parse_polynomial("2 q1 q2", 2));
    CHECK_THROWS(parse_polynomial("q1^", 2));

    ActionModel M({{1, 0}, {0, 1}}, {Rational(1, 2), Rational(1, 2)}, {}, 2.0);
    auto pm = PerturbedMap::polynomial(M, {"0.001*q1", "-0.002 + 0.0005*q1*q2"});
    // q_i <= R^2 = 4 on the chart
    CHECK(pm.sup_bound() == doctest::Approx(std::hypot(0.004, 0.002 + 0.0005 * 16)));
    auto unbounded = ActionModel::diagonal(2);
    auto wide = PerturbedMap::polynomial(unbounded, {"q1", "0"});
    CHECK(std::isinf(wide.sup_bound()));
    CHECK(wide.scaled(0.0).sup_bound() == 0.0);
    // over-large perturbations are refused by the threshold, not by an invalid scaled map
    CHECK_THROWS_WITH_AS(solve_deformed(unbounded, pt({1.0, 1.0}), wide), doctest::Contains("exceeds the model threshold"),
                         std::invalid_argument);
    auto j = PerturbedMap::from_json(M, {{"constant", {0.001, 0.0}}});
    CHECK(j.sup_bound() == doctest::Approx(0.001));
    CHECK_THROWS(PerturbedMap::from_json(M, {{"other", 1}}));
}

TEST_CASE("unperturbed problem returns xi = 0") {
    auto T2 = ActionModel::diagonal(2);
    auto pm = PerturbedMap::constant(T2, Vector::Zero(2));
    auto r = solve_deformed(T2, pt({1.0, 1.0}), pm);
    CHECK(r.xi.norm() == 0.0);
    CHECK(r.residual < 1e-15);
}

TEST_CASE("circle closed form") {
    for (double g : {1.0, 2.5}) {
        for (double x2 : {1.0, 0.64}) {
            Point x = pt({std::sqrt(x2)});
            ActionModel M({{1}}, {parse_rational(std::to_string(x2 / 2))}, {{parse_rational(std::to_string(g))}});
            for (double e : {1e-9, -3e-5, 0.01, -0.05, 0.08}) {
                // the perturbation is a Lie-algebra vector; its dual component is g e
                auto pm = PerturbedMap::constant(M, vec({e / g}));
                auto r = solve_deformed(M, x, pm);
                CHECK(r.residual < 1e-12);
                CHECK(r.xi(0) == doctest::Approx(circle_xi(e, x2)).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("diagonal torus matches an independent Newton and scales linearly") {
    auto T2 = ActionModel::diagonal(2);
    Point x = pt({1.0, 1.0});
    double prev = 0;
    for (double e : {1e-2, 1e-3, 1e-4}) {
        Vector shift = e * vec({1.0, -1.0});
        auto r = solve_deformed(T2, x, PerturbedMap::constant(T2, shift));
        CHECK(r.residual < 1e-10);
        Vector oracle = diagonal_oracle(shift, vec({1.0, 1.0}));
        CHECK((r.xi - oracle).norm() < 1e-10);
        const double ratio = r.xi.norm() / e;
        if (prev > 0) CHECK(ratio == doctest::Approx(prev).epsilon(0.02));
        prev = ratio;
    }
    CHECK(prev == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("torus reduction when mu(x) is a nonzero stabilizer element") {
    ActionModel T2({{1, 0}, {0, 1}}, {Rational(1, 2), Rational(3, 2)}, {});
    Point x = pt({1.0, 0.0});
    auto pm = PerturbedMap::constant(T2, vec({0.01, 0.1}));
    auto r = solve_deformed(T2, x, pm);
    CHECK(r.torus.dim() == 1);
    CHECK(r.search.dim() == 1);
    CHECK(std::abs(T2.dot(r.torus.basis.col(0), r.search.basis.col(0))) < 1e-15);
    CHECK(r.xi(0) == doctest::Approx(-0.5 * std::log1p(-0.02)).epsilon(1e-10));
    CHECK(std::abs(r.xi(1)) < 1e-15);
    CHECK(r.full_residual < 1e-12);
}

TEST_CASE("preconditions") {
    auto T2 = ActionModel::diagonal(2);
    CHECK_THROWS_AS(solve_deformed(T2, pt({2.0, 1.0}), PerturbedMap::constant(T2, Vector::Zero(2))),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_deformed(T2, pt({1.0, 1.0}), PerturbedMap::constant(T2, vec({0.4, 0.0}))),
                    std::invalid_argument);
    auto other = ActionModel::diagonal(2);
    CHECK_THROWS(solve_deformed(T2, pt({1.0, 1.0}), PerturbedMap::constant(other, Vector::Zero(2))));
}

TEST_CASE("equivariance under the compact torus") {
    ActionModel M({{1, 2}, {-1, 1}}, {Rational(3, 2), Rational(0)}, {{2, 1}, {1, 3}}, 3.0);
    Point x = pt({1.0, 1.0});
    auto pm = PerturbedMap::polynomial(M, {"0.0003*q1 - 0.001", "0.00002*q2*q1"});
    // polynomial in |z_i|^2 is torus invariant, so the rotated problem is the same problem
    auto base = solve_deformed(M, x, pm);
    for (double th : {0.3, 1.7}) {
        Vector theta = vec({th, -0.5 * th});
        auto r = solve_deformed(M, M.rotate(x, theta), pm);
        CHECK((r.y - M.rotate(base.y, theta)).norm() < 1e-12);
    }
}

TEST_CASE("solutions shrink with the perturbation") {
    ActionModel M({{2, 1}, {1, 3}}, {Rational(3, 2), 2}, {});
    Point x = pt({1.0, 1.0});
    double last = 1e9;
    for (double e : {1e-2, 1e-4, 1e-6, 1e-8}) {
        auto r = solve_deformed(M, x, PerturbedMap::constant(M, vec({e, 2 * e})));
        CHECK(r.residual < 1e-12);
        CHECK(r.xi.norm() < last);
        last = r.xi.norm();
    }
    CHECK(last < 1e-7);
}

TEST_CASE("homotopy fallback engages when plain Newton is starved") {
    auto S1 = ActionModel::circle();
    DeformOptions o;
    o.max_newton = 3;
    auto pm = PerturbedMap::constant(S1, vec({0.2}));
    o.sup_threshold = 1.0;
    auto r = solve_deformed(S1, pt({1.0}), pm, o);
    CHECK(r.used_homotopy);
    CHECK(r.residual < 1e-12);
    CHECK(r.xi(0) == doctest::Approx(circle_xi(0.2, 1.0)).epsilon(1e-10));
    o.homotopy_steps = 1;
    o.max_newton = 1;
    CHECK_THROWS_AS(solve_deformed(S1, pt({1.0}), PerturbedMap::constant(S1, vec({0.45})), o), DeformError);
}

TEST_CASE("deform result JSON") {
    auto T2 = ActionModel::diagonal(2);
    auto r = solve_deformed(T2, pt({1.0, 1.0}), PerturbedMap::constant(T2, vec({1e-3, 0})));
    auto j = to_json(r);
    CHECK(j["schema"] == "kblow.deform_result/1");
    CHECK(j["converged"] == true);
    CHECK(j["xi"].size() == 2);
}

TEST_CASE("Ricci form and Laplacian of the rotation Hamiltonian") {
    // flat: A = s, h = s, Laplacian constant and rho = 0
    {
        auto grid = radial::geometric_grid(0.1, 10, 500);
        auto flat = radial::RadialProfile::from_jets(1, grid, [](double s) { return radial::Potential(radial::variable(s)); });
        std::vector<double> h(grid);
        CHECK(ricci_moment_check(flat, h).max_defect < 1e-9);
    }
    auto fs = [](double s) { return radial::Potential(log(1.0 + radial::variable(s))); };
    auto h = [](Quad s) { return s / (1 + s); };
    auto ref = ricci_moment_refinement(1, fs, h, 0.1, 10, 2500, 3);
    CHECK(ref.defects.back() < 1e-6);
    CHECK(ref.converging);
    for (double p : ref.orders) CHECK(p > 1.8);
    // c omega: h -> c h, rho unchanged; the identity and its discretisation are unchanged
    auto fs2 = [](double s) { return radial::Potential(2.0 * log(1.0 + radial::variable(s))); };
    auto h2 = [](Quad s) { return 2 * s / (1 + s); };
    auto ref2 = ricci_moment_refinement(1, fs2, h2, 0.1, 10, 2500, 2);
    CHECK(ref2.defects[0] == doctest::Approx(ref.defects[0]).epsilon(1e-6));
    // higher dimension: Fubini-Study on P^2, same identity
    auto r3 = ricci_moment_refinement(2, fs, h, 0.1, 10, 2500, 2);
    CHECK(r3.defects.back() < 1e-5);
    CHECK(r3.orders[0] > 1.8);
    // a wrong Hamiltonian is caught
    auto wrong = [](Quad s) { return s / (1 + s) + s * s / 50; };
    auto bad = ricci_moment_refinement(1, fs, wrong, 0.1, 10, 1000, 1);
    CHECK(bad.defects[0] > 1e-3);
}
