#include "doctest.h"
#include "kblow/gluing.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>

using namespace kblow;
using namespace kblow::gluing;

namespace {

GluingConfig config(double eps, int m = 3) {
    GluingConfig c;
    c.m = m;
    c.eps = eps;
    c.delta = m == 3 ? -1.9 : 0.0;
    return c.resolved();
}

// Template cutoff, written out again from exp(-1/x).
double step_oracle(double t) {
    auto e = [](double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; };
    return e(t - 1.0) / (e(t - 1.0) + e(2.0 - t));
}

// U(m)-invariant extremal metric on the moment interval [a, 1/2] in closed form: P = X^{m-1} Theta
// satisfies P'' = m(m-1) X^{m-2} - X^{m-1} (c + 2 b X), with Theta vanishing at both ends and
// Theta' = 1 at a, -1 at 1/2.
struct CalabiMetric {
    int m;
    double c, b, p0, p1;

    CalabiMetric(int m, double a) : m(m) {
        const double M = m;
        auto row = [&](double X, bool deriv) {
            Eigen::RowVector4d r;
            if (!deriv)
                r << -std::pow(X, M + 1) / (M * (M + 1)), -2 * std::pow(X, M + 2) / ((M + 1) * (M + 2)), 1.0, X;
            else
                r << -std::pow(X, M) / M, -2 * std::pow(X, M + 1) / (M + 1), 0.0, 1.0;
            return r;
        };
        Eigen::Matrix4d A;
        Eigen::Vector4d rhs;
        A.row(0) = row(a, false);
        rhs[0] = -std::pow(a, M);
        A.row(1) = row(a, true);
        rhs[1] = std::pow(a, M - 1) - M * std::pow(a, M - 1);
        A.row(2) = row(0.5, false);
        rhs[2] = -std::pow(0.5, M);
        A.row(3) = row(0.5, true);
        rhs[3] = -std::pow(0.5, M - 1) - M * std::pow(0.5, M - 1);
        Eigen::Vector4d sol = A.fullPivLu().solve(rhs);
        c = sol[0];
        b = sol[1];
        p0 = sol[2];
        p1 = sol[3];
    }

    double theta(double X) const {
        const double M = m;
        const double P = std::pow(X, M) - c * std::pow(X, M + 1) / (M * (M + 1)) -
                         2 * b * std::pow(X, M + 2) / ((M + 1) * (M + 2)) + p0 + p1 * X;
        return P / std::pow(X, M - 1);
    }
};

}  // namespace

TEST_CASE("cutoffs: partition of unity, nesting and the log-gradient bound") {
    std::vector<double> C;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
        GluingConfig cfg = config(eps);
        auto r = radial::geometric_grid(1e-3 * eps * eps, 100.0, 4000);
        for (auto& x : r) x = std::sqrt(x);
        Cutoffs c = cutoffs(cfg, r);
        CHECK_MESSAGE(c.supports_ok, c.violations);
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK(c.gamma1[i] + c.gamma2[i] == 1.0);
            if (c.gamma1[i] != 0.0) CHECK(c.beta1[i] == 1.0);
            CHECK(c.gamma1[i] == doctest::Approx(step_oracle(r[i] / cfg.r_eps)).epsilon(1e-14));
        }
        C.push_back(c.max_r_grad_beta1 * std::abs(std::log(eps)));
    }
    CHECK(C[1] == doctest::Approx(C[0]).epsilon(0.02));
    CHECK(C[2] == doctest::Approx(C[0]).epsilon(0.02));

    GluingConfig bad = config(1e-2);
    bad.a_lower = 0.9;
    CHECK_THROWS_AS(bad.resolved(), std::invalid_argument);
    GluingConfig bad_delta;
    bad_delta.delta = -3.0;
    CHECK_THROWS_AS(bad_delta.resolved(), std::invalid_argument);
}

TEST_CASE("config json round trip") {
    GluingConfig c = config(0.03);
    GluingConfig d = GluingConfig::from_json(c.to_json());
    CHECK(d.eps == c.eps);
    CHECK(d.r_eps == c.r_eps);
    CHECK(d.delta == c.delta);
    CHECK(d.a_upper == c.a_upper);
    CHECK(d.points == c.points);
}

TEST_CASE("Gamma solves the Lichnerowicz equation with the blowup singularity") {
    for (int m = 2; m <= 5; ++m) {
        GammaSolution g = solve_gamma(m);
        CHECK(g.c_m > 0.0);
        // independent radial operator in s
        for (double s : {0.05, 0.5, 2.0, 30.0}) {
            Jet sj = Jet::variable(s);
            const double lhs = radial::lichnerowicz(m, sj, Potential(base_potential(sj)), g.value(sj)).value();
            CHECK(std::abs(lhs - g.h(s / (1 + s))) < 1e-6 * std::max(1.0, std::abs(g.h(s / (1 + s)))));
        }
        // the distributional identity against 1 and the moment X, which vanishes at the point
        CHECK(pairing_integral(g, 0) == doctest::Approx(g.c_m));
        CHECK(std::abs(pairing_integral(g, 1)) < 1e-9 * g.c_m);
        CHECK(g.lambda == doctest::Approx(to_double(g.h_const)).epsilon(1e-10));
        // leading singular coefficient
        const double s = 1e-9;
        if (m >= 3) {
            CHECK(g.value(Jet(s)).value() * std::pow(s, m - 2) == doctest::Approx(-1.0).epsilon(1e-6));
        } else {
            CHECK(g.value(Jet(s)).value() / std::log(s) == doctest::Approx(0.5).epsilon(1e-3));
        }
        CHECK(std::abs(g.regular(Jet(s)).value()) * std::pow(s, m - 2) < 1e-6);
    }
    GammaSolution g3 = solve_gamma(3);
    CHECK(g3.power[0] == -1);
    CHECK(g3.logs[0] == 4);
    CHECK(g3.logs[1] == -6);
    CHECK(g3.h_slope == -480);
    CHECK(g3.h_const == 24);
}

TEST_CASE("glued profile is exact outside the transition annulus") {
    GluingConfig cfg = config(1e-2);
    auto plain = glued_potential(cfg, false);
    auto corrected = glued_potential(cfg, plain.bs_ptr(), plain.gamma_ptr(), true);
    const double e2 = cfg.eps * cfg.eps;

    const double s_in = 0.25 * e2;  // r = eps / 2
    for (const auto* g : {&plain, &corrected}) {
        CHECK(g->zone(s_in) == Zone::Inner);
        Potential a = g->potential(s_in), b = g->model_potential(s_in);
        CHECK(a.smooth.c == b.smooth.c);
        CHECK(a.log_coeff == b.log_coeff);
    }
    const double s_out = 9.0 * cfg.r_eps * cfg.r_eps;  // r = 3 r_eps
    CHECK(plain.zone(s_out) == Zone::Outer);
    CHECK(plain.potential(s_out).smooth.c == base_potential(Jet::variable(s_out)).c);
    for (std::size_t i = 0; i < plain.s().size(); ++i) {
        const double s = plain.s()[i];
        if (plain.zone(s) == Zone::Outer) {
            CHECK(plain.values()[i] == 0.5 * std::log1p(s));
            CHECK(residual_at(plain, s) == 0.0);
        }
    }

    // annulus midpoint against a direct evaluation of the gluing formula
    const double r = 1.5 * cfg.r_eps, s = r * r;
    const double gam = step_oracle(r / cfg.r_eps);
    const double base = 0.5 * std::log1p(s) - 0.5 * s;
    const double psi = e2 * plain.bs().psi_normalized(s / e2);
    const double Gamma = corrected.gamma().value(Jet(s)).value();
    const double direct_plain = 0.5 * s + gam * base + (1 - gam) * psi;
    const double direct_corr = 0.5 * s + gam * (base + cfg.eps_prime() * Gamma) + (1 - gam) * psi;
    CHECK(plain.potential(s).smooth.value() == doctest::Approx(direct_plain).epsilon(1e-13));
    CHECK(corrected.potential(s).smooth.value() == doctest::Approx(direct_corr).epsilon(1e-13));

    CHECK(plain.profile().positive());
    CHECK(corrected.profile().positive());
}

TEST_CASE("weighted norms") {
    for (double eps : {1e-2, 1e-4}) {
        GluingConfig cfg = config(eps);
        auto g = glued_potential(cfg, false);
        NormGrid grid = norm_grid(g);
        std::vector<double> one(grid.r.size(), 1.0), rd(grid.r.size()), g1(grid.r.size());
        CHECK(weighted_norm(one, grid, eps, 0.0, 0) == doctest::Approx(1.0));
        CHECK(weighted_norm(one, grid, eps, 0.0, 4) == doctest::Approx(1.0).epsilon(1e-6));
        for (std::size_t i = 0; i < rd.size(); ++i) {
            const double rr = grid.r[i];
            rd[i] = rr > eps && rr < 1.0 ? std::pow(rr, cfg.delta) : 0.0;
            g1[i] = gamma1(cfg, rr);
        }
        CHECK(weighted_norm(rd, grid, eps, cfg.delta, 0) == doctest::Approx(1.0).epsilon(1e-12));
        const double n4 = weighted_norm(g1, grid, eps, 0.0, 4);
        MESSAGE("eps=" << eps << " |gamma1|_{C^4_0}=" << n4);

        // homogeneity and monotonicity under domination
        const double base = weighted_norm(g1, grid, eps, -1.0, 2);
        std::vector<double> scaled = g1;
        for (auto& x : scaled) x *= -3.0;
        CHECK(weighted_norm(scaled, grid, eps, -1.0, 2) == doctest::Approx(3.0 * base));
        std::vector<double> half = rd;
        for (auto& x : half) x *= 0.5;
        CHECK(weighted_norm(half, grid, eps, cfg.delta, 0) <= weighted_norm(rd, grid, eps, cfg.delta, 0));
        CHECK(weighted_norm(g1, grid, eps, 0.0, 2, Region::Blowup, 0.5) > weighted_norm(g1, grid, eps, 0.0, 2));
    }
    const double a = []() {
        GluingConfig c1 = config(1e-2), c2 = config(1e-4);
        auto G1 = glued_potential(c1, false), G2 = glued_potential(c2, false);
        std::vector<double> f1, f2;
        for (double r : G1.r()) f1.push_back(gamma1(c1, r));
        for (double r : G2.r()) f2.push_back(gamma1(c2, r));
        return weighted_norm(f1, norm_grid(G1), 1e-2, 0, 4) / weighted_norm(f2, norm_grid(G2), 1e-4, 0, 4);
    }();
    CHECK(a == doctest::Approx(1.0).epsilon(0.05));

    NormGrid coarse{{0.0, 1.0, 2.0}, {1.0, 1.0, 1.0}, {0.1, 0.2, 0.3}};
    CHECK_THROWS_AS(weighted_norm({1.0, 1.0, 1.0}, coarse, 1e-2, 0.0, 2), std::invalid_argument);
}

TEST_CASE("residual on the inner zone and the scaling law") {
    std::vector<double> inner_ratio;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        GluingConfig cfg = config(eps);
        auto g = glued_potential(cfg, true);
        Residual r = residual_F(g);
        CHECK(std::isfinite(r.norm));
        inner_ratio.push_back(r.zone_norm[0] / std::pow(cfg.r_eps, 4.0 - cfg.delta));
    }
    // F = l(s) - eps' l(h) on the inner zone, so the constant is the base scalar curvature
    for (double q : inner_ratio) {
        CHECK(q <= 1.01 * base_scalar(3));
        CHECK(q == doctest::Approx(inner_ratio[0]).epsilon(0.05));
    }

    GluingConfig tmpl = config(0.1);
    std::vector<double> eps;
    for (int k = 3; k <= 9; ++k) eps.push_back(std::pow(10.0, -k));
    auto with = scaling_experiment(tmpl, eps, true, 2);
    auto without = scaling_experiment(tmpl, eps, false, 2);
    MESSAGE("slope with Gamma " << with.slope << ", without " << without.slope);
    CHECK(with.slope == doctest::Approx(5.9).epsilon(0.15));
    CHECK(without.slope < with.slope - 0.2);
    CHECK(scaling_csv(with).rfind("eps,r_eps,norm_F,slope_so_far\n", 0) == 0);

    CHECK_THROWS_AS(scaling_experiment(tmpl, {0.1, 0.05}), std::invalid_argument);
}

TEST_CASE("extremal residual: base sanity and agreement with F") {
    for (int m = 2; m <= 4; ++m) {
        MomentProblem base = MomentProblem::base(m, 200);
        std::vector<double> zero(base.size(), 0.0);
        CHECK(extremal_residual(base, zero, 0.0, 0.0) < 1e-10);
    }
    GluingConfig cfg = config(2e-2);
    auto g = glued_potential(cfg, true);
    MomentProblem p(g, 600);
    std::vector<double> zero(p.size(), 0.0);
    auto E = p.residual(zero, 0.0, 0.0);
    double worst = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double s = p.s_of_node()[j];
        if (!(s > 0.0) || !std::isfinite(s)) continue;
        const double w = std::pow(weight_scale(Region::Blowup, p.r()[j], cfg.eps), 4.0 - cfg.delta);
        worst = std::max(worst, w * std::abs(E[j] + residual_at(g, s)));
        scale = std::max(scale, w * std::abs(E[j]));
    }
    MESSAGE("pointwise E + F " << worst << " against " << scale);
    CHECK(worst < 1e-10 * scale);
    CHECK(extremal_residual(p, zero, 0.0, 0.0) == doctest::Approx(residual_F(g).norm).epsilon(0.02));
}

TEST_CASE("linearisation at the base metric converges to minus the Lichnerowicz operator") {
    const int m = 3;
    // v = exp(-3x) in the moment coordinate x = s / (2 (1 + s))
    auto v_of = [](double x) { return std::exp(-3 * x); };
    std::vector<double> err;
    for (std::size_t n : {25, 50, 100}) {
        MomentProblem p = MomentProblem::base(m, n);
        std::vector<double> zero(p.size(), 0.0), v(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) v[j] = v_of(p.x()[j]);
        Eigen::MatrixXd J = p.jacobian(zero, 0.0, 0.0);
        Eigen::VectorXd Jv = J.topLeftCorner(p.size(), p.size()) * Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
        double e = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double x = p.x()[j];
            if (x < 0.05 || x > 0.45) continue;
            const double s = 2 * x / (1 - 2 * x);
            Jet sj = Jet::variable(s);
            Jet xs = sj / (2.0 * (1.0 + sj));
            Jet u = exp(-3.0 * xs);
            const double L = radial::lichnerowicz(m, sj, Potential(base_potential(sj)), u).value();
            e = std::max(e, std::abs(Jv[j] + L));
        }
        err.push_back(e);
    }
    const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
    MESSAGE("linearisation errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(o1 > 2.5);
    CHECK(o2 > 2.5);
}

TEST_CASE("fixed point: Newton step, contraction and the exact extremal metric") {
    GluingConfig cfg = config(2e-2);
    auto g = glued_potential(cfg, true);
    MomentProblem p(g, 1200);
    std::vector<double> v(p.size(), 0.0);
    const double r0 = extremal_residual(p, v, 0.0, 0.0);
    const Eigen::VectorXd step = p.jacobian(v, 0.0, 0.0).partialPivLu().solve(p.system(v, 0.0, 0.0));
    for (std::size_t j = 0; j < p.size(); ++j) v[j] -= step[j];
    CHECK(extremal_residual(p, v, -step[p.size()], -step[p.size() + 1]) < r0);

    FixedPointResult fp = fixed_point_iterate(p);
    CHECK(fp.monotone);
    CHECK(fp.converged);
    CHECK(fp.in_ball);
    CHECK(fp.history.size() <= 20);

    CalabiMetric cal(3, p.x_min());
    double c, b;
    p.target(fp.g0, fp.g1, c, b);
    CHECK(c == doctest::Approx(cal.c).epsilon(1e-8));
    CHECK(b == doctest::Approx(cal.b).epsilon(1e-2));
    std::vector<double> X, Theta;
    p.perturbed_profile(fp.v, X, Theta);
    double worst = 0.0;
    for (std::size_t j = 0; j < X.size(); ++j) worst = std::max(worst, std::abs(Theta[j] - cal.theta(X[j])));
    MESSAGE("max |Theta_u - Theta_extremal| = " << worst);
    CHECK(worst < 1e-7);

    // the split f = s - eps' h + g: |g| against eps, reported only
    FixedPointResult fp2 = fixed_point_iterate(MomentProblem(glued_potential(config(1e-2), g.bs_ptr(), g.gamma_ptr(), true), 1200));
    const double g_a = std::max(std::abs(fp.g0), std::abs(fp.g1)), g_b = std::max(std::abs(fp2.g0), std::abs(fp2.g1));
    MESSAGE("fitted kappa " << std::log(g_a / g_b) / std::log(2.0));
    CHECK(fixed_point_csv(fp).rfind("iteration,residual,v_norm,g_abs\n", 0) == 0);
}
