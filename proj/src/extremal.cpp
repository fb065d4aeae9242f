#include "kblow/gluing.hpp"

#include <unsupported/Eigen/AutoDiff>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace kblow::gluing {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Derivatives of v up to order 4 and the two Hamiltonian parameters.
using Grad = Eigen::Matrix<double, 6, 1>;
using AD = Eigen::AutoDiffScalar<Grad>;

AD seed(double v, int i) { return AD(v, Grad::Unit(i)); }

// s(w_u) - c - 2 b X_u in moment variables: s = m(m-1)/X - (X^{m-1} Theta_u)_XX / X^{m-1}.
template <class T>
T row_residual(int m, double x, const double* th, const T& v1, const T& v2, const T& v3, const T& v4, const T& c,
               const T& b) {
    const T X = x + th[0] * v1;
    const T Xx = 1.0 + th[1] * v1 + th[0] * v2;
    const T Xxx = th[2] * v1 + 2.0 * th[1] * v2 + th[0] * v3;
    const T Xxxx = th[3] * v1 + 3.0 * th[2] * v2 + 3.0 * th[1] * v3 + th[0] * v4;
    const T theta_u = th[0] * Xx;
    const T theta_u_x = th[1] * Xx + th[0] * Xxx;
    const T R = th[1] + th[0] * Xxx / Xx;
    const T Rx = th[2] + (th[1] * Xxx + th[0] * Xxxx) / Xx - th[0] * Xxx * Xxx / (Xx * Xx);
    const double k1 = m - 1, k2 = double(m - 1) * double(m - 2);
    const T inner = k2 * Xx * theta_u / (X * X) + k1 * (theta_u_x + Xx * R) / X + Rx;
    return double(m) * (m - 1) / X - inner / Xx - c - 2.0 * b * X;
}

template <class F>
double solve_monotone(F f, double lo, double hi) {
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) throw std::runtime_error("MomentProblem: moment root is not bracketed");
    boost::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52),
                                                    iters);
    return 0.5 * (a + b);
}

}  // namespace

MomentProblem::MomentProblem(const GluedProfile& glued, std::size_t n, double cluster) {
    cfg_ = glued.config();
    m_ = cfg_.m;
    eps_ = cfg_.eps;
    const int m = m_;
    const double e2 = eps_ * eps_, ep = cfg_.eps_prime();
    const double kappa = glued.bs().kappa(), k2 = kappa * kappa;
    const GammaSolution& gam = glued.gamma();
    x_min_ = e2 * glued.bs().divisor_moment();
    x_max_ = 0.5;
    if (n < 4 * static_cast<std::size_t>(width)) throw std::invalid_argument("MomentProblem: too few points");
    if (!(cluster > 0.0)) throw std::invalid_argument("MomentProblem: cluster must be positive");

    auto moment_at = [&](double s) { return radial::moment(Jet::variable(s), glued.potential(s)).value(); };
    const double s_in = cfg_.r_eps * cfg_.r_eps, s_out = 4.0 * s_in;
    const double x_in = moment_at(s_in), x_out = moment_at(s_out);
    const double X_lo = s_out / (1.0 + s_out);
    auto outer_x = [&](const Jet& X) {
        Jet xt = 0.5 * X;
        if (glued.with_gamma()) xt += ep * X * (1.0 - X) * gam.in_x(X).diff();
        return xt;
    };

    const double L = x_max_ - x_min_;
    const double kap = std::log(L / (cluster * e2));
    const double denom = std::expm1(kap);
    x_.resize(n);
    y_.resize(n);
    r_.resize(n);
    s_.resize(n);
    for (auto& t : th_) t.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double zeta = double(j) / double(n - 1);
        const double y = j + 1 == n ? L : L * std::expm1(kap * zeta) / denom;
        const double x = x_min_ + y;
        y_[j] = y;
        x_[j] = x;
        Jet theta;
        if (x <= x_in) {
            // closed form of the blowup profile in its own moment variable, scaled by eps^2
            Jet W;
            W.c[0] = k2 * y / e2;
            W.c[1] = k2 / e2;
            Jet Xr = 1.0 + W, Q(-(m - 1.0));
            for (int k = 0; k < m; ++k) Q += ipow(Xr, k);
            theta = (e2 / k2) * W * Q / ipow(Xr, m - 1);
            double s_floor = 1e-7 * e2;
            if (x > moment_at(s_floor) && y > 0.0) {
                const double s = solve_monotone([&](double t) { return moment_at(std::exp(t)) - x; },
                                                std::log(s_floor), std::log(s_in));
                s_[j] = std::exp(s);
                r_[j] = std::sqrt(s_[j]);
            } else {
                s_[j] = kNaN;
                r_[j] = 0.0;
            }
        } else if (x < x_out) {
            const double t = solve_monotone([&](double t) { return moment_at(std::exp(t)) - x; }, std::log(s_in),
                                            std::log(s_out));
            const double s0 = std::exp(t);
            Jet sj = Jet::variable(s0);
            Jet xs = radial::moment(sj, glued.potential(s0));
            Jet theta_s = sj * xs.diff();
            theta = compose(theta_s, revert(xs));
            s_[j] = s0;
            r_[j] = std::sqrt(s0);
        } else {
            double X0 = 1.0;
            if (j + 1 < n)
                X0 = solve_monotone([&](double X) { return outer_x(Jet::variable(X)).value() - x; }, X_lo, 1.0);
            Jet Xj = Jet::variable(X0);
            Jet xt = outer_x(Xj);
            Jet theta_X = Xj * (1.0 - Xj) * xt.diff();
            theta = compose(theta_X, revert(xt));
            s_[j] = X0 < 1.0 ? X0 / (1.0 - X0) : std::numeric_limits<double>::infinity();
            r_[j] = std::sqrt(s_[j]);
        }
        for (int k = 0; k < 4; ++k) th_[k][j] = theta.derivative(k);
    }
    th_[0][0] = 0.0;
    th_[0][n - 1] = 0.0;

    const double sM = base_scalar(m);
    h_slope_ = to_double(gam.h_slope);
    h_mean_ = to_double(gam.mean);
    if (glued.with_gamma()) {
        c_ref_ = sM - ep * (to_double(gam.h_const) - h_slope_ * h_mean_);
        b_ref_ = -ep * h_slope_;
    } else {
        c_ref_ = sM;
        b_ref_ = 0.0;
    }
    finish();
}

MomentProblem MomentProblem::base(int m, std::size_t n) {
    // The node x = 0 is the centre of the ball, where the moment formula is 0/0; start just past it.
    MomentProblem p;
    p.m_ = m;
    p.cfg_.m = m;
    p.eps_ = 0.0;
    p.x_min_ = 1e-3;
    p.x_max_ = 0.5;
    p.x_.resize(n);
    p.y_.resize(n);
    p.r_.resize(n);
    p.s_.resize(n);
    for (auto& t : p.th_) t.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double y = (p.x_max_ - p.x_min_) * double(j) / double(n - 1);
        const double x = p.x_min_ + y;
        p.y_[j] = y;
        p.x_[j] = x;
        p.th_[0][j] = x * (1.0 - 2.0 * x);
        p.th_[1][j] = 1.0 - 4.0 * x;
        p.th_[2][j] = -4.0;
        p.th_[3][j] = 0.0;
        const double X = 2.0 * x;
        p.s_[j] = X < 1.0 ? X / (1.0 - X) : std::numeric_limits<double>::infinity();
        p.r_[j] = std::sqrt(p.s_[j]);
    }
    p.c_ref_ = base_scalar(m);
    p.b_ref_ = 0.0;
    p.h_mean_ = double(m) / (m + 1);
    p.finish();
    return p;
}

void MomentProblem::finish() {
    const std::size_t n = x_.size();
    d_ = fd::Differentiator(x_, width, 4);
    quad_.assign(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double h = 0.5 * (y_[j + 1] - y_[j]);
        quad_[j] += h * std::pow(x_[j], m_ - 1);
        quad_[j + 1] += h * std::pow(x_[j + 1], m_ - 1);
    }
}

void MomentProblem::target(double g0, double g1, double& c, double& b) const {
    c = c_ref_ + g0 - g1 * h_mean_;
    b = b_ref_ + g1;
}

std::vector<double> MomentProblem::residual(const std::vector<double>& v, double g0, double g1) const {
    const std::size_t n = x_.size();
    if (v.size() != n) throw std::invalid_argument("MomentProblem: v has the wrong length");
    double c, b;
    target(g0, g1, c, b);
    std::vector<double> d[5];
    for (int o = 1; o <= 4; ++o) d[o] = d_.apply(o, v);
    std::vector<double> E(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double th[4] = {th_[0][j], th_[1][j], th_[2][j], th_[3][j]};
        E[j] = row_residual<double>(m_, x_[j], th, d[1][j], d[2][j], d[3][j], d[4][j], c, b);
    }
    return E;
}

Eigen::VectorXd MomentProblem::system(const std::vector<double>& v, double g0, double g1) const {
    const std::size_t n = x_.size();
    auto E = residual(v, g0, g1);
    Eigen::VectorXd out(n + 2);
    double q0 = 0.0, q1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = E[j];
        q0 += quad_[j] * v[j];
        q1 += quad_[j] * x_[j] * v[j];
    }
    out[n] = q0;
    out[n + 1] = q1;
    return out;
}

Eigen::MatrixXd MomentProblem::jacobian(const std::vector<double>& v, double g0, double g1) const {
    const std::size_t n = x_.size();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n + 2, n + 2);
    double c0, b0;
    target(g0, g1, c0, b0);
    for (std::size_t j = 0; j < n; ++j) {
        double dv[5];
        for (int o = 1; o <= 4; ++o) dv[o] = d_.apply_at(o, j, v);
        const double th[4] = {th_[0][j], th_[1][j], th_[2][j], th_[3][j]};
        const AD G0 = seed(g0, 4), G1 = seed(g1, 5);
        const AD c = c_ref_ + G0 - G1 * h_mean_, b = b_ref_ + G1;
        const AD e = row_residual<AD>(m_, x_[j], th, seed(dv[1], 0), seed(dv[2], 1), seed(dv[3], 2), seed(dv[4], 3), c, b);
        const Grad& g = e.derivatives();
        const int f = d_.first_index(j);
        for (int k = 0; k < width; ++k) {
            double w = 0.0;
            for (int o = 1; o <= 4; ++o) w += g[o - 1] * d_.weight(o, j, k);
            J(j, f + k) += w;
        }
        J(j, n) = g[4];
        J(j, n + 1) = g[5];
    }
    for (std::size_t j = 0; j < n; ++j) {
        J(n, j) = quad_[j];
        J(n + 1, j) = quad_[j] * x_[j];
    }
    return J;
}

void MomentProblem::perturbed_profile(const std::vector<double>& v, std::vector<double>& X,
                                      std::vector<double>& Theta) const {
    const std::size_t n = x_.size();
    auto v1 = d_.apply(1, v), v2 = d_.apply(2, v);
    X.resize(n);
    Theta.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        X[j] = x_[j] + th_[0][j] * v1[j];
        Theta[j] = th_[0][j] * (1.0 + th_[1][j] * v1[j] + th_[0][j] * v2[j]);
    }
}

NormGrid MomentProblem::grid() const {
    NormGrid g;
    g.coord = x_;
    g.r = r_;
    g.speed.resize(x_.size());
    for (std::size_t j = 0; j < x_.size(); ++j) g.speed[j] = std::sqrt(2.0 * std::max(th_[0][j], 0.0));
    return g;
}

double MomentProblem::residual_norm(const std::vector<double>& E) const {
    const Region region = eps_ > 0.0 ? Region::Blowup : Region::Base;
    const double w = 4.0 - (eps_ > 0.0 ? cfg_.delta : 0.0);
    double sup = 0.0;
    for (std::size_t j = 0; j < E.size(); ++j)
        sup = std::max(sup, std::pow(weight_scale(region, r_[j], eps_), w) * std::abs(E[j]));
    return sup;
}

double MomentProblem::solution_norm(const std::vector<double>& v) const {
    const Region region = eps_ > 0.0 ? Region::Blowup : Region::Base;
    return weighted_norm(v, grid(), eps_, eps_ > 0.0 ? cfg_.delta : 0.0, cfg_.k, region, 0.0);
}

double extremal_residual(const MomentProblem& p, const std::vector<double>& v, double g0, double g1) {
    return p.residual_norm(p.residual(v, g0, g1));
}

FixedPointResult fixed_point_iterate(const MomentProblem& p, const FixedPointOptions& opt) {
    const std::size_t n = p.size();
    FixedPointResult out;
    out.config = p.config();
    out.v.assign(n, 0.0);
    out.initial_residual = extremal_residual(p, out.v, 0.0, 0.0);

    const Eigen::MatrixXd J = p.jacobian(out.v, 0.0, 0.0);
    // Rows carry powers of the grid spacing up to h^-4; equilibrate them before measuring conditioning.
    Eigen::VectorXd row_scale = J.rowwise().lpNorm<Eigen::Infinity>();
    for (Eigen::Index i = 0; i < row_scale.size(); ++i) row_scale[i] = row_scale[i] > 0.0 ? 1.0 / row_scale[i] : 1.0;
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(row_scale.asDiagonal() * J);
    const auto& sv = svd.singularValues();
    out.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);

    const double r_eps = out.config.r_eps, eps = out.config.eps;
    const double scale = eps > 0.0 ? std::pow(r_eps, 4.0 - out.config.delta) * std::pow(eps, -out.config.theta) : 1.0;
    double prev = out.initial_residual;
    out.monotone = true;
    for (int it = 1; it <= opt.max_iters; ++it) {
        const Eigen::VectorXd step = lu.solve(p.system(out.v, out.g0, out.g1));
        for (std::size_t j = 0; j < n; ++j) out.v[j] -= step[j];
        out.g0 -= step[n];
        out.g1 -= step[n + 1];
        FixedPointIterate rec;
        rec.iteration = it;
        rec.residual = extremal_residual(p, out.v, out.g0, out.g1);
        rec.v_norm = p.solution_norm(out.v);
        rec.g_abs = std::max(std::abs(out.g0), std::abs(out.g1));
        out.history.push_back(rec);
        if (it == 1) {
            out.c1 = rec.v_norm / scale;
            out.ball_radius = 2.0 * out.c1 * scale;
        }
        if (!(rec.residual < prev)) {
            out.monotone = false;
            break;
        }
        prev = rec.residual;
        if (rec.residual <= opt.stop_ratio * out.initial_residual) break;
    }
    const auto& last = out.history.back();
    out.converged = last.residual <= 1e-2 * out.initial_residual;
    out.in_ball = last.v_norm <= out.ball_radius;
    return out;
}

FixedPointResult fixed_point_iterate(const GluedProfile& glued, const FixedPointOptions& opt) {
    MomentProblem p(glued, opt.points, opt.cluster);
    return fixed_point_iterate(p, opt);
}

std::string fixed_point_csv(const FixedPointResult& r) {
    std::ostringstream os;
    os.precision(12);
    os << "iteration,residual,v_norm,g_abs\n";
    os << 0 << ',' << r.initial_residual << ',' << 0.0 << ',' << 0.0 << '\n';
    for (const auto& h : r.history) os << h.iteration << ',' << h.residual << ',' << h.v_norm << ',' << h.g_abs << '\n';
    return os.str();
}

nlohmann::json to_json(const FixedPointResult& r) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : r.history)
        hist.push_back({{"iteration", h.iteration}, {"residual", h.residual}, {"v_norm", h.v_norm}, {"g_abs", h.g_abs}});
    return {{"schema", "kblow.fixed_point/1"},
            {"config", r.config.to_json()},
            {"initial_residual", r.initial_residual},
            {"c1", r.c1},
            {"ball_radius", r.ball_radius},
            {"condition", r.condition},
            {"monotone", r.monotone},
            {"converged", r.converged},
            {"in_ball", r.in_ball},
            {"g0", r.g0},
            {"g1", r.g1},
            {"history", hist}};
}

}  // namespace kblow::gluing
