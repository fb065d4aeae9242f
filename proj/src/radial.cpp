#include "kblow/radial.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kblow::radial {

namespace {

struct Eigen2 {
    Jet tangential;  // f
    Jet radial;      // f + s f'
};

Eigen2 eigenvalues(const Jet& s, const Potential& potential) {
    Jet a1 = potential.smooth.diff();
    Jet f = a1 + potential.log_coeff / s;
    return {f, (s * a1).diff()};
}

}  // namespace

Jet laplacian(int m, const Jet& s, const Potential& potential, const Jet& u) {
    auto [f, g] = eigenvalues(s, potential);
    Jet u1 = u.diff();
    Jet u2 = u1.diff();
    return (m - 1) * u1 / f + (u1 + s * u2) / g;
}

Jet ricci_potential(int m, const Jet& s, const Potential& potential) {
    auto [f, g] = eigenvalues(s, potential);
    return -((m - 1) * log(f) + log(g));
}

Jet scalar_curvature(int m, const Jet& s, const Potential& potential) {
    return laplacian(m, s, potential, ricci_potential(m, s, potential));
}

Jet ricci_hessian(int m, const Jet& s, const Potential& potential, const Jet& phi) {
    auto [f, g] = eigenvalues(s, potential);
    Jet rho = ricci_potential(m, s, potential);
    Jet r1 = rho.diff(), p1 = phi.diff();
    Jet r_rad = r1 + s * r1.diff();
    Jet p_rad = p1 + s * p1.diff();
    return (m - 1) * r1 * p1 / (f * f) + r_rad * p_rad / (g * g);
}

Jet gradient_dot(int, const Jet& s, const Potential& potential, const Jet& a, const Jet& b) {
    auto [f, g] = eigenvalues(s, potential);
    (void)f;
    return 2.0 * s * a.diff() * b.diff() / g;
}

Jet lichnerowicz(int m, const Jet& s, const Potential& potential, const Jet& phi) {
    Jet bilap = laplacian(m, s, potential, laplacian(m, s, potential, phi));
    Jet scal = scalar_curvature(m, s, potential);
    return bilap + ricci_hessian(m, s, potential, phi) + 0.5 * gradient_dot(m, s, potential, scal, phi);
}

Jet scalar_curvature_change(int m, const Jet& s, const Potential& potential, const Jet& u) {
    auto [f, g] = eigenvalues(s, potential);
    Jet u1 = u.diff();
    Jet du_g = (s * u1).diff();
    Jet fu = f + u1, gu = g + du_g;
    Jet rho = ricci_potential(m, s, potential);
    Jet r1 = rho.diff();
    Jet r_rad = r1 + s * r1.diff();
    // log det changes by l; the Laplacian changes through 1/f_u - 1/f and 1/g_u - 1/g.
    Jet l = (m - 1) * log1p(u1 / f) + log1p(du_g / g);
    Jet l1 = l.diff();
    Jet metric_part = -(m - 1) * r1 * u1 / (f * fu) - r_rad * du_g / (g * gu);
    Jet density_part = (m - 1) * l1 / fu + (l1 + s * l1.diff()) / gu;
    return metric_part - density_part;
}

Jet moment(const Jet& s, const Potential& potential) { return s * potential.smooth.diff() + potential.log_coeff; }

std::vector<double> geometric_grid(double s_min, double s_max, std::size_t n) {
    if (!(s_min > 0.0) || !(s_max > s_min) || n < 2) throw std::invalid_argument("geometric_grid: bad range");
    std::vector<double> g(n);
    const double a = std::log(s_min), b = std::log(s_max);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * double(i) / double(n - 1));
    return g;
}

RadialProfile RadialProfile::from_jets(int m, std::vector<double> grid, const std::function<Potential(double)>& potential_jet) {
    RadialProfile p;
    p.m = m;
    p.s = std::move(grid);
    const std::size_t n = p.s.size();
    p.f.resize(n); p.f1.resize(n); p.f2.resize(n); p.f3.resize(n);
    p.g.resize(n); p.g1.resize(n); p.g2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Potential a = potential_jet(p.s[i]);
        Jet s = Jet::variable(p.s[i]);
        Jet f = a.smooth.diff() + a.log_coeff / s;
        Jet g = (s * a.smooth.diff()).diff();
        p.f[i] = f.derivative(0);
        p.f1[i] = f.derivative(1);
        p.f2[i] = f.derivative(2);
        p.f3[i] = f.derivative(3);
        p.g[i] = g.derivative(0);
        p.g1[i] = g.derivative(1);
        p.g2[i] = g.derivative(2);
    }
    return p;
}

RadialProfile RadialProfile::from_values(int m, std::vector<double> grid, std::vector<double> f_values, int stencil) {
    if (grid.size() != f_values.size()) throw std::invalid_argument("from_values: length mismatch");
    RadialProfile p;
    p.m = m;
    p.s = std::move(grid);
    p.f = std::move(f_values);
    std::vector<double> tau(p.s.size());
    for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = std::log(p.s[i]);
    fd::Differentiator d(tau, stencil, 3);
    auto t1 = d.apply(1, p.f), t2 = d.apply(2, p.f), t3 = d.apply(3, p.f);
    const std::size_t n = p.s.size();
    p.f1.resize(n); p.f2.resize(n); p.f3.resize(n);
    p.g.resize(n); p.g1.resize(n); p.g2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = p.s[i];
        p.f1[i] = t1[i] / s;
        p.f2[i] = (t2[i] - t1[i]) / (s * s);
        p.f3[i] = (t3[i] - 3.0 * t2[i] + 2.0 * t1[i]) / (s * s * s);
        p.g[i] = p.f[i] + s * p.f1[i];
        p.g1[i] = 2.0 * p.f1[i] + s * p.f2[i];
        p.g2[i] = 3.0 * p.f2[i] + s * p.f3[i];
    }
    return p;
}

RadialProfile RadialProfile::scaled(double c) const {
    // c A(s/c): f(s/c), f1(s/c)/c, ...
    RadialProfile q = *this;
    for (std::size_t i = 0; i < size(); ++i) {
        q.s[i] = c * s[i];
        q.f1[i] = f1[i] / c;
        q.f2[i] = f2[i] / (c * c);
        q.f3[i] = f3[i] / (c * c * c);
        q.g1[i] = g1[i] / c;
        q.g2[i] = g2[i] / (c * c);
    }
    return q;
}

std::vector<double> RadialProfile::det_factor() const {
    std::vector<double> d(size());
    for (std::size_t i = 0; i < size(); ++i) d[i] = g[i] * std::pow(f[i], m - 1);
    return d;
}

std::vector<double> RadialProfile::ricci_potential() const {
    auto d = det_factor();
    for (auto& x : d) x = -std::log(x);
    return d;
}

bool RadialProfile::positive() const {
    for (std::size_t i = 0; i < size(); ++i)
        if (!(f[i] > 0.0) || !(g[i] > 0.0)) return false;
    return true;
}

void RadialProfile::require_positive() const {
    for (std::size_t i = 0; i < size(); ++i)
        if (!(f[i] > 0.0) || !(g[i] > 0.0))
            throw std::domain_error("radial metric not positive at s = " + std::to_string(s[i]));
}

namespace {

// rho' and rho'' for rho = -log det from the stored derivatives of f.
void ricci_derivatives(const RadialProfile& p, std::size_t i, double& r1, double& r2) {
    const double f = p.f[i], f1 = p.f1[i], f2 = p.f2[i];
    const double g = p.g[i], g1 = p.g1[i], g2 = p.g2[i];
    const int m = p.m;
    r1 = -((m - 1) * f1 / f + g1 / g);
    r2 = -((m - 1) * (f2 / f - f1 * f1 / (f * f)) + g2 / g - g1 * g1 / (g * g));
}

}  // namespace

std::vector<double> radial_scalar_curvature(const RadialProfile& p) {
    p.require_positive();
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double r1, r2;
        ricci_derivatives(p, i, r1, r2);
        out[i] = (p.m - 1) * r1 / p.f[i] + (r1 + p.s[i] * r2) / p.g[i];
    }
    return out;
}

GridOperators::GridOperators(const RadialProfile& p, int stencil) : p_(&p), stencil_(stencil) {
    p.require_positive();
    std::vector<double> tau(p.size());
    for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = std::log(p.s[i]);
    d_ = fd::Differentiator(tau, stencil, 3);
    scalar_ = radial_scalar_curvature(p);
    rho1_.resize(p.size());
    rho2_.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) ricci_derivatives(p, i, rho1_[i], rho2_[i]);
}

std::vector<double> GridOperators::derivative(const std::vector<double>& u, int order) const {
    if (order < 1 || order > 3) throw std::invalid_argument("derivative order must be 1..3");
    auto t1 = d_.apply(1, u);
    std::vector<double> out(u.size());
    if (order == 1) {
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = t1[i] / p_->s[i];
        return out;
    }
    auto t2 = d_.apply(2, u);
    if (order == 2) {
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = (t2[i] - t1[i]) / (p_->s[i] * p_->s[i]);
        return out;
    }
    auto t3 = d_.apply(3, u);
    for (std::size_t i = 0; i < u.size(); ++i)
        out[i] = (t3[i] - 3.0 * t2[i] + 2.0 * t1[i]) / std::pow(p_->s[i], 3);
    return out;
}

std::vector<double> GridOperators::laplacian(const std::vector<double>& u) const {
    auto u1 = derivative(u, 1), u2 = derivative(u, 2);
    const auto& p = *p_;
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        out[i] = (p.m - 1) * u1[i] / p.f[i] + (u1[i] + p.s[i] * u2[i]) / p.g[i];
    }
    return out;
}

std::vector<double> GridOperators::gradient_dot(const std::vector<double>& a, const std::vector<double>& b) const {
    auto a1 = derivative(a, 1), b1 = derivative(b, 1);
    const auto& p = *p_;
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = 2.0 * p.s[i] * a1[i] * b1[i] / p.g[i];
    return out;
}

std::vector<double> GridOperators::ricci_hessian(const std::vector<double>& phi) const {
    auto p1 = derivative(phi, 1), p2 = derivative(phi, 2);
    const auto& p = *p_;
    std::vector<double> out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double s = p.s[i], f = p.f[i], g = p.g[i];
        out[i] = (p.m - 1) * rho1_[i] * p1[i] / (f * f) +
                 (rho1_[i] + s * rho2_[i]) * (p1[i] + s * p2[i]) / (g * g);
    }
    return out;
}

std::vector<double> GridOperators::lichnerowicz(const std::vector<double>& phi) const {
    auto bilap = laplacian(laplacian(phi));
    auto ric = ricci_hessian(phi);
    auto drift = gradient_dot(scalar_, phi);
    for (std::size_t i = 0; i < phi.size(); ++i) bilap[i] += ric[i] + 0.5 * drift[i];
    return bilap;
}

}  // namespace kblow::radial
