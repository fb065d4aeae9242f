#include "kblow/bs.hpp"

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kblow::bs {

using radial::Jet;

BSSeries bs_series(int m, int order) {
    if (m < 2) throw std::invalid_argument("bs_series: m must be at least 2");
    BSSeries out;
    out.m = m;
    if (m == 2) {
        out.closed_form = true;
        out.c = {Rational(1, 2), Rational(1)};
        return out;
    }
    if (order < m + 1) throw std::invalid_argument("bs_series: order must be at least m+1");
    // (xi^m)' = m(m-1) t^{m-2} xi - m(m-2) t^{m-1}; p = xi^m via the power recurrence.
    std::vector<Rational> c(order + 1, Rational(0)), p(order + 1, Rational(0));
    c[0] = Rational(1, 2);
    p[0] = Rational(1);
    for (int i = 0; i < m; ++i) p[0] *= c[0];
    const Rational c0pow = p[0] * 2;  // c0^{m-1}
    for (int k = 1; k <= order; ++k) {
        Rational pk = 0;
        if (k - m + 1 >= 0) pk += Rational(m) * (m - 1) * c[k - m + 1];
        if (k == m) pk -= Rational(m) * (m - 2);
        pk /= k;
        Rational rest = 0;
        for (int j = 1; j < k; ++j) rest += Rational((m + 1) * j - k) * c[j] * p[k - j];
        rest /= Rational(k) * c[0];
        c[k] = (pk - rest) / (Rational(m) * c0pow);
        p[k] = pk;
    }
    out.c = std::move(c);
    return out;
}

double BSSeries::xi(double t) const {
    double v = 0;
    for (int j = order(); j >= 0; --j) v = v * t + to_double(c[j]);
    return v;
}

double BSSeries::psi(double t) const {
    if (closed_form) throw std::logic_error("psi series is not defined for m = 2");
    double v = 0;
    for (int j = order(); j >= 2; --j) v += -to_double(c[j]) * std::pow(t, j - 1) / (j - 1);
    return v;
}

std::vector<Rational> ode_residual(const BSSeries& s) {
    const int n = s.order();
    const int m = s.m;
    auto mul = [n](const std::vector<Rational>& a, const std::vector<Rational>& b) {
        std::vector<Rational> r(n + 1, Rational(0));
        for (int i = 0; i <= n; ++i)
            for (int j = 0; i + j <= n; ++j) r[i + j] += a[i] * b[j];
        return r;
    };
    std::vector<Rational> xi(s.c.begin(), s.c.end());
    xi.resize(n + 1, Rational(0));
    std::vector<Rational> d(n + 1, Rational(0));
    for (int j = 1; j <= n; ++j) d[j - 1] = xi[j] * j;
    std::vector<Rational> pw(n + 1, Rational(0));
    pw[0] = 1;
    for (int i = 0; i < m - 1; ++i) pw = mul(pw, xi);
    auto r = mul(pw, d);
    for (int j = 0; j + m - 2 <= n; ++j) r[j + m - 2] -= Rational(m - 1) * xi[j];
    if (m - 1 <= n) r[m - 1] += Rational(m - 2);
    r.resize(n);  // through t^{n-1}
    return r;
}

namespace {

using State = std::array<double, 2>;  // eta, psi in lambda = log t

struct Rhs {
    int m;
    void operator()(const State& y, State& dy, double lambda) const {
        const double t = std::exp(lambda);
        const double tm1 = std::pow(t, m - 1);
        const double xi = 0.5 + tm1 * y[0];
        dy[0] = ((m - 1) * xi - (m - 2) * t) / std::pow(xi, m - 1) - (m - 1) * y[0];
        dy[1] = -std::pow(t, m - 2) * y[0];
    }
};

// (1+y)^{1-m} ((1+y)^m - (m-1)(1+y) + (m-2)), expanded so that small y loses no digits.
template <class T>
T flat_theta(int m, const T& y) {
    T poly = y;
    T yk = y;
    double binom = m;
    for (int k = 2; k <= m; ++k) {
        yk = yk * y;
        binom = binom * (m - k + 1) / k;
        poly = poly + binom * yk;
    }
    return poly / pow(1.0 + y, double(m - 1));
}

double flat_theta(int m, double y) {
    double poly = y, yk = y, binom = m;
    for (int k = 2; k <= m; ++k) {
        yk *= y;
        binom = binom * (m - k + 1) / k;
        poly += binom * yk;
    }
    return poly / std::pow(1.0 + y, m - 1);
}

struct InnerRhs {
    int m;
    void operator()(const State& y, State& dy, double) const {
        dy[0] = flat_theta(m, y[0]);
        dy[1] = y[0];
    }
};

double kappa_for(int m) {
    if (m == 2) return std::sqrt(2.0);
    // psi ~ -C t^{m-2}, C = c_{m-1}/(m-2) = 2^{m-2}/(m-2); kappa^{2m-2} = C.
    const double C = std::pow(2.0, m - 2) / (m - 2);
    return std::pow(C, 1.0 / (2 * m - 2));
}

}  // namespace

BurnsSimanca::BurnsSimanca(int m, SolveOptions opt) : m_(m), opt_(opt) {
    if (m < 2) throw std::invalid_argument("Burns-Simanca metric needs m >= 2");
    series_ = bs_series(m, m == 2 ? 1 : std::max(opt_.series_order, m + 1));
    kappa_ = kappa_for(m);
    if (m == 2) {
        last_good_t_ = std::numeric_limits<double>::infinity();
        return;
    }
    integrate();
}

void BurnsSimanca::integrate() {
    namespace ode = boost::numeric::odeint;
    if (!(opt_.t_seed < opt_.t_switch) || !(opt_.t_switch < opt_.t_max))
        throw std::invalid_argument("Burns-Simanca: need t_seed < t_switch < t_max");
    const double l0 = std::log(opt_.t_seed), l1 = std::log(opt_.t_switch);
    const double share = (l1 - l0) / (std::log(opt_.t_max) - l0);
    const int n = std::max(static_cast<int>(opt_.steps * share), 2);
    State y;
    {
        double eta = 0;
        for (int j = series_.order(); j >= m_ - 1; --j) eta = eta * opt_.t_seed + to_double(series_.c[j]);
        y = {eta, series_.psi(opt_.t_seed)};
    }
    nodes_.clear();
    nodes_.push_back({l0, y[0], y[1]});
    last_good_t_ = opt_.t_seed;
    auto stepper = ode::make_controlled(opt_.abs_tol, opt_.rel_tol, ode::runge_kutta_fehlberg78<State>());
    Rhs rhs{m_};
    const double dl = (l1 - l0) / (n - 1);
    for (int i = 1; i < n; ++i) {
        const double a = l0 + (i - 1) * dl, b = l0 + i * dl;
        ode::integrate_adaptive(stepper, rhs, y, a, b, dl / 4);
        const double t = std::exp(b);
        const double xi = 0.5 + std::pow(t, m_ - 1) * y[0];
        const double xip = ((m_ - 1) * std::pow(t, m_ - 2) * xi - (m_ - 2) * std::pow(t, m_ - 1)) / std::pow(xi, m_ - 1);
        if (!(xi > 0.0) || !(xi - t * xip > 0.0) || !std::isfinite(y[0]) || !std::isfinite(y[1]))
            throw std::runtime_error("Burns-Simanca integration lost positivity; last good t = " +
                                     std::to_string(last_good_t_));
        nodes_.push_back({b, y[0], y[1]});
        last_good_t_ = t;
    }
    integrate_inner();
}

void BurnsSimanca::integrate_inner() {
    namespace ode = boost::numeric::odeint;
    const double ts = opt_.t_switch;
    const Node& last = nodes_.back();
    const double xi_s = 0.5 + std::pow(ts, m_ - 1) * last.eta;
    // A = s/2 + psi, ahat = A - log s at s = 1/t_switch
    State y{xi_s / ts - 1.0, 0.5 / ts + last.psi + std::log(ts)};
    const double u0 = -std::log(ts), u1 = -std::log(opt_.t_max);
    const int n = std::max(opt_.steps - static_cast<int>(nodes_.size()) + 1, 2);
    const double du = (u1 - u0) / (n - 1);
    inner_.clear();
    inner_.push_back({u0, y[0], y[1]});
    auto stepper = ode::make_controlled(opt_.abs_tol, opt_.rel_tol, ode::runge_kutta_fehlberg78<State>());
    for (int i = 1; i < n; ++i) {
        const double a = u0 + (i - 1) * du, b = u0 + i * du;
        ode::integrate_adaptive(stepper, InnerRhs{m_}, y, a, b, du / 4);
        if (!(y[0] > 0.0) || !std::isfinite(y[1]))
            throw std::runtime_error("Burns-Simanca integration lost positivity; last good t = " +
                                     std::to_string(last_good_t_));
        inner_.push_back({b, y[0], y[1]});
        last_good_t_ = std::exp(-b);
    }
}

void BurnsSimanca::inner_state_at(double sigma, double& y, double& ahat) const {
    namespace ode = boost::numeric::odeint;
    const double u = std::log(sigma);
    const double du = inner_[1].u - inner_[0].u;  // negative
    if (u > inner_[0].u || u < inner_.back().u * (1 + 1e-12))
        throw std::domain_error("Burns-Simanca: s outside the near-divisor range");
    std::size_t i = static_cast<std::size_t>(std::floor((u - inner_[0].u) / du));
    i = std::min(i, inner_.size() - 1);
    State st{inner_[i].y, inner_[i].ahat};
    if (u != inner_[i].u) {
        auto stepper = ode::make_controlled(opt_.abs_tol, opt_.rel_tol, ode::runge_kutta_fehlberg78<State>());
        ode::integrate_adaptive(stepper, InnerRhs{m_}, st, inner_[i].u, u, (u - inner_[i].u) / 2);
    }
    y = st[0];
    ahat = st[1];
}

void BurnsSimanca::state_at(double t, double& eta, double& psi) const {
    if (!(t > 0.0)) throw std::domain_error("Burns-Simanca: t must be positive");
    if (t <= opt_.t_seed) {
        eta = 0;
        for (int j = series_.order(); j >= m_ - 1; --j) eta = eta * t + to_double(series_.c[j]);
        psi = series_.psi(t);
        return;
    }
    if (t > opt_.t_switch) throw std::logic_error("state_at called past the switch point");
    namespace ode = boost::numeric::odeint;
    const double lam = std::log(t);
    const double dl = nodes_[1].lambda - nodes_[0].lambda;
    std::size_t i = static_cast<std::size_t>(std::floor((lam - nodes_[0].lambda) / dl));
    i = std::min(i, nodes_.size() - 1);
    State y{nodes_[i].eta, nodes_[i].psi};
    if (lam != nodes_[i].lambda) {
        auto stepper = ode::make_controlled(opt_.abs_tol, opt_.rel_tol, ode::runge_kutta_fehlberg78<State>());
        ode::integrate_adaptive(stepper, Rhs{m_}, y, nodes_[i].lambda, lam, (lam - nodes_[i].lambda) / 2);
    }
    eta = y[0];
    psi = y[1];
}

double BurnsSimanca::xi(double t) const {
    if (m_ == 2) return 0.5 + t;
    if (t > opt_.t_switch) {
        double y, ahat;
        inner_state_at(1.0 / t, y, ahat);
        return t * (1.0 + y);
    }
    double eta, psi;
    state_at(t, eta, psi);
    return 0.5 + std::pow(t, m_ - 1) * eta;
}

double BurnsSimanca::psi(double t) const {
    if (m_ == 2) return -std::log(t);
    if (t > opt_.t_switch) {
        double y, ahat;
        inner_state_at(1.0 / t, y, ahat);
        return ahat - std::log(t) - 0.5 / t;
    }
    double eta, psi;
    state_at(t, eta, psi);
    return psi;
}

double BurnsSimanca::xi_prime(double t) const {
    const double x = xi(t);
    return ((m_ - 1) * std::pow(t, m_ - 2) * x - (m_ - 2) * std::pow(t, m_ - 1)) / std::pow(x, m_ - 1);
}

Jet BurnsSimanca::raw_psi_jet_t(double t0) const {
    double eta0, psi0;
    state_at(t0, eta0, psi0);
    const int m = m_;
    Jet t = Jet::variable(t0);
    Jet tm1 = ipow(t, m - 1);
    Jet eta(eta0);
    for (int it = 0; it <= 8; ++it) {
        Jet xi = 0.5 + tm1 * eta;
        Jet rhs = (((m - 1) * xi - (m - 2) * t) / ipow(xi, m - 1) - (m - 1) * eta) / t;
        eta = rhs.integral(eta0);
    }
    return (-(ipow(t, m - 3) * eta)).integral(psi0);
}

Jet BurnsSimanca::raw_ahat_jet(double sigma0) const {
    double y0, a0;
    inner_state_at(sigma0, y0, a0);
    Jet sigma = Jet::variable(sigma0);
    Jet y(y0);
    for (int it = 0; it <= 8; ++it) y = (flat_theta(m_, y) / sigma).integral(y0);
    return (y / sigma).integral(a0);
}

radial::Potential BurnsSimanca::potential_jet(double s) const {
    const double k2 = kappa_ * kappa_;
    const double sigma = k2 * s;
    auto rescale = [k2](Jet j) {
        double scale = 1.0 / k2;
        for (auto& c : j.c) {
            c *= scale;
            scale *= k2;
        }
        return j;
    };
    if (m_ == 2) {
        // A = s/2 + log s in raw coordinates
        Jet smooth = rescale(0.5 * Jet::variable(sigma)) ;
        smooth.c[0] += std::log(k2) / k2;
        return {smooth, 1.0 / k2};
    }
    if (sigma < 1.0 / opt_.t_switch) {
        Jet smooth = rescale(raw_ahat_jet(sigma));
        smooth.c[0] += std::log(k2) / k2;
        return {smooth, 1.0 / k2};
    }
    Jet tj = 1.0 / Jet::variable(sigma);
    return {rescale(compose(raw_psi_jet_t(1.0 / sigma), tj)) + 0.5 * Jet::variable(s)};
}

radial::Potential BurnsSimanca::psi_jet(double s) const {
    radial::Potential p = potential_jet(s);
    p.smooth = p.smooth - 0.5 * Jet::variable(s);
    return p;
}

double BurnsSimanca::psi_normalized(double s) const {
    const double k2 = kappa_ * kappa_;
    if (m_ == 2) return std::log(k2 * s) / k2;
    return psi(1.0 / (k2 * s)) / k2;
}

radial::RadialProfile BurnsSimanca::profile(const std::vector<double>& s_grid) const {
    return radial::RadialProfile::from_jets(m_, s_grid, [this](double s) { return potential_jet(s); });
}

BurnsSimanca bs_solve(int m, double t_max, int steps) {
    SolveOptions o;
    o.t_max = t_max;
    o.steps = steps;
    return BurnsSimanca(m, o);
}

Asymptotics asymptotics(const BurnsSimanca& bs, double r_min, double r_max, int samples) {
    const int m = bs.m();
    if (m < 3) throw std::invalid_argument("asymptotics: the power-law expansion needs m >= 3");
    const double k2 = bs.kappa() * bs.kappa();
    // Default window: raw t in [5, 50] t_seed, i.e. inside the integrated range.
    if (r_min <= 0) r_min = std::sqrt(1.0 / (k2 * 50 * bs.options().t_seed));
    if (r_max <= 0) r_max = std::sqrt(1.0 / (k2 * 5 * bs.options().t_seed));
    Asymptotics out;
    out.r_min = r_min;
    out.r_max = r_max;
    out.expected_exponent = 4.0 * m - 6.0;
    std::vector<double> r(samples), psi(samples);
    for (int i = 0; i < samples; ++i) {
        r[i] = r_min * std::pow(r_max / r_min, double(i) / (samples - 1));
        psi[i] = bs.psi_normalized(r[i] * r[i]);
    }
    const double e_lead = 4.0 - 2 * m, e_a = 2.0 - 2 * m, e_rem = 6.0 - 4 * m;
    // The expansion continues in steps of |z|^{-2} past the remainder exponent.
    constexpr int tail = 5;
    {
        Eigen::MatrixXd B(samples, 2 + tail);
        Eigen::VectorXd y(samples);
        for (int i = 0; i < samples; ++i) {
            // scale columns by the leading magnitude to keep the fit well conditioned
            const double w = std::pow(r[i], -e_lead);
            B(i, 0) = 1.0;
            B(i, 1) = std::pow(r[i], e_a) * w;
            for (int k = 0; k < tail; ++k) B(i, 2 + k) = std::pow(r[i], e_rem - 2 * k) * w;
            y(i) = psi[i] * w;
        }
        Eigen::VectorXd c = B.colPivHouseholderQr().solve(y);
        out.leading = c(0);
    }
    {
        Eigen::MatrixXd B(samples, 1 + tail);
        Eigen::VectorXd y(samples);
        for (int i = 0; i < samples; ++i) {
            const double w = std::pow(r[i], -e_a);
            B(i, 0) = 1.0;
            for (int k = 0; k < tail; ++k) B(i, 1 + k) = std::pow(r[i], e_rem - 2 * k) * w;
            y(i) = (psi[i] + std::pow(r[i], e_lead)) * w;
        }
        Eigen::VectorXd c = B.colPivHouseholderQr().solve(y);
        out.a = c(0);
    }
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < samples; ++i) {
            const double R = psi[i] + std::pow(r[i], e_lead) - out.a * std::pow(r[i], e_a);
            const double lx = std::log(r[i]), ly = std::log(std::abs(R));
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        }
        const double slope = (samples * sxy - sx * sy) / (samples * sxx - sx * sx);
        out.decay_exponent = -slope;
    }
    const auto& c = bs.series().c;
    out.a_series = -to_double(c[m]) / (m - 1) * std::pow(bs.kappa(), -2.0 * m);
    out.consistent = out.decay_exponent >= out.expected_exponent - 0.5;
    return out;
}

std::string profile_csv(const BurnsSimanca& bs, const std::vector<double>& s_grid) {
    auto p = bs.profile(s_grid);
    auto sc = radial::radial_scalar_curvature(p);
    std::ostringstream os;
    os.precision(17);
    os << "s,f,scalar,psi\n";
    for (std::size_t i = 0; i < s_grid.size(); ++i)
        os << p.s[i] << ',' << p.f[i] << ',' << sc[i] << ',' << bs.psi_normalized(p.s[i]) << '\n';
    return os.str();
}

nlohmann::json metadata(const BurnsSimanca& bs, const Asymptotics& a) {
    nlohmann::json j;
    j["schema"] = "kblow.bs_metadata/1";
    j["m"] = bs.m();
    j["normalization"] = {{"kappa", bs.kappa()}, {"divisor_moment", bs.divisor_moment()}};
    j["series_order"] = bs.series().order();
    std::vector<std::string> cs;
    for (const auto& c : bs.series().c) cs.push_back(to_string(c));
    j["series"] = cs;
    j["t_seed"] = bs.options().t_seed;
    j["t_max"] = bs.last_good_t();
    j["asymptotics"] = {{"leading", a.leading},
                        {"a", a.a},
                        {"a_series", a.a_series},
                        {"decay_exponent", a.decay_exponent},
                        {"expected_exponent", a.expected_exponent},
                        {"window", {a.r_min, a.r_max}},
                        {"consistent", a.consistent}};
    return j;
}

}  // namespace kblow::bs
