#include "kblow/gluing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

namespace kblow::gluing {

namespace {

constexpr double kPi = 3.14159265358979323846;

double ipow_d(double x, int n) { return std::pow(x, n); }

}  // namespace

// ---------------------------------------------------------------------------------------------
// Configuration

double GluingConfig::cutoff_exponent() const {
    const double r = r_eps > 0 ? r_eps : std::pow(eps, double(2 * m - 1) / double(2 * m + 1));
    return std::log(r) / std::log(eps);
}

double GluingConfig::eps_prime() const { return std::pow(eps, 2 * m - 2); }

GluingConfig GluingConfig::resolved() const {
    GluingConfig c = *this;
    if (c.m < 2) throw std::invalid_argument("gluing: dimension must be at least 2");
    if (!(c.eps > 0.0) || !(c.eps < 1.0)) throw std::invalid_argument("gluing: eps must lie in (0, 1)");
    if (c.r_eps <= 0.0) c.r_eps = std::pow(c.eps, double(2 * c.m - 1) / double(2 * c.m + 1));
    if (!(c.r_eps > c.eps) || !(c.r_eps < 1.0))
        throw std::invalid_argument("gluing: need eps < r_eps < 1");
    if (2.0 * c.r_eps >= 1.0) throw std::invalid_argument("gluing: the neck must fit inside the unit ball");
    if (c.m == 2 && c.theta <= 0.0) c.theta = 0.1;
    if (c.delta == 0.0) c.delta = c.m >= 3 ? 4.0 - 2.0 * c.m + 0.1 : -c.theta;
    if (c.m >= 3 && !(c.delta > 4.0 - 2.0 * c.m && c.delta < 0.0))
        throw std::invalid_argument("gluing: need 4 - 2m < delta < 0");
    if (c.m == 2 && !(c.delta < 0.0)) throw std::invalid_argument("gluing: need delta < 0 for m = 2");
    const double a = c.cutoff_exponent();
    if (c.a_upper <= 0.0) c.a_upper = 0.5 * (1.0 + a);
    if (c.a_lower <= 0.0) c.a_lower = 0.5 * a;
    if (!(0.0 < c.a_lower && c.a_lower < a && a < c.a_upper && c.a_upper < 1.0))
        throw std::invalid_argument("gluing: cutoff exponents must satisfy 0 < a_lower < a < a_upper < 1");
    if (c.k < 0 || c.k > 4) throw std::invalid_argument("gluing: derivative order must be in 0..4");
    if (!(c.alpha >= 0.0 && c.alpha < 1.0)) throw std::invalid_argument("gluing: alpha must lie in [0, 1)");
    if (!(c.sigma_min > 0.0) || !(c.s_max > 4.0 * c.r_eps * c.r_eps) || c.points < 16)
        throw std::invalid_argument("gluing: bad grid");
    return c;
}

nlohmann::json GluingConfig::to_json() const {
    return {{"m", m},          {"eps", eps},         {"r_eps", r_eps},         {"delta", delta},
            {"k", k},          {"alpha", alpha},     {"a", r_eps > 0 ? cutoff_exponent() : 0.0},
            {"a_upper", a_upper}, {"a_lower", a_lower}, {"theta", theta},     {"sigma_min", sigma_min},
            {"s_max", s_max},  {"points", points}};
}

GluingConfig GluingConfig::from_json(const nlohmann::json& j) {
    GluingConfig c;
    c.m = j.value("m", c.m);
    c.eps = j.value("eps", c.eps);
    c.r_eps = j.value("r_eps", c.r_eps);
    c.delta = j.value("delta", c.delta);
    c.k = j.value("k", c.k);
    c.alpha = j.value("alpha", c.alpha);
    c.a_upper = j.value("a_upper", c.a_upper);
    c.a_lower = j.value("a_lower", c.a_lower);
    c.theta = j.value("theta", c.theta);
    c.sigma_min = j.value("sigma_min", c.sigma_min);
    c.s_max = j.value("s_max", c.s_max);
    c.points = j.value("points", c.points);
    return c;
}

// ---------------------------------------------------------------------------------------------
// Cutoffs

double smooth_step(double t) {
    if (t <= 1.0) return 0.0;
    if (t >= 2.0) return 1.0;
    const double e1 = std::exp(-1.0 / (t - 1.0)), e2 = std::exp(-1.0 / (2.0 - t));
    return e1 / (e1 + e2);
}

Jet smooth_step(const Jet& t) {
    if (t.value() <= 1.0) return Jet(0.0);
    if (t.value() >= 2.0) return Jet(1.0);
    Jet e1 = exp(-1.0 / (t - 1.0)), e2 = exp(-1.0 / (2.0 - t));
    return e1 / (e1 + e2);
}

double gamma1(const GluingConfig& cfg, double r) { return smooth_step(r / cfg.r_eps); }
double gamma2(const GluingConfig& cfg, double r) { return 1.0 - gamma1(cfg, r); }

double beta1(const GluingConfig& cfg, double r) {
    if (r <= 0.0) return 0.0;
    const double a = cfg.cutoff_exponent();
    const double y = std::log(r) / std::log(cfg.eps);
    return 1.0 - smooth_step(1.0 + (y - a) / (cfg.a_upper - a));
}

double beta2(const GluingConfig& cfg, double r) {
    if (r <= 0.0) return 1.0;
    const double lo = cfg.a_lower / cfg.cutoff_exponent();
    const double y = std::log(0.5 * r) / std::log(cfg.r_eps);
    return smooth_step(1.0 + (y - lo) / (1.0 - lo));
}

Jet gamma1_jet(const GluingConfig& cfg, const Jet& s) { return smooth_step(sqrt(s) / cfg.r_eps); }

Cutoffs cutoffs(const GluingConfig& cfg_in, const std::vector<double>& r) {
    const GluingConfig cfg = cfg_in.resolved();
    Cutoffs c;
    c.r = r;
    const std::size_t n = r.size();
    c.gamma1.resize(n);
    c.gamma2.resize(n);
    c.beta1.resize(n);
    c.beta2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        c.gamma1[i] = gamma1(cfg, r[i]);
        c.gamma2[i] = gamma2(cfg, r[i]);
        c.beta1[i] = beta1(cfg, r[i]);
        c.beta2[i] = beta2(cfg, r[i]);
    }
    // |r d/dr beta1| = |beta'(y)| / |log eps|, differentiated exactly through the jet of the step.
    const double a = cfg.cutoff_exponent();
    for (std::size_t i = 0; i < n; ++i) {
        if (r[i] <= 0.0) continue;
        const double y = std::log(r[i]) / std::log(cfg.eps);
        Jet t = Jet::variable(1.0 + (y - a) / (cfg.a_upper - a));
        const double dstep = smooth_step(t).derivative(1) / (cfg.a_upper - a);
        c.max_r_grad_beta1 = std::max(c.max_r_grad_beta1, std::abs(dstep) / std::abs(std::log(cfg.eps)));
    }
    std::ostringstream bad;
    const double inner_beta = std::pow(cfg.eps, cfg.a_upper), outer_beta = 2.0 * std::pow(cfg.eps, cfg.a_lower);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = r[i];
        if (x <= cfg.r_eps && c.gamma1[i] != 0.0) bad << "gamma1 nonzero at r=" << x << "; ";
        if (x >= 2.0 * cfg.r_eps && c.gamma1[i] != 1.0) bad << "gamma1 not 1 at r=" << x << "; ";
        if (c.gamma1[i] != 0.0 && c.beta1[i] != 1.0) bad << "beta1 not 1 on supp gamma1 at r=" << x << "; ";
        const bool b1_flat = c.beta1[i] == 0.0 || c.beta1[i] == 1.0;
        if (!b1_flat && (x < inner_beta || x > cfg.r_eps)) bad << "beta1 varies at r=" << x << "; ";
        const bool b2_flat = c.beta2[i] == 0.0 || c.beta2[i] == 1.0;
        if (!b2_flat && (x < 2.0 * cfg.r_eps || x > outer_beta)) bad << "beta2 varies at r=" << x << "; ";
    }
    c.violations = bad.str();
    c.supports_ok = c.violations.empty();
    return c;
}

// ---------------------------------------------------------------------------------------------
// Gamma

namespace {

// f = sum P[n] X^n + log X sum L[n] X^n.
struct LogLaurent {
    std::map<int, Rational> P, L;

    void add(const LogLaurent& o, const Rational& c) {
        for (const auto& [n, v] : o.P) P[n] += c * v;
        for (const auto& [n, v] : o.L) L[n] += c * v;
    }
};

// D = X(1-X) d^2 + (m - (m+1) X) d, the unit-normalised Fubini-Study Laplacian in X.
LogLaurent apply_D(const LogLaurent& f, int m) {
    LogLaurent r;
    for (const auto& [n, v] : f.P) {
        r.P[n - 1] += v * Rational(n * (n + m - 1));
        r.P[n] -= v * Rational(n * (n + m));
    }
    for (const auto& [n, v] : f.L) {
        r.L[n - 1] += v * Rational(n * (n + m - 1));
        r.L[n] -= v * Rational(n * (n + m));
        r.P[n - 1] += v * Rational(2 * n + m - 1);
        r.P[n] -= v * Rational(2 * n + m);
    }
    return r;
}

// D*D of the base potential (1/2) log(1+s): 4 D (D + m + 1).
LogLaurent apply_DstarD(const LogLaurent& f, int m) {
    LogLaurent g = apply_D(f, m);
    g.add(f, Rational(m + 1));
    LogLaurent r = apply_D(g, m);
    LogLaurent out;
    out.add(r, Rational(4));
    return out;
}

// Exact reduced row echelon solve; throws if inconsistent or not unique.
std::vector<Rational> solve_exact(std::vector<std::vector<Rational>> a, std::vector<Rational> b) {
    const std::size_t rows = a.size(), cols = a.empty() ? 0 : a[0].size();
    std::vector<int> pivot_col;
    std::size_t row = 0;
    for (std::size_t col = 0; col < cols && row < rows; ++col) {
        std::size_t p = row;
        while (p < rows && a[p][col] == 0) ++p;
        if (p == rows) continue;
        std::swap(a[p], a[row]);
        std::swap(b[p], b[row]);
        const Rational inv = Rational(1) / a[row][col];
        for (auto& x : a[row]) x *= inv;
        b[row] *= inv;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == row || a[i][col] == 0) continue;
            const Rational f = a[i][col];
            for (std::size_t j = 0; j < cols; ++j) a[i][j] -= f * a[row][j];
            b[i] -= f * b[row];
        }
        pivot_col.push_back(static_cast<int>(col));
        ++row;
    }
    for (std::size_t i = row; i < rows; ++i)
        if (b[i] != 0) throw std::runtime_error("solve_gamma: singular ansatz is inconsistent");
    if (pivot_col.size() != cols) throw std::runtime_error("solve_gamma: solution is not unique");
    std::vector<Rational> x(cols);
    for (std::size_t i = 0; i < pivot_col.size(); ++i) x[pivot_col[i]] = b[i];
    return x;
}

}  // namespace

double base_scalar(int m) { return 2.0 * m * (m + 1); }

Jet base_potential(const Jet& s) { return 0.5 * log1p(s); }

GammaSolution solve_gamma(int m) {
    if (m < 2) throw std::invalid_argument("solve_gamma: m >= 2");
    constexpr int top = 3;
    GammaSolution out;
    out.m = m;
    out.lowest = 2 - m;
    const int n_pow = top - out.lowest + 1, n_log = top + 1;
    const int n_unknown = n_pow + n_log + 2;  // + h coefficients alpha, beta of h = alpha + beta X
    std::vector<LogLaurent> images(n_unknown);
    for (int i = 0; i < n_pow; ++i) {
        LogLaurent e;
        e.P[out.lowest + i] = 1;
        images[i] = apply_DstarD(e, m);
    }
    for (int i = 0; i < n_log; ++i) {
        LogLaurent e;
        e.L[i] = 1;
        images[n_pow + i] = apply_DstarD(e, m);
    }
    images[n_pow + n_log].P[0] = -1;
    images[n_pow + n_log + 1].P[1] = -1;

    std::map<std::pair<int, int>, int> eq_index;  // (is_log, power) -> row
    for (const auto& img : images) {
        for (const auto& [n, v] : img.P) eq_index.emplace(std::make_pair(0, n), 0);
        for (const auto& [n, v] : img.L) eq_index.emplace(std::make_pair(1, n), 0);
    }
    int row = 0;
    for (auto& [key, idx] : eq_index) idx = row++;
    std::vector<std::vector<Rational>> a(row + 3, std::vector<Rational>(n_unknown));
    std::vector<Rational> b(row + 3);
    for (int j = 0; j < n_unknown; ++j) {
        for (const auto& [n, v] : images[j].P) a[eq_index[{0, n}]][j] += v;
        for (const auto& [n, v] : images[j].L) a[eq_index[{1, n}]][j] += v;
    }
    // Kernel normalisation: no constant and no X term.
    a[row][0 - out.lowest] = 1;
    a[row + 1][1 - out.lowest] = 1;
    if (m >= 3) {
        a[row + 2][0] = 1;
        b[row + 2] = -1;  // -X^{2-m}: the singular part -s^{2-m} up to smooth terms
    } else {
        // log X leading with the blowup metric's coefficient 1/kappa^2 = 1/2.
        a[row + 2][n_pow] = 1;
        b[row + 2] = Rational(1, 2);
        out.singular_log = 0.5;
    }
    std::vector<Rational> sol = solve_exact(a, b);
    out.power.assign(sol.begin(), sol.begin() + n_pow);
    out.logs.assign(sol.begin() + n_pow, sol.begin() + n_pow + n_log);
    const Rational alpha = sol[n_pow + n_log], beta = sol[n_pow + n_log + 1];
    out.mean = Rational(m, m + 1);
    out.h_slope = beta;
    out.h_const = alpha + beta * out.mean;

    double fact = 1.0;
    for (int i = 2; i <= m; ++i) fact *= i;
    out.volume = std::pow(kPi, m) / fact;
    out.c_m = pairing_integral(out, 0);
    out.lambda = out.c_m / out.volume;
    return out;
}

Jet GammaSolution::in_x(const Jet& X) const {
    Jet r(0.0);
    for (std::size_t i = 0; i < power.size(); ++i) {
        const double c = to_double(power[i]);
        if (c != 0.0) r += c * ipow(X, lowest + static_cast<int>(i));
    }
    Jet poly(0.0);
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double c = to_double(logs[i]);
        if (c != 0.0) poly += c * ipow(X, static_cast<int>(i));
    }
    return r + poly * log(X);
}

Jet GammaSolution::value(const Jet& s) const {
    Jet X = s / (1.0 + s);
    // log X = -log(1 + 1/s) without cancellation at large s
    Jet logX = s.value() > 1.0 ? -log1p(1.0 / s) : log(s) - log1p(s);
    Jet r(0.0);
    for (std::size_t i = 0; i < power.size(); ++i) {
        const double c = to_double(power[i]);
        if (c != 0.0) r += c * ipow(X, lowest + static_cast<int>(i));
    }
    Jet poly(0.0);
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double c = to_double(logs[i]);
        if (c != 0.0) poly += c * ipow(X, static_cast<int>(i));
    }
    return r + poly * logX;
}

Jet GammaSolution::singular(const Jet& s) const {
    if (m >= 3) return -ipow(s, 2 - m);
    return singular_log * log(s);
}

Jet GammaSolution::regular(const Jet& s) const { return value(s) - singular(s); }

double GammaSolution::h(double X) const { return to_double(h_const) + to_double(h_slope) * (X - to_double(mean)); }

nlohmann::json GammaSolution::to_json() const {
    nlohmann::json p = nlohmann::json::array(), l = nlohmann::json::array();
    for (const auto& c : power) p.push_back(to_string(c));
    for (const auto& c : logs) l.push_back(to_string(c));
    return {{"m", m},
            {"lowest_power", lowest},
            {"power_coefficients", p},
            {"log_coefficients", l},
            {"h_const", to_string(h_const)},
            {"h_slope", to_string(h_slope)},
            {"mean", to_string(mean)},
            {"c_m", c_m},
            {"lambda", lambda},
            {"volume", volume}};
}

double pairing_integral(const GammaSolution& g, int power, int intervals) {
    // omega^m / m! = (2 pi)^m / (m-1)! x^{m-1} dx on the moment interval [0, 1/2], X = 2x.
    if (intervals % 2) ++intervals;
    const int m = g.m;
    double fact = 1.0;
    for (int i = 2; i < m; ++i) fact *= i;
    const double pref = std::pow(2.0 * kPi, m) / fact;
    const double h = 0.5 / intervals;
    double acc = 0.0;
    for (int i = 0; i <= intervals; ++i) {
        const double x = i * h, X = 2.0 * x;
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * g.h(X) * ipow_d(X, power) * ipow_d(x, m - 1);
    }
    return pref * acc * h / 3.0;
}

// ---------------------------------------------------------------------------------------------
// Glued metric

namespace {

// Potential in sigma -> potential in s = e2 sigma of e2 * p(s / e2).
Potential rescale(const Potential& p, double e2) {
    Potential q;
    double f = e2;
    for (std::size_t k = 0; k < q.smooth.c.size(); ++k) {
        q.smooth.c[k] = p.smooth.c[k] * f;
        f /= e2;
    }
    q.log_coeff = e2 * p.log_coeff;
    q.smooth.c[0] -= q.log_coeff * std::log(e2);
    return q;
}

Jet fold(const Potential& p, const Jet& s) {
    return p.log_coeff == 0.0 ? p.smooth : p.smooth + p.log_coeff * log(s);
}

}  // namespace

GluedProfile::GluedProfile(const GluingConfig& cfg, std::shared_ptr<const bs::BurnsSimanca> bs,
                           std::shared_ptr<const GammaSolution> gamma, bool with_gamma)
    : cfg_(cfg.resolved()), bs_(std::move(bs)), gamma_(std::move(gamma)), with_gamma_(with_gamma) {
    if (!bs_ || !gamma_) throw std::invalid_argument("GluedProfile: missing constituents");
    if (bs_->m() != cfg_.m || gamma_->m != cfg_.m) throw std::invalid_argument("GluedProfile: dimension mismatch");
    // normal coordinates: phi = A - s/2 must vanish to second order at the point
    Jet phi0 = base_potential(Jet::variable(0.0)) - 0.5 * Jet::variable(0.0);
    if (std::abs(phi0.c[0]) > 1e-14 || std::abs(phi0.c[1]) > 1e-14)
        throw std::invalid_argument("GluedProfile: base potential is not in normal coordinates");
    s_ = radial::geometric_grid(cfg_.sigma_min * cfg_.eps * cfg_.eps, cfg_.s_max, cfg_.points);
    values_.resize(s_.size());
    for (std::size_t i = 0; i < s_.size(); ++i) {
        Potential p = potential(s_[i]);
        values_[i] = p.smooth.value() + (p.log_coeff != 0.0 ? p.log_coeff * std::log(s_[i]) : 0.0);
    }
    profile_ = radial::RadialProfile::from_jets(cfg_.m, s_, [this](double s) { return potential(s); });
    for (std::size_t i = 0; i < s_.size(); ++i) {
        if (!(profile_.f[i] > 0.0) || !(profile_.g[i] > 0.0)) {
            std::ostringstream os;
            os << "glued metric not positive at r = " << std::sqrt(s_[i]);
            throw PositivityError(os.str(), std::sqrt(s_[i]));
        }
    }
}

Zone GluedProfile::zone(double s) const {
    const double g = gamma1(cfg_, std::sqrt(s));
    if (g == 0.0) return Zone::Inner;
    if (g == 1.0) return Zone::Outer;
    return Zone::Annulus;
}

Potential GluedProfile::model_potential(double s) const {
    const double e2 = cfg_.eps * cfg_.eps;
    return rescale(bs_->potential_jet(s / e2), e2);
}

namespace {

Potential glue(const GluingConfig& cfg, const bs::BurnsSimanca& bs, const GammaSolution& gamma, bool with_gamma,
               Zone zone, double s0, const Potential& model) {
    Jet s = Jet::variable(s0);
    const double ep = cfg.eps_prime();
    if (zone == Zone::Inner) return model;
    if (zone == Zone::Outer) {
        Jet a = base_potential(s);
        if (with_gamma) a += ep * gamma.value(s);
        return Potential(a);
    }
    const double e2 = cfg.eps * cfg.eps;
    Jet g1 = gamma1_jet(cfg, s);
    Jet phi = base_potential(s) - 0.5 * s;
    if (with_gamma) phi += ep * gamma.value(s);
    Jet psi = fold(rescale(bs.psi_jet(s0 / e2), e2), s);
    return Potential(0.5 * s + g1 * phi + (1.0 - g1) * psi);
}

}  // namespace

Potential GluedProfile::potential(double s) const {
    const Zone z = zone(s);
    return glue(cfg_, *bs_, *gamma_, with_gamma_, z, s, z == Zone::Inner ? model_potential(s) : Potential());
}

Potential GluedProfile::uncorrected_potential(double s) const {
    const Zone z = zone(s);
    return glue(cfg_, *bs_, *gamma_, false, z, s, z == Zone::Inner ? model_potential(s) : Potential());
}

Jet GluedProfile::correction(double s0) const {
    if (!with_gamma_) return Jet(0.0);
    const Zone z = zone(s0);
    if (z == Zone::Inner) return Jet(0.0);
    Jet s = Jet::variable(s0);
    Jet g = cfg_.eps_prime() * gamma_->value(s);
    return z == Zone::Outer ? g : gamma1_jet(cfg_, s) * g;
}

double GluedProfile::lifted_h(double s) const {
    const double phi = radial::moment(Jet::variable(s), uncorrected_potential(s)).value();
    const double b = to_double(gamma_->h_slope);
    return to_double(gamma_->h_const) - b * to_double(gamma_->mean) + 2.0 * b * phi;
}

std::vector<double> GluedProfile::r() const {
    std::vector<double> r(s_.size());
    for (std::size_t i = 0; i < s_.size(); ++i) r[i] = std::sqrt(s_[i]);
    return r;
}

GluedProfile glued_potential(const GluingConfig& cfg, std::shared_ptr<const bs::BurnsSimanca> bs,
                             std::shared_ptr<const GammaSolution> gamma, bool with_gamma) {
    return GluedProfile(cfg, std::move(bs), std::move(gamma), with_gamma);
}

GluedProfile glued_potential(const GluingConfig& cfg, bool with_gamma) {
    auto bs = std::make_shared<const bs::BurnsSimanca>(cfg.m);
    auto gamma = std::make_shared<const GammaSolution>(solve_gamma(cfg.m));
    return GluedProfile(cfg, bs, gamma, with_gamma);
}

// ---------------------------------------------------------------------------------------------
// Weighted norms

double weight_scale(Region region, double r, double eps) {
    switch (region) {
        case Region::Blowup: return r < eps ? eps : (r > 1.0 ? 1.0 : r);
        case Region::Base: return r > 1.0 ? 1.0 : r;
        case Region::Model: return r < 1.0 ? 1.0 : r;
    }
    return 1.0;
}

double weighted_norm(const std::vector<double>& f, const NormGrid& grid, double eps, double weight, int k,
                     Region region, double alpha) {
    const std::size_t n = f.size();
    if (grid.coord.size() != n || grid.r.size() != n || (k > 0 && grid.speed.size() != n))
        throw std::invalid_argument("weighted_norm: grid size mismatch");
    constexpr int width = 7;
    if (k > 0 || alpha > 0) {
        if (n < static_cast<std::size_t>(3 * width))
            throw std::invalid_argument("weighted_norm: insufficient resolution for the derivative order");
        for (std::size_t i = 1; i < n; ++i) {
            const double lo = std::min(grid.r[i - 1], grid.r[i]), hi = std::max(grid.r[i - 1], grid.r[i]);
            if (lo >= eps && hi <= 1.0 && hi > 1.5 * lo)
                throw std::invalid_argument("weighted_norm: insufficient resolution on the neck");
        }
    }
    std::vector<double> d = f;
    fd::Differentiator D;
    if (k > 0 || alpha > 0) D = fd::Differentiator(grid.coord, width, 1);
    double total = 0.0;
    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i) rho[i] = weight_scale(region, grid.r[i], eps);
    for (int j = 0; j <= k; ++j) {
        if (j > 0) {
            auto dd = D.apply(1, d);
            for (std::size_t i = 0; i < n; ++i) d[i] = grid.speed[i] * dd[i];
        }
        const std::size_t skip = static_cast<std::size_t>(3 * j);
        double sup = 0.0;
        for (std::size_t i = skip; i + skip < n; ++i) {
            if (!std::isfinite(grid.r[i]) && region == Region::Model) continue;
            sup = std::max(sup, std::pow(rho[i], j - weight) * std::abs(d[i]));
        }
        total += sup;
    }
    if (alpha > 0) {
        // radial arclength between nodes
        std::vector<double> t(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) {
            const double h = grid.coord[i] - grid.coord[i - 1];
            const double a = grid.speed[i - 1] > 0 ? 1.0 / grid.speed[i - 1] : 0.0;
            const double b = grid.speed[i] > 0 ? 1.0 / grid.speed[i] : 0.0;
            t[i] = t[i - 1] + 0.5 * h * (a + b);
        }
        const std::size_t skip = static_cast<std::size_t>(3 * k);
        double semi = 0.0;
        for (std::size_t i = skip; i + skip < n; ++i) {
            for (std::size_t l = i + 1; l + skip < n && l < i + 64; ++l) {
                if (grid.r[l] > 2.0 * grid.r[i]) break;
                const double dist = t[l] - t[i];
                if (!(dist > 0)) continue;
                const double q = std::pow(rho[i], k + alpha - weight) * std::abs(d[l] - d[i]) / std::pow(dist, alpha);
                semi = std::max(semi, q);
            }
        }
        total += semi;
    }
    return total;
}

NormGrid norm_grid(const GluedProfile& glued) {
    NormGrid g;
    const auto& p = glued.profile();
    const std::size_t n = p.size();
    g.coord.resize(n);
    g.speed.resize(n);
    g.r = glued.r();
    for (std::size_t i = 0; i < n; ++i) {
        g.coord[i] = std::log(p.s[i]);
        g.speed[i] = std::sqrt(2.0 / (p.s[i] * p.g[i]));  // |grad log s|
    }
    return g;
}

// ---------------------------------------------------------------------------------------------
// Residual

double residual_at(const GluedProfile& glued, double s0) {
    const GluingConfig& cfg = glued.config();
    const int m = cfg.m;
    const double sM = base_scalar(m), ep = cfg.eps_prime();
    Jet s = Jet::variable(s0);
    const Zone z = glued.zone(s0);
    if (!glued.with_gamma()) {
        if (z == Zone::Outer) return 0.0;  // the base is cscK
        return sM - radial::scalar_curvature(m, s, glued.potential(s0)).value();
    }
    const double b = to_double(glued.gamma().h_slope);
    double E = 0.0;
    if (z == Zone::Outer) {
        Jet u = glued.correction(s0);
        E = radial::scalar_curvature_change(m, s, Potential(base_potential(s)), u).value() +
            ep * glued.lifted_h(s0) + ep * 2.0 * b * s0 * u.derivative(1);
    } else {
        const double S = radial::scalar_curvature(m, s, glued.potential(s0)).value();
        Jet u = glued.correction(s0);
        E = S - sM + ep * glued.lifted_h(s0) + ep * 2.0 * b * s0 * u.derivative(1);
    }
    return -E;
}

Residual residual_F(const GluedProfile& glued) {
    const GluingConfig& cfg = glued.config();
    Residual out;
    out.s = glued.s();
    out.r = glued.r();
    out.F.resize(out.s.size());
    const double w = 4.0 - cfg.delta;
    for (std::size_t i = 0; i < out.s.size(); ++i) {
        out.F[i] = residual_at(glued, out.s[i]);
        const double v = std::pow(weight_scale(Region::Blowup, out.r[i], cfg.eps), w) * std::abs(out.F[i]);
        const int zi = static_cast<int>(glued.zone(out.s[i]));
        out.zone_norm[zi] = std::max(out.zone_norm[zi], v);
        if (v > out.norm) {
            out.norm = v;
            out.peak_r = out.r[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Scaling experiment

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

ScalingResult scaling_experiment(const GluingConfig& tmpl, const std::vector<double>& eps_list, bool with_gamma,
                                 int jobs) {
    if (eps_list.size() < 2) throw std::invalid_argument("scaling_experiment: need at least two eps values");
    const auto [lo, hi] = std::minmax_element(eps_list.begin(), eps_list.end());
    if (*hi / *lo < 10.0 * (1 - 1e-12)) throw std::invalid_argument("scaling_experiment: eps values must span a decade");
    auto bs = std::make_shared<const bs::BurnsSimanca>(tmpl.m);
    auto gamma = std::make_shared<const GammaSolution>(solve_gamma(tmpl.m));
    std::vector<double> eps = eps_list;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    ScalingResult out;
    out.with_gamma = with_gamma;
    out.rows.resize(eps.size());
    std::vector<std::string> errors(eps.size());
    auto run = [&](std::size_t i) {
        try {
            GluingConfig c = tmpl;
            c.eps = eps[i];
            c.r_eps = 0.0;
            c = c.resolved();
            GluedProfile g(c, bs, gamma, with_gamma);
            Residual r = residual_F(g);
            out.rows[i] = {c.eps, c.r_eps, r.norm, 0.0, r.peak_r};
        } catch (const std::exception& ex) {
            errors[i] = ex.what();
        }
    };
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(eps.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < eps.size(); ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < eps.size(); i += workers) run(i);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("scaling_experiment: " + e);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        lx.push_back(std::log(out.rows[i].r_eps));
        ly.push_back(std::log(out.rows[i].norm));
        out.rows[i].slope_so_far = i > 0 ? fit_slope(lx, ly) : 0.0;
        if (i > 0 && !(out.rows[i].norm < out.rows[i - 1].norm)) out.monotone = false;
    }
    out.slope = fit_slope(lx, ly);
    GluingConfig c0 = tmpl;
    c0.eps = eps[0];
    c0.r_eps = 0.0;
    out.expected = 4.0 - c0.resolved().delta;
    if (!out.monotone) {
        std::ostringstream os;
        os << "norms are not monotone in eps:";
        for (const auto& r : out.rows) os << " eps=" << r.eps << " |F|=" << r.norm;
        throw ScalingError(os.str(), out);
    }
    return out;
}

std::string scaling_csv(const ScalingResult& r) {
    std::ostringstream os;
    os.precision(12);
    os << "eps,r_eps,norm_F,slope_so_far\n";
    for (const auto& row : r.rows) os << row.eps << ',' << row.r_eps << ',' << row.norm << ',' << row.slope_so_far << '\n';
    return os.str();
}

nlohmann::json to_json(const ScalingResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"eps", row.eps}, {"r_eps", row.r_eps}, {"norm", row.norm}, {"slope_so_far", row.slope_so_far},
                        {"peak_r", row.peak_r}});
    return {{"schema", "kblow.scaling/1"}, {"slope", r.slope}, {"expected", r.expected},
            {"monotone", r.monotone}, {"with_gamma", r.with_gamma}, {"rows", rows}};
}

}  // namespace kblow::gluing
