#include "kblow/moment.hpp"

#include "kblow/fd.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace kblow::moment {

ActionModel::ActionModel(std::vector<std::vector<long>> weights, std::vector<Rational> offset,
                         std::vector<std::vector<Rational>> inner_product, double chart_radius)
    : w_int_(std::move(weights)), c_exact_(std::move(offset)), g_exact_(std::move(inner_product)),
      chart_radius_(chart_radius) {
    const std::size_t r = w_int_.size();
    if (r == 0) throw std::invalid_argument("action model: torus rank must be positive");
    const std::size_t n = w_int_[0].size();
    if (n == 0) throw std::invalid_argument("action model: chart dimension must be positive");
    for (const auto& row : w_int_)
        if (row.size() != n) throw std::invalid_argument("action model: ragged weight matrix");
    if (c_exact_.size() != r) throw std::invalid_argument("action model: moment_offset needs one entry per generator");
    if (g_exact_.empty()) {
        g_exact_.assign(r, std::vector<Rational>(r, Rational(0)));
        for (std::size_t i = 0; i < r; ++i) g_exact_[i][i] = 1;
    }
    if (g_exact_.size() != r) throw std::invalid_argument("action model: inner_product must be r x r");
    W_.resize(r, n);
    G_.resize(r, r);
    c_.resize(r);
    for (std::size_t a = 0; a < r; ++a) {
        if (g_exact_[a].size() != r) throw std::invalid_argument("action model: inner_product must be r x r");
        for (std::size_t i = 0; i < n; ++i) W_(a, i) = double(w_int_[a][i]);
        for (std::size_t b = 0; b < r; ++b) {
            if (g_exact_[a][b] != g_exact_[b][a]) throw std::invalid_argument("action model: inner_product not symmetric");
            G_(a, b) = to_double(g_exact_[a][b]);
        }
        c_(a) = to_double(c_exact_[a]);
    }
    // Exact Sylvester test: every leading principal minor positive.
    for (std::size_t k = 1; k <= r; ++k) {
        std::vector<std::vector<Rational>> M(k, std::vector<Rational>(k));
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) M[a][b] = g_exact_[a][b];
        Rational det = 1;
        for (std::size_t col = 0; col < k; ++col) {
            std::size_t piv = col;
            while (piv < k && M[piv][col] == 0) ++piv;
            if (piv == k) { det = 0; break; }
            if (piv != col) { std::swap(M[piv], M[col]); det = -det; }
            det *= M[col][col];
            for (std::size_t row = col + 1; row < k; ++row) {
                Rational f = M[row][col] / M[col][col];
                for (std::size_t j = col; j < k; ++j) M[row][j] -= f * M[col][j];
            }
        }
        if (det <= 0) throw std::invalid_argument("action model: inner_product not positive definite");
    }
    if (!(chart_radius_ > 0)) throw std::invalid_argument("action model: chart_radius must be positive");
}

Vector ActionModel::moment_components(const Point& z) const {
    if (z.size() != n()) throw std::invalid_argument("point has the wrong dimension");
    Vector q = z.cwiseAbs2();
    return 0.5 * W_ * q - c_;
}

Vector ActionModel::moment(const Point& z) const { return G_.ldlt().solve(moment_components(z)); }

Point ActionModel::flow(const Point& x, const Vector& xi) const {
    Vector s = W_.transpose() * xi;
    Point y = x;
    for (int i = 0; i < n(); ++i) y(i) *= std::exp(-s(i));
    return y;
}

Point ActionModel::rotate(const Point& x, const Vector& theta) const {
    Vector s = W_.transpose() * theta;
    Point y = x;
    for (int i = 0; i < n(); ++i) y(i) *= std::polar(1.0, -s(i));
    return y;
}

bool ActionModel::in_chart(const Point& z) const {
    for (int i = 0; i < z.size(); ++i)
        if (!std::isfinite(std::abs(z(i)))) return false;
    return z.norm() <= chart_radius_;
}

double ActionModel::moment_property_defect(const std::vector<Point>& sample, double h) const {
    double worst = 0;
    for (const auto& z : sample) {
        for (int a = 0; a < rank(); ++a) {
            // X_a at z in real coordinates (x_i, y_i): w (y, -x)
            for (int i = 0; i < n(); ++i) {
                for (int part = 0; part < 2; ++part) {
                    const std::complex<double> dir = part == 0 ? 1.0 : std::complex<double>(0, 1);
                    Point zp = z, zm = z;
                    zp(i) += h * dir;
                    zm(i) -= h * dir;
                    const double dmu = (moment_components(zp)(a) - moment_components(zm)(a)) / (2 * h);
                    const double Xx = W_(a, i) * z(i).imag(), Xy = -W_(a, i) * z(i).real();
                    // omega(X, v) = X_x v_y - X_y v_x
                    const double om = part == 0 ? -Xy : Xx;
                    worst = std::max(worst, std::abs(dmu - om));
                }
            }
        }
    }
    return worst;
}

nlohmann::json ActionModel::to_json() const {
    nlohmann::json j;
    j["schema"] = "kblow.action_model/1";
    j["n"] = n();
    j["torus_rank"] = rank();
    j["weight_matrix"] = w_int_;
    std::vector<std::string> c;
    for (const auto& q : c_exact_) c.push_back(to_string(q));
    j["moment_offset"] = c;
    nlohmann::json g = nlohmann::json::array();
    for (const auto& row : g_exact_) {
        std::vector<std::string> r;
        for (const auto& q : row) r.push_back(to_string(q));
        g.push_back(r);
    }
    j["inner_product"] = g;
    if (std::isfinite(chart_radius_)) j["chart_radius"] = chart_radius_;
    return j;
}

namespace {

Rational rational_from(const nlohmann::json& v) {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<long>());
    if (v.is_number()) return parse_rational(v.dump());
    throw std::invalid_argument("expected a rational number, got " + v.dump());
}

}  // namespace

ActionModel ActionModel::from_json(const nlohmann::json& j) {
    auto W = j.at("weight_matrix").get<std::vector<std::vector<long>>>();
    std::vector<Rational> c;
    for (const auto& v : j.at("moment_offset")) c.push_back(rational_from(v));
    std::vector<std::vector<Rational>> G;
    if (j.contains("inner_product"))
        for (const auto& row : j.at("inner_product")) {
            std::vector<Rational> r;
            for (const auto& v : row) r.push_back(rational_from(v));
            G.push_back(r);
        }
    double R = j.value("chart_radius", std::numeric_limits<double>::infinity());
    ActionModel model(W, c, G, R);
    if (j.contains("n") && j.at("n").get<int>() != model.n())
        throw std::invalid_argument("action model: n disagrees with weight_matrix");
    if (j.contains("torus_rank") && j.at("torus_rank").get<int>() != model.rank())
        throw std::invalid_argument("action model: torus_rank disagrees with weight_matrix");
    return model;
}

ActionModel ActionModel::circle(double g) {
    return ActionModel({{1}}, {Rational(1, 2)}, {{parse_rational(std::to_string(g))}});
}

ActionModel ActionModel::diagonal(int n) {
    std::vector<std::vector<long>> W(n, std::vector<long>(n, 0));
    for (int i = 0; i < n; ++i) W[i][i] = 1;
    return ActionModel(W, std::vector<Rational>(n, Rational(1, 2)), {});
}

Subspace span(const ActionModel& model, const std::vector<Vector>& vectors, double tol) {
    const Matrix& G = model.inner_product();
    std::vector<Vector> out;
    for (Vector v : vectors) {
        const double scale = std::max(1.0, model.norm(v));
        // two passes of Gram-Schmidt
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : out) v -= b.dot(G * v) * b;
        const double nv = model.norm(v);
        if (nv > tol * scale) out.push_back(v / nv);
    }
    Subspace s;
    s.basis.resize(model.rank(), static_cast<Eigen::Index>(out.size()));
    for (std::size_t k = 0; k < out.size(); ++k) s.basis.col(k) = out[k];
    return s;
}

Subspace stabilizer_at(const ActionModel& model, const Point& y, double tol) {
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    std::vector<int> support;
    for (int i = 0; i < model.n(); ++i)
        if (std::abs(y(i)) > tol * scale) support.push_back(i);
    const int r = model.rank();
    if (support.empty()) {
        std::vector<Vector> e;
        for (int a = 0; a < r; ++a) e.push_back(Vector::Unit(r, a));
        return span(model, e);
    }
    Matrix A(static_cast<Eigen::Index>(support.size()), r);
    for (std::size_t k = 0; k < support.size(); ++k) A.row(k) = model.weights().col(support[k]).transpose();
    Eigen::FullPivLU<Matrix> lu(A);
    Matrix K = lu.kernel();
    std::vector<Vector> v;
    if (lu.rank() < r)
        for (int k = 0; k < K.cols(); ++k) v.push_back(K.col(k));
    return span(model, v);
}

Subspace orthogonal_complement(const ActionModel& model, const Subspace& s) {
    std::vector<Vector> v;
    for (int k = 0; k < s.dim(); ++k) v.push_back(s.basis.col(k));
    for (int a = 0; a < model.rank(); ++a) v.push_back(Vector::Unit(model.rank(), a));
    Subspace all = span(model, v);
    Subspace out;
    out.basis = all.basis.rightCols(all.dim() - s.dim());
    return out;
}

Vector project_onto(const ActionModel& model, const Subspace& s, const Vector& v) {
    Vector out = Vector::Zero(v.size());
    for (int k = 0; k < s.dim(); ++k) out += model.dot(s.basis.col(k), v) * s.basis.col(k);
    return out;
}

Vector project_out(const ActionModel& model, const Subspace& s, const Vector& v) { return v - project_onto(model, s, v); }

Vector bracket(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("bracket: size mismatch");
    return Vector::Zero(a.size());
}

Polynomial parse_polynomial(const std::string& text, int n) {
    Polynomial out;
    std::size_t i = 0;
    auto skip = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("polynomial '" + text + "' at " + std::to_string(i) + ": " + why);
    };
    auto integer = [&] {
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        if (start == i) fail("expected an integer");
        return std::stoi(text.substr(start, i - start));
    };
    skip();
    if (i == text.size()) fail("empty expression");
    bool first = true;
    while (true) {
        skip();
        if (i == text.size()) break;
        double sign = 1.0;
        if (text[i] == '+' || text[i] == '-') {
            sign = text[i] == '-' ? -1.0 : 1.0;
            ++i;
            skip();
        } else if (!first) {
            fail("expected '+' or '-'");
        }
        first = false;
        Monomial mono{sign, std::vector<int>(n, 0)};
        bool have_factor = false;
        if (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) {
            const char* begin = text.c_str() + i;
            char* end = nullptr;
            mono.coeff *= std::strtod(begin, &end);
            i += static_cast<std::size_t>(end - begin);
            have_factor = true;
            skip();
            if (i < text.size() && text[i] == '*') { ++i; skip(); have_factor = false; }
            else if (i < text.size() && text[i] == 'q') fail("expected '*' between coefficient and factor");
        }
        while (i < text.size() && text[i] == 'q') {
            ++i;
            int k = integer();
            if (k < 1 || k > n) fail("variable q" + std::to_string(k) + " out of range");
            int e = 1;
            skip();
            if (i < text.size() && text[i] == '^') {
                ++i;
                skip();
                e = integer();
            }
            mono.exponents[k - 1] += e;
            have_factor = true;
            skip();
            if (i < text.size() && text[i] == '*') {
                ++i;
                skip();
                have_factor = false;
            }
        }
        if (!have_factor) fail("dangling operator");
        out.push_back(mono);
    }
    return out;
}

double evaluate(const Polynomial& p, const Point& z) {
    double v = 0;
    for (const auto& mono : p) {
        double t = mono.coeff;
        for (std::size_t i = 0; i < mono.exponents.size(); ++i) t *= std::pow(std::norm(z(i)), mono.exponents[i]);
        v += t;
    }
    return v;
}

PerturbedMap::PerturbedMap(const ActionModel& base, Fn perturbation, double sup_bound)
    : base_(&base), fn_(std::move(perturbation)), sup_bound_(sup_bound) {
    if (!(sup_bound_ >= 0)) throw std::invalid_argument("perturbed map: sup_bound must be non-negative");
}

PerturbedMap PerturbedMap::constant(const ActionModel& base, const Vector& shift) {
    if (shift.size() != base.rank()) throw std::invalid_argument("perturbation has the wrong dimension");
    return PerturbedMap(base, [shift](const Point&) { return shift; }, base.norm(shift));
}

PerturbedMap PerturbedMap::polynomial(const ActionModel& base, const std::vector<std::string>& components) {
    if (static_cast<int>(components.size()) != base.rank())
        throw std::invalid_argument("perturbation needs one component per generator");
    std::vector<Polynomial> polys;
    for (const auto& c : components) polys.push_back(parse_polynomial(c, base.n()));
    // Certified sup over the chart ball |z| <= R: each |q_i| <= R^2.
    const double R2 = base.chart_radius() * base.chart_radius();
    Vector bound(base.rank());
    for (int a = 0; a < base.rank(); ++a) {
        double b = 0;
        for (const auto& mono : polys[a]) {
            int deg = 0;
            for (int e : mono.exponents) deg += e;
            b += std::abs(mono.coeff) * (deg == 0 ? 1.0 : std::pow(R2, deg));
        }
        bound(a) = b;
    }
    const double lambda_max = Eigen::SelfAdjointEigenSolver<Matrix>(base.inner_product()).eigenvalues().maxCoeff();
    const double sup = bound.allFinite() ? std::sqrt(lambda_max) * bound.norm() : std::numeric_limits<double>::infinity();
    return PerturbedMap(
        base,
        [polys](const Point& z) {
            Vector v(static_cast<Eigen::Index>(polys.size()));
            for (std::size_t a = 0; a < polys.size(); ++a) v(a) = evaluate(polys[a], z);
            return v;
        },
        sup);
}

PerturbedMap PerturbedMap::from_json(const ActionModel& base, const nlohmann::json& j) {
    if (j.contains("constant")) {
        auto c = j.at("constant").get<std::vector<double>>();
        return constant(base, Eigen::Map<Vector>(c.data(), static_cast<Eigen::Index>(c.size())));
    }
    if (j.contains("polynomial")) return polynomial(base, j.at("polynomial").get<std::vector<std::string>>());
    throw std::invalid_argument("perturbation: expected 'constant' or 'polynomial'");
}

Vector PerturbedMap::operator()(const Point& y) const { return base_->moment(y) + fn_(y); }

double PerturbedMap::check_commutes(const Point& y, double tol) const {
    Vector v = (*this)(y);
    Subspace st = stabilizer_at(*base_, y);
    double worst = 0;
    for (int k = 0; k < st.dim(); ++k) worst = std::max(worst, base_->norm(bracket(v, st.basis.col(k))));
    if (worst > tol) throw std::domain_error("perturbed moment map does not commute with the stabilizer");
    return worst;
}

PerturbedMap PerturbedMap::scaled(double lambda) const {
    Fn f = fn_;
    return PerturbedMap(*base_, [f, lambda](const Point& z) { return Vector(lambda * f(z)); }, lambda == 0.0 ? 0.0 : std::abs(lambda) * sup_bound_);
}

Projected projected_map(const ActionModel& model, const Point& x, const Vector& xi, const PerturbedMap& pm) {
    Projected out;
    out.xi_norm = model.norm(xi);
    Point y = model.flow(x, xi);
    out.in_chart = model.in_chart(y);
    if (!out.in_chart) {
        out.value = Vector::Constant(model.rank(), std::numeric_limits<double>::quiet_NaN());
        return out;
    }
    Vector v = project_out(model, stabilizer_at(model, y), pm(y));
    out.value = project_out(model, stabilizer_at(model, x), v);
    return out;
}

Projected projected_map(const ActionModel& model, const Point& x, const Vector& xi) {
    return projected_map(model, x, xi, PerturbedMap::constant(model, Vector::Zero(model.rank())));
}

namespace {

struct Reduced {
    const ActionModel& model;
    const Point& x;
    const Subspace& search;
    const Subspace& torus;

    Vector lift(const Vector& c) const { return search.basis * c; }

    // Coordinates of Pi_{t^perp} P_xi(mu_eps) in the search basis; NaN outside the chart.
    Vector eval(const Vector& c, const PerturbedMap& pm) const {
        Projected p = projected_map(model, x, lift(c), pm);
        Vector out(search.dim());
        if (!p.in_chart) return Vector::Constant(search.dim(), std::numeric_limits<double>::quiet_NaN());
        Vector v = project_out(model, torus, p.value);
        for (int k = 0; k < search.dim(); ++k) out(k) = model.dot(search.basis.col(k), v);
        return out;
    }

    Matrix jacobian(const Vector& c, const PerturbedMap& pm, double h) const {
        Matrix J(search.dim(), search.dim());
        for (int k = 0; k < search.dim(); ++k) {
            const double step = h * std::max(1.0, std::abs(c(k)));
            Vector cp = c, cm = c;
            cp(k) += step;
            cm(k) -= step;
            J.col(k) = (eval(cp, pm) - eval(cm, pm)) / (2 * step);
        }
        return J;
    }
};

bool finite(const Vector& v) { return v.allFinite(); }

// Damped Newton from c; returns true when |F| <= tol.
bool newton(const Reduced& red, const PerturbedMap& pm, const DeformOptions& opt, double tol, Vector& c,
            std::vector<double>& history, int& iterations) {
    Vector F = red.eval(c, pm);
    if (!finite(F)) return false;
    double r = F.norm();
    history.push_back(r);
    for (int it = 0; it < opt.max_newton; ++it) {
        if (r <= tol) return true;
        Matrix J = red.jacobian(c, pm, opt.fd_step);
        if (!J.allFinite()) return false;
        Vector d = J.colPivHouseholderQr().solve(-F);
        if (!finite(d)) return false;
        double alpha = 1.0;
        bool accepted = false;
        for (int b = 0; b < opt.max_backtracks; ++b, alpha *= 0.5) {
            Vector cn = c + alpha * d;
            Vector Fn = red.eval(cn, pm);
            if (finite(Fn) && Fn.norm() < (1 - 1e-4 * alpha) * r) {
                c = cn;
                F = Fn;
                r = Fn.norm();
                accepted = true;
                break;
            }
        }
        ++iterations;
        history.push_back(r);
        if (!accepted) return r <= tol;
    }
    return r <= tol;
}

}  // namespace

DeformResult solve_deformed(const ActionModel& model, const Point& x, const PerturbedMap& pm, const DeformOptions& opt) {
    if (&pm.base() != &model) throw std::invalid_argument("solve_deformed: perturbed map belongs to another model");
    Subspace hx = stabilizer_at(model, x);
    Vector mu = model.moment(x);
    const double scale = std::max(1.0, model.norm(mu));
    if (model.norm(project_out(model, hx, mu)) > opt.precondition_tol * scale)
        throw std::invalid_argument("solve_deformed: mu(x) is not in the stabilizer of x");

    DeformResult res;
    // Torus reduction: mu(x) generates a torus inside the stabilizer; solve on its complement.
    Vector mu_h = project_onto(model, hx, mu);
    if (model.norm(mu_h) > opt.precondition_tol * scale) res.torus = span(model, {mu_h});
    else res.torus.basis.resize(model.rank(), 0);
    {
        Subspace comp = orthogonal_complement(model, hx);
        std::vector<Vector> v;
        for (int k = 0; k < comp.dim(); ++k) v.push_back(project_out(model, res.torus, comp.basis.col(k)));
        res.search = span(model, v);
    }
    Reduced red{model, x, res.search, res.torus};
    const PerturbedMap unperturbed = pm.scaled(0.0);

    if (res.search.dim() > 0) {
        // Model scale: the least singular value of the unperturbed linearisation.
        Matrix J0 = red.jacobian(Vector::Zero(res.search.dim()), unperturbed, opt.fd_step);
        const double smin = Eigen::JacobiSVD<Matrix>(J0).singularValues().minCoeff();
        if (pm.sup_bound() > opt.sup_threshold * smin)
            throw std::invalid_argument("solve_deformed: sup_bound " + std::to_string(pm.sup_bound()) +
                                        " exceeds the model threshold " + std::to_string(opt.sup_threshold * smin));
    }

    Vector c = Vector::Zero(res.search.dim());
    bool ok = res.search.dim() == 0 || newton(red, pm, opt, opt.tol, c, res.history, res.iterations);
    if (!ok) {
        // Continuation in the size of the perturbation.
        res.used_homotopy = true;
        for (int steps = opt.homotopy_steps; !ok && steps <= 16 * opt.homotopy_steps; steps *= 2) {
            c.setZero();
            ok = true;
            // intermediate stages only need to land in the next stage's basin
            const double loose = std::max(opt.tol, 1e-8);
            for (int k = 1; k <= steps && ok; ++k)
                ok = newton(red, pm.scaled(double(k) / steps), opt, k == steps ? opt.tol : loose, c, res.history,
                            res.iterations);
        }
    }
    res.xi = red.lift(c);
    res.y = model.flow(x, res.xi);
    res.residual = res.search.dim() ? red.eval(c, pm).norm() : 0.0;
    if (!ok || !std::isfinite(res.residual))
        throw DeformError("solve_deformed: Newton and continuation failed to converge", res.residual);
    res.full_residual = model.norm(project_out(model, stabilizer_at(model, res.y), pm(res.y)));
    pm.check_commutes(res.y);
    res.converged = true;
    return res;
}

nlohmann::json to_json(const DeformResult& r) {
    nlohmann::json j;
    j["schema"] = "kblow.deform_result/1";
    std::vector<double> xi(r.xi.data(), r.xi.data() + r.xi.size());
    j["xi"] = xi;
    nlohmann::json y = nlohmann::json::array();
    for (int i = 0; i < r.y.size(); ++i) y.push_back({r.y(i).real(), r.y(i).imag()});
    j["y"] = y;
    j["residual"] = r.residual;
    j["full_residual"] = r.full_residual;
    j["iterations"] = r.iterations;
    j["used_homotopy"] = r.used_homotopy;
    j["converged"] = r.converged;
    j["torus_dim"] = r.torus.dim();
    j["search_dim"] = r.search.dim();
    j["history"] = r.history;
    return j;
}

RicciMomentReport ricci_moment_check(const radial::RadialProfile& p, const std::vector<Quad>& h, int stencil) {
    using L = Quad;
    p.require_positive();
    const std::size_t n = p.size();
    if (h.size() != n) throw std::invalid_argument("ricci_moment_check: h has the wrong length");
    std::vector<L> tau(n);
    for (std::size_t i = 0; i < n; ++i) tau[i] = log(L(p.s[i]));
    fd::BasicDifferentiator<L> d(tau, stencil, 2);
    auto h1 = d.apply(1, h), h2 = d.apply(2, h);
    std::vector<L> q(n);
    for (std::size_t i = 0; i < n; ++i) {
        const L s = p.s[i];
        const L hs = h1[i] / s, hss = (h2[i] - h1[i]) / (s * s);
        const L lap = (p.m - 1) * hs / p.f[i] + (hs + s * hss) / p.g[i];
        // s rho' for rho = -log det, read off the profile: the Ricci-form Hamiltonian of the rotation
        const L rho_s = -((p.m - 1) * L(p.f1[i]) / p.f[i] + L(p.g1[i]) / p.g[i]);
        q[i] = lap + s * rho_s;
    }
    auto q1 = d.apply(1, q);
    RicciMomentReport out;
    out.n = n;
    const std::size_t skip = static_cast<std::size_t>(2 * stencil);
    for (std::size_t i = skip; i + skip < n; ++i) {
        const double v = static_cast<double>(abs(q1[i] / L(p.s[i])));
        if (v > out.max_defect) {
            out.max_defect = v;
            out.at_s = p.s[i];
        }
    }
    return out;
}

RicciMomentReport ricci_moment_check(const radial::RadialProfile& p, const std::vector<double>& h, int stencil) {
    return ricci_moment_check(p, std::vector<Quad>(h.begin(), h.end()), stencil);
}

RicciMomentRefinement ricci_moment_refinement(int m, const std::function<radial::Potential(double)>& potential,
                                              const std::function<Quad(Quad)>& hamiltonian,
                                              double s_min, double s_max, std::size_t n, int levels, int stencil,
                                              double min_order) {
    RicciMomentRefinement out;
    for (int l = 0; l < levels; ++l) {
        const std::size_t size = n << l;
        auto grid = radial::geometric_grid(s_min, s_max, size);
        auto prof = radial::RadialProfile::from_jets(m, grid, potential);
        std::vector<Quad> h(size);
        for (std::size_t i = 0; i < size; ++i) h[i] = hamiltonian(grid[i]);
        out.sizes.push_back(size);
        out.defects.push_back(ricci_moment_check(prof, h, stencil).max_defect);
    }
    out.converging = levels > 1;
    for (std::size_t l = 1; l < out.defects.size(); ++l) {
        // spacing in log s shrinks by this ratio between levels
        const double ratio = double(out.sizes[l] - 1) / double(out.sizes[l - 1] - 1);
        out.orders.push_back(std::log(out.defects[l - 1] / out.defects[l]) / std::log(ratio));
        if (out.orders.back() < min_order) out.converging = false;
    }
    return out;
}

}  // namespace kblow::moment
