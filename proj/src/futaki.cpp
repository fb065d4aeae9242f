#include "kblow/futaki.hpp"

#include <functional>
#include <sstream>
#include <stdexcept>

namespace kblow::futaki {

Rational BlowupPoint::cotangent_weight() const { return -lap_h_p; }
Rational BlowupPoint::fibre_weight() const { return -h_p; }

BlowupPoint point_from_weights(const Rational& fibre_weight, const Rational& cotangent_weight) {
    return BlowupPoint{-fibre_weight, -cotangent_weight};
}

// ---------------------------------------------------------------- ExactExpansion

ExactExpansion ExactExpansion::constant(const Rational& c, std::string variable) {
    return monomial(c, 0, std::move(variable));
}

ExactExpansion ExactExpansion::monomial(const Rational& c, long exponent, std::string variable) {
    ExactExpansion e(std::move(variable));
    e.set(exponent, c);
    return e;
}

Rational ExactExpansion::coeff(long exponent) const {
    auto it = coeffs_.find(exponent);
    return it == coeffs_.end() ? Rational(0) : it->second;
}

void ExactExpansion::set(long exponent, const Rational& value) {
    if (value == 0)
        coeffs_.erase(exponent);
    else
        coeffs_[exponent] = value;
}

long ExactExpansion::lowest_exponent() const {
    if (coeffs_.empty()) throw std::logic_error("zero expansion has no lowest exponent");
    return coeffs_.begin()->first;
}

long ExactExpansion::highest_exponent() const {
    if (coeffs_.empty()) throw std::logic_error("zero expansion has no highest exponent");
    return coeffs_.rbegin()->first;
}

ExactExpansion ExactExpansion::truncated(long max_exponent) const {
    ExactExpansion r(var_);
    for (const auto& [k, c] : coeffs_)
        if (k <= max_exponent) r.coeffs_.emplace(k, c);
    return r;
}

Rational ExactExpansion::evaluate(const Rational& x) const {
    Rational s = 0;
    for (const auto& [k, c] : coeffs_) {
        if (k < 0 && x == 0) throw std::domain_error("negative power evaluated at zero");
        Rational p = 1;
        Rational base = k >= 0 ? x : Rational(1) / x;
        for (long i = 0; i < (k >= 0 ? k : -k); ++i) p *= base;
        s += c * p;
    }
    return s;
}

ExactExpansion ExactExpansion::inverse_series(long order) const {
    Rational c0 = coeff(0);
    if (c0 == 0 || (!coeffs_.empty() && lowest_exponent() < 0))
        throw std::domain_error("inverse_series needs a nonzero constant term and no negative powers");
    std::vector<Rational> inv(order + 1);
    inv[0] = 1 / c0;
    for (long n = 1; n <= order; ++n) {
        Rational acc = 0;
        for (const auto& [k, c] : coeffs_) {
            if (k == 0) continue;
            if (k > n) break;
            acc += c * inv[n - k];
        }
        inv[n] = -acc / c0;
    }
    ExactExpansion r(var_);
    for (long n = 0; n <= order; ++n) r.set(n, inv[n]);
    return r;
}

ExactExpansion& ExactExpansion::operator+=(const ExactExpansion& o) {
    for (const auto& [k, c] : o.coeffs_) set(k, coeff(k) + c);
    return *this;
}

ExactExpansion& ExactExpansion::operator-=(const ExactExpansion& o) {
    for (const auto& [k, c] : o.coeffs_) set(k, coeff(k) - c);
    return *this;
}

ExactExpansion& ExactExpansion::operator*=(const Rational& c) {
    if (c == 0) {
        coeffs_.clear();
        return *this;
    }
    for (auto& kv : coeffs_) kv.second *= c;
    return *this;
}

ExactExpansion operator*(const ExactExpansion& a, const ExactExpansion& b) {
    ExactExpansion r(a.var_);
    std::map<long, Rational> acc;
    for (const auto& [i, x] : a.coeffs_)
        for (const auto& [j, y] : b.coeffs_) acc[i + j] += x * y;
    for (const auto& [k, c] : acc) r.set(k, c);
    return r;
}

std::string ExactExpansion::to_string() const {
    if (coeffs_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, c] : coeffs_) {
        if (!first) os << " + ";
        first = false;
        os << "(" << c.str() << ")";
        if (k != 0) os << "*" << var_ << "^" << k;
    }
    return os.str();
}

// ---------------------------------------------------------------- jets

long jet_dimension(int m, int l) {
    if (m < 1 || l < 1) throw std::invalid_argument("jet_dimension: m and l must be positive");
    return binomial(m + l - 1, m).convert_to<long>();
}

Rational jet_weight(int m, int l, const RationalVector& weights) {
    if (m < 1 || l < 1) throw std::invalid_argument("jet_weight: m and l must be positive");
    if (static_cast<int>(weights.size()) != m)
        throw std::invalid_argument("jet_weight: expected " + std::to_string(m) + " weights, got " +
                                    std::to_string(weights.size()));
    Rational total = 0;
    for (const auto& w : weights) total += w;
    return Rational(binomial(m + l - 1, m + 1)) * total;
}

// ---------------------------------------------------------------- Futaki

Rational futaki(const PolarizedData& d) {
    if (d.a0 == 0) throw std::domain_error("futaki: a0 = 0 is degenerate");
    return d.a1 / d.a0 * d.b0 - d.b1;
}

BlowupCoefficients blowup_coefficients(const PolarizedData& d, const BlowupPoint& p, int m) {
    if (m < 2) throw std::invalid_argument("blowup_coefficients: dimension must be at least 2");
    const Rational inv_mfact = Rational(1) / Rational(factorial(m));
    const Rational half_inv_m2fact = Rational(1) / Rational(2 * factorial(m - 2));
    const Rational inv_m1fact = Rational(1) / Rational(factorial(m + 1));

    using E = ExactExpansion;
    BlowupCoefficients c;
    c.a0 = E::constant(d.a0) - E::monomial(inv_mfact, m);
    c.a1 = E::constant(d.a1) - E::monomial(half_inv_m2fact, m - 1);
    c.b0 = E::constant(d.b0) + E::monomial(inv_mfact * p.h_p, m) + E::monomial(inv_m1fact * p.lap_h_p, m + 1);
    c.b1 = E::constant(d.b1) + E::monomial(half_inv_m2fact * p.h_p, m - 1) +
           E::monomial(Rational(m - 2) / 2 * inv_mfact * p.lap_h_p, m);
    return c;
}

std::pair<PolarizedData, BlowupPoint> normalize_hamiltonian(const PolarizedData& d, const BlowupPoint& p) {
    if (d.a0 == 0) throw std::domain_error("normalize_hamiltonian: a0 = 0");
    const Rational shift = d.b0 / d.a0;
    PolarizedData nd = d;
    nd.b0 = 0;
    nd.b1 = d.b1 - shift * d.a1;
    BlowupPoint np = p;
    np.h_p = p.h_p + shift;
    return {nd, np};
}

BlowupFutaki::BlowupFutaki(const PolarizedData& d, const BlowupPoint& p, int m)
    : d_(d), p_(p), m_(m), c_(blowup_coefficients(d, p, m)) {
    if (d.a0 == 0) throw std::domain_error("blowup_futaki: a0 = 0");
}

Rational BlowupFutaki::value(const Rational& eps) const {
    const Rational ta0 = c_.a0.evaluate(eps);
    if (ta0 == 0) throw std::domain_error("blowup_futaki: exceptional volume exhausts the total volume at eps = " + eps.str());
    return c_.a1.evaluate(eps) / ta0 * c_.b0.evaluate(eps) - c_.b1.evaluate(eps);
}

ExactExpansion BlowupFutaki::series_to_order(long n) const {
    ExactExpansion num = c_.a1 * c_.b0 - c_.a0 * c_.b1;
    return (num.truncated(n) * c_.a0.inverse_series(n)).truncated(n);
}

BlowupFutaki::Regime BlowupFutaki::regime() const {
    if (m_ >= 3) return Regime::HigherDim;
    return d_.a1 == 0 ? Regime::SurfaceA1Zero : Regime::SurfaceGeneric;
}

long BlowupFutaki::predicted_order() const {
    switch (regime()) {
        case Regime::HigherDim: return m_;
        case Regime::SurfaceGeneric: return 3;
        case Regime::SurfaceA1Zero: return 4;
    }
    return m_;
}

ExactExpansion BlowupFutaki::predicted_series() const {
    auto [d, p] = normalize_hamiltonian(d_, p_);
    const Rational& h = p.h_p;
    const Rational& lap = p.lap_h_p;
    ExactExpansion e;
    switch (regime()) {
        case Regime::HigherDim: {
            e.set(m_ - 1, -h / Rational(2 * factorial(m_ - 2)));
            e.set(m_, -(Rational(m_ - 2) / 2 * lap - d.a1 / d.a0 * h) / Rational(factorial(m_)));
            break;
        }
        case Regime::SurfaceGeneric:
            e.set(1, -h / 2);
            e.set(2, d.a1 / (2 * d.a0) * h);
            e.set(3, (d.a1 / 3 * lap - h / 2) / (2 * d.a0));
            break;
        case Regime::SurfaceA1Zero:
            e.set(1, -h / 2);
            // The a1 -> 0 limit of the generic surface formula fixes this sign as negative.
            e.set(3, -h / (4 * d.a0));
            e.set(4, -lap / (12 * d.a0));
            break;
    }
    return e;
}

// ---------------------------------------------------------------- projective oracle

namespace {

void for_each_monomial(int nvars, int degree, std::vector<int>& exps, int pos,
                       const std::function<void(const std::vector<int>&)>& fn) {
    if (pos == nvars - 1) {
        exps[pos] = degree;
        fn(exps);
        return;
    }
    for (int e = degree; e >= 0; --e) {
        exps[pos] = e;
        for_each_monomial(nvars, degree - e, exps, pos + 1, fn);
    }
}

// Coefficients c_0..c_deg of the polynomial through (x_i, y_i).
std::vector<Rational> interpolate(const std::vector<Rational>& xs, const std::vector<Rational>& ys) {
    const std::size_t n = xs.size();
    std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n + 1));
    for (std::size_t i = 0; i < n; ++i) {
        Rational p = 1;
        for (std::size_t j = 0; j < n; ++j) {
            a[i][j] = p;
            p *= xs[i];
        }
        a[i][n] = ys[i];
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (a[piv][col] == 0) ++piv;
        std::swap(a[piv], a[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0) continue;
            Rational f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<Rational> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i][n] / a[i][i];
    return out;
}

}  // namespace

PolarizedData projective_weight_data(int m, const std::vector<long>& action_weights) {
    if (m < 1) throw std::invalid_argument("projective_weight_data: m must be positive");
    if (static_cast<int>(action_weights.size()) != m + 1)
        throw std::invalid_argument("projective_weight_data: expected m+1 weights");
    std::vector<Rational> ks, ds, ws;
    std::vector<int> exps(m + 1);
    for (int k = 1; k <= m + 2; ++k) {
        Integer count = 0, weight = 0;
        for_each_monomial(m + 1, k, exps, 0, [&](const std::vector<int>& e) {
            ++count;
            for (int i = 0; i <= m; ++i) weight += Integer(e[i]) * action_weights[i];
        });
        ks.emplace_back(k);
        ds.emplace_back(count);
        ws.emplace_back(weight);
    }
    auto dc = interpolate(ks, ds);
    auto wc = interpolate(ks, ws);
    PolarizedData d;
    d.m = m;
    d.a0 = dc[m];
    d.a1 = dc[m - 1];
    d.b0 = wc[m + 1];
    d.b1 = wc[m];
    return d;
}

// ---------------------------------------------------------------- JSON

BlowupPoint projective_vertex(const std::vector<long>& action_weights, int vertex) {
    if (vertex < 0 || vertex >= static_cast<int>(action_weights.size()))
        throw std::invalid_argument("projective_vertex: vertex index out of range");
    const long w = action_weights[vertex];
    long cotangent = 0;
    for (long wi : action_weights) cotangent += wi - w;
    return point_from_weights(Rational(w), Rational(cotangent));
}

nlohmann::json to_json(const ExactExpansion& e) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [k, v] : e.coefficients()) c[std::to_string(k)] = kblow::to_string(v);
    return {{"schema", "kblow.expansion/1"}, {"variable", e.variable()}, {"coefficients", c}};
}

ExactExpansion expansion_from_json(const nlohmann::json& j) {
    ExactExpansion e(j.value("variable", std::string("eps")));
    for (const auto& [k, v] : j.at("coefficients").items()) e.set(std::stol(k), parse_rational(v.get<std::string>()));
    return e;
}

namespace {
Rational field(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<long long>());
    throw std::invalid_argument(std::string("field '") + key + "' must be an integer or a \"p/q\" string");
}
}  // namespace

nlohmann::json to_json(const PolarizedData& d) {
    return {{"schema", "kblow.polarized/1"}, {"m", d.m}, {"a0", kblow::to_string(d.a0)},
            {"a1", kblow::to_string(d.a1)}, {"b0", kblow::to_string(d.b0)}, {"b1", kblow::to_string(d.b1)}};
}

PolarizedData polarized_from_json(const nlohmann::json& j) {
    PolarizedData d;
    d.m = j.at("m").get<int>();
    d.a0 = field(j, "a0");
    d.a1 = field(j, "a1");
    d.b0 = field(j, "b0");
    d.b1 = field(j, "b1");
    return d;
}

nlohmann::json to_json(const BlowupPoint& p) {
    return {{"schema", "kblow.blowup_point/1"}, {"h_p", kblow::to_string(p.h_p)},
            {"lap_h_p", kblow::to_string(p.lap_h_p)}, {"w", kblow::to_string(p.cotangent_weight())}};
}

BlowupPoint point_from_json(const nlohmann::json& j) {
    BlowupPoint p;
    p.h_p = field(j, "h_p");
    if (j.contains("lap_h_p")) {
        p.lap_h_p = field(j, "lap_h_p");
        if (j.contains("w") && field(j, "w") != -p.lap_h_p)
            throw std::invalid_argument("blowup point: w must equal -lap_h_p");
    } else {
        p.lap_h_p = -field(j, "w");
    }
    return p;
}

}  // namespace kblow::futaki
