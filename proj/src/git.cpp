#include "kblow/git.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace kblow::git {

namespace {

int exact_rank(std::vector<RationalVector> rows) {
    if (rows.empty()) return 0;
    const std::size_t n = rows[0].size();
    int rank = 0;
    for (std::size_t col = 0; col < n && rank < static_cast<int>(rows.size()); ++col) {
        std::size_t piv = rank;
        while (piv < rows.size() && rows[piv][col] == 0) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[piv], rows[rank]);
        for (std::size_t r = rank + 1; r < rows.size(); ++r) {
            if (rows[r][col] == 0) continue;
            Rational f = rows[r][col] / rows[rank][col];
            for (std::size_t c = col; c < n; ++c) rows[r][c] -= f * rows[rank][c];
        }
        ++rank;
    }
    return rank;
}

// Basis of {x : row.x = 0 for all rows}.
std::vector<RationalVector> nullspace(std::vector<RationalVector> rows, int dim) {
    std::vector<int> pivot_col;
    int rank = 0;
    for (int col = 0; col < dim && rank < static_cast<int>(rows.size()); ++col) {
        std::size_t piv = rank;
        while (piv < rows.size() && rows[piv][col] == 0) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[piv], rows[rank]);
        Rational lead = rows[rank][col];
        for (auto& x : rows[rank]) x /= lead;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<int>(r) == rank || rows[r][col] == 0) continue;
            Rational f = rows[r][col];
            for (int c = 0; c < dim; ++c) rows[r][c] -= f * rows[rank][c];
        }
        pivot_col.push_back(col);
        ++rank;
    }
    std::vector<RationalVector> basis;
    for (int free = 0; free < dim; ++free) {
        if (std::find(pivot_col.begin(), pivot_col.end(), free) != pivot_col.end()) continue;
        RationalVector v(dim, Rational(0));
        v[free] = 1;
        for (int i = 0; i < rank; ++i) v[pivot_col[i]] = -rows[i][free];
        basis.push_back(primitive(v));
    }
    return basis;
}

RationalVector axpy(const RationalVector& x, const Rational& a, const RationalVector& y) {
    RationalVector r = x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += a * y[i];
    return r;
}

Rational max_dot(const std::vector<RationalVector>& fs, const RationalVector& v) {
    Rational best = dot(fs.at(0), v);
    for (std::size_t i = 1; i < fs.size(); ++i) best = std::max(best, dot(fs[i], v));
    return best;
}

void check_length(const WeightSystem& ws, const RationalVector& v) {
    if (static_cast<int>(v.size()) != ws.rank)
        throw std::invalid_argument("vector of length " + std::to_string(v.size()) + " for a rank-" +
                                    std::to_string(ws.rank) + " torus");
}

// Orthogonal projection onto the complement of span(basis), exact.
RationalVector project_off(const std::vector<RationalVector>& orth_basis, RationalVector v) {
    for (const auto& b : orth_basis) v = axpy(v, -dot(v, b) / dot(b, b), b);
    return v;
}

std::vector<RationalVector> gram_schmidt(const std::vector<RationalVector>& vs) {
    std::vector<RationalVector> out;
    for (const auto& v : vs) {
        auto w = project_off(out, v);
        if (std::any_of(w.begin(), w.end(), [](const Rational& x) { return x != 0; })) out.push_back(w);
    }
    return out;
}

Rational rationalize(double x) {
    // Continued-fraction best approximation to relative accuracy 1e-12.
    if (!std::isfinite(x)) throw std::domain_error("rationalize: non-finite value");
    const bool neg = x < 0;
    double y = std::fabs(x);
    Integer h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double rem = y;
    for (int it = 0; it < 64; ++it) {
        double a = std::floor(rem);
        Integer ai(static_cast<long long>(a));
        Integer h2 = ai * h1 + h0, k2 = ai * k1 + k0;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        double approx = h1.convert_to<double>() / k1.convert_to<double>();
        if (std::fabs(approx - y) <= 1e-12 * std::max(y, 1e-300)) break;
        double frac = rem - a;
        if (frac < 1e-300) break;
        rem = 1.0 / frac;
        if (rem > 1e15) break;
    }
    Rational r(h1, k1);
    return neg ? Rational(-r) : r;
}

}  // namespace

RationalVector primitive(const RationalVector& v) {
    Integer l = 1;
    for (const auto& x : v) l = boost::multiprecision::lcm(l, Integer(denominator(x)));
    std::vector<Integer> ints;
    Integer g = 0;
    for (const auto& x : v) {
        Integer n = numerator(x) * (l / denominator(x));
        ints.push_back(n);
        g = boost::multiprecision::gcd(g, boost::multiprecision::abs(n));
    }
    RationalVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = g == 0 ? Rational(0) : Rational(ints[i] / g);
    return out;
}

bool in_span(const std::vector<RationalVector>& basis, const RationalVector& v) {
    if (std::all_of(v.begin(), v.end(), [](const Rational& x) { return x == 0; })) return true;
    if (basis.empty()) return false;
    auto rows = basis;
    int r0 = exact_rank(rows);
    rows.push_back(v);
    return exact_rank(rows) == r0;
}

void WeightSystem::validate() const {
    if (rank < 1) throw std::invalid_argument("weight system: rank must be positive");
    if (L.empty()) throw std::invalid_argument("weight system: L functionals must be nonempty");
    if (K.empty()) throw std::invalid_argument("weight system: K functionals must be nonempty");
    auto check = [&](const std::vector<RationalVector>& fs, const char* what) {
        for (const auto& f : fs)
            if (static_cast<int>(f.size()) != rank)
                throw std::invalid_argument(std::string("weight system: ") + what + " has a vector of wrong length");
    };
    check(L, "L");
    check(K, "K");
    check(stabilizer, "stabilizer");
    for (const auto& s : stabilizer) {
        for (const auto& f : L)
            if (dot(f, s) != 0) throw std::invalid_argument("weight system: an L functional is nonzero on the stabilizer");
        for (const auto& f : K)
            if (dot(f, s) != 0) throw std::invalid_argument("weight system: a K functional is nonzero on the stabilizer");
    }
}

ConeGenerators cone_generators(const std::vector<RationalVector>& rows, int dim) {
    std::vector<RationalVector> lines;
    for (int i = 0; i < dim; ++i) {
        RationalVector e(dim, Rational(0));
        e[i] = 1;
        lines.push_back(e);
    }
    std::vector<RationalVector> rays;
    std::vector<RationalVector> processed;

    auto tight_rows = [&](const RationalVector& x) {
        std::vector<std::size_t> t;
        for (std::size_t i = 0; i < processed.size(); ++i)
            if (dot(processed[i], x) == 0) t.push_back(i);
        return t;
    };
    auto rank_of = [&](const std::vector<std::size_t>& idx) {
        std::vector<RationalVector> sub;
        for (auto i : idx) sub.push_back(processed[i]);
        return exact_rank(sub);
    };

    for (const auto& a : rows) {
        if (static_cast<int>(a.size()) != dim) throw std::invalid_argument("cone_generators: row length mismatch");
        auto pivot = std::find_if(lines.begin(), lines.end(), [&](const RationalVector& v) { return dot(a, v) != 0; });
        if (pivot != lines.end()) {
            RationalVector v = *pivot;
            Rational av = dot(a, v);
            lines.erase(pivot);
            for (auto& u : lines) u = primitive(axpy(u, -dot(a, u) / av, v));
            for (auto& r : rays) r = primitive(axpy(r, -dot(a, r) / av, v));
            RationalVector nv = v;
            if (av > 0)
                for (auto& x : nv) x = -x;
            rays.push_back(primitive(nv));
            processed.push_back(a);
            continue;
        }
        std::vector<RationalVector> pos, keep;
        std::vector<Rational> pos_val, neg_val;
        std::vector<RationalVector> neg;
        for (const auto& r : rays) {
            Rational ar = dot(a, r);
            if (ar > 0) {
                pos.push_back(r);
                pos_val.push_back(ar);
            } else {
                keep.push_back(r);
                if (ar < 0) {
                    neg.push_back(r);
                    neg_val.push_back(ar);
                }
            }
        }
        const int face_rank = dim - static_cast<int>(lines.size());
        for (std::size_t i = 0; i < pos.size(); ++i) {
            auto tp = tight_rows(pos[i]);
            for (std::size_t j = 0; j < neg.size(); ++j) {
                auto tn = tight_rows(neg[j]);
                std::vector<std::size_t> common;
                std::set_intersection(tp.begin(), tp.end(), tn.begin(), tn.end(), std::back_inserter(common));
                if (rank_of(common) != face_rank - 2) continue;
                RationalVector c(dim);
                for (int k = 0; k < dim; ++k) c[k] = pos_val[i] * neg[j][k] - neg_val[j] * pos[i][k];
                keep.push_back(primitive(c));
            }
        }
        processed.push_back(a);
        rays.clear();
        const int new_rank = dim - static_cast<int>(lines.size());
        for (auto& r : keep) {
            if (std::find(rays.begin(), rays.end(), r) != rays.end()) continue;
            if (rank_of(tight_rows(r)) != new_rank - 1) continue;
            rays.push_back(r);
        }
    }
    auto orth = gram_schmidt(lines);
    for (auto& r : rays) r = primitive(project_off(orth, r));
    std::vector<RationalVector> unique;
    for (auto& r : rays)
        if (std::find(unique.begin(), unique.end(), r) == unique.end()) unique.push_back(r);
    return {lines, unique};
}

Rational weight_L(const WeightSystem& ws, const RationalVector& lambda) {
    check_length(ws, lambda);
    return max_dot(ws.L, lambda);
}

Rational weight_K(const WeightSystem& ws, const RationalVector& lambda) {
    check_length(ws, lambda);
    return max_dot(ws.K, lambda);
}

Verdict is_semistable(const WeightSystem& ws) {
    ws.validate();
    const int r = ws.rank;
    std::vector<RationalVector> rows;
    RationalVector tpos(r + 1, Rational(0));
    tpos[r] = -1;
    rows.push_back(tpos);
    for (const auto& l : ws.L) {
        RationalVector row = l;
        row.push_back(1);
        rows.push_back(row);
    }
    auto gens = cone_generators(rows, r + 1);
    for (const auto& g : gens.rays) {
        if (g[r] > 0) {
            RationalVector lambda(g.begin(), g.begin() + r);
            return {false, primitive(lambda)};
        }
    }
    return {true, std::nullopt};
}

ConeDescription zero_cone(const WeightSystem& ws, bool require_semistable) {
    ws.validate();
    if (require_semistable && !is_semistable(ws).value) throw std::domain_error("zero_cone: the point is not semistable");
    auto gens = cone_generators(ws.L, ws.rank);
    ConeDescription c;
    for (const auto& l : gens.lines) {
        c.rays.push_back(l);
        RationalVector neg = l;
        for (auto& x : neg) x = -x;
        c.rays.push_back(neg);
    }
    for (const auto& r : gens.rays) c.rays.push_back(r);
    c.facet_normals = ws.L;
    return c;
}

Verdict is_polystable_perturbed(const WeightSystem& ws) {
    auto semi = is_semistable(ws);
    if (!semi.value) return semi;
    return perturbation_positive_on_cone(ws);
}

Verdict perturbation_positive_on_cone(const WeightSystem& ws) {
    ws.validate();
    std::vector<RationalVector> rows = ws.L;
    rows.insert(rows.end(), ws.K.begin(), ws.K.end());
    auto gens = cone_generators(rows, ws.rank);
    for (const auto& l : gens.lines)
        if (!in_span(ws.stabilizer, l)) return {false, l};
    for (const auto& r : gens.rays)
        if (!in_span(ws.stabilizer, r)) return {false, r};
    return {true, std::nullopt};
}

EpsilonBound epsilon0_bound(const WeightSystem& ws, std::size_t sphere_samples, std::uint64_t seed) {
    if (!is_polystable_perturbed(ws).value)
        throw std::domain_error("epsilon0_bound: the point is not polystable for small perturbations");
    const int r = ws.rank;
    auto todbl = [&](const std::vector<RationalVector>& fs) {
        Eigen::MatrixXd M(fs.size(), r);
        for (std::size_t i = 0; i < fs.size(); ++i)
            for (int j = 0; j < r; ++j) M(i, j) = to_double(fs[i][j]);
        return M;
    };
    const Eigen::MatrixXd Lm = todbl(ws.L), Km = todbl(ws.K);

    // Orthonormal basis of the complement of the stabilizer.
    Eigen::MatrixXd B;
    auto stab = gram_schmidt(ws.stabilizer);
    if (stab.empty()) {
        B = Eigen::MatrixXd::Identity(r, r);
    } else {
        Eigen::MatrixXd S = todbl(stab).transpose();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(S);
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(r, r);
        B = Q.rightCols(r - static_cast<int>(stab.size()));
    }
    const int d = static_cast<int>(B.cols());
    EpsilonBound out;
    if (d == 0) {
        out.unbounded = true;
        out.bound = 1;
        return out;
    }

    auto wl = [&](const Eigen::VectorXd& u) { return (Lm * (B * u)).maxCoeff(); };
    auto wk = [&](const Eigen::VectorXd& u) { return (Km * (B * u)).maxCoeff(); };

    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < d; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e(i) = 1;
        pts.push_back(e);
        pts.push_back(-e);
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    while (pts.size() < std::max<std::size_t>(sphere_samples, pts.size())) {
        Eigen::VectorXd u(d);
        for (int i = 0; i < d; ++i) u(i) = nd(rng);
        if (u.norm() < 1e-12) continue;
        pts.push_back(u.normalized());
    }

    double delta = std::numeric_limits<double>::infinity();
    double C = 0;
    std::vector<std::pair<double, std::size_t>> feasible;
    std::vector<std::pair<double, std::size_t>> by_k;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double k = wk(pts[i]);
        C = std::max(C, std::fabs(k));
        by_k.emplace_back(-std::fabs(k), i);
        if (k <= 0) {
            double l = wl(pts[i]);
            feasible.emplace_back(l, i);
            delta = std::min(delta, l);
        }
    }

    // Pattern search on the sphere from the most promising samples.
    auto refine = [&](Eigen::VectorXd u, auto objective, auto admissible) {
        double best = objective(u);
        for (double h = 0.1; h > 1e-10; h *= 0.5) {
            bool improved = true;
            while (improved) {
                improved = false;
                for (int i = 0; i < d; ++i)
                    for (double s : {h, -h}) {
                        Eigen::VectorXd v = u;
                        v(i) += s;
                        v.normalize();
                        if (!admissible(v)) continue;
                        double val = objective(v);
                        if (val < best) {
                            best = val;
                            u = v;
                            improved = true;
                        }
                    }
            }
        }
        return best;
    };
    std::sort(feasible.begin(), feasible.end());
    for (std::size_t i = 0; i < std::min<std::size_t>(8, feasible.size()); ++i)
        delta = std::min(delta, refine(pts[feasible[i].second], wl, [&](const Eigen::VectorXd& v) { return wk(v) <= 0; }));
    std::sort(by_k.begin(), by_k.end());
    for (std::size_t i = 0; i < std::min<std::size_t>(8, by_k.size()); ++i)
        C = std::max(C, -refine(pts[by_k[i].second], [&](const Eigen::VectorXd& v) { return -std::fabs(wk(v)); },
                                [](const Eigen::VectorXd&) { return true; }));

    out.samples = pts.size();
    out.C = C;
    out.delta = delta;
    if (!std::isfinite(delta) || C == 0) {
        out.unbounded = true;
        out.bound = 1;
        return out;
    }
    out.bound = rationalize(delta / C);
    return out;
}

std::vector<std::vector<std::int64_t>> sample_rays(int rank, std::size_t count, std::uint64_t seed) {
    if (rank < 1) throw std::invalid_argument("sample_rays: rank must be positive");
    std::vector<std::vector<std::int64_t>> rays;
    const std::size_t box_target = std::max<std::size_t>(1, count / 2);
    std::int64_t B = 1;
    while (std::pow(2.0 * B + 1, rank) - 1 < static_cast<double>(box_target) && B < 1000000) ++B;
    if (rank == 1) B = 1;
    std::vector<std::int64_t> v(rank, -B);
    while (true) {
        std::int64_t g = 0;
        for (auto x : v) g = std::gcd(g, x < 0 ? -x : x);
        if (g == 1) rays.push_back(v);
        int i = rank - 1;
        while (i >= 0 && v[i] == B) v[i--] = -B;
        if (i < 0) break;
        ++v[i];
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    while (rays.size() < count) {
        std::vector<std::int64_t> w(rank);
        bool nonzero = false;
        for (auto& x : w) {
            x = static_cast<std::int64_t>(std::llround(nd(rng) * 1000.0));
            nonzero |= x != 0;
        }
        if (nonzero) rays.push_back(w);
    }
    return rays;
}

namespace {

struct ScaledFunctionals {
    std::vector<std::vector<Integer>> rows;
    Integer denom = 1;
};

ScaledFunctionals scale(const std::vector<RationalVector>& fs) {
    ScaledFunctionals s;
    for (const auto& f : fs)
        for (const auto& x : f) s.denom = boost::multiprecision::lcm(s.denom, Integer(denominator(x)));
    for (const auto& f : fs) {
        std::vector<Integer> row;
        for (const auto& x : f) row.push_back(numerator(x) * (s.denom / denominator(x)));
        s.rows.push_back(row);
    }
    return s;
}

Integer max_dot_int(const ScaledFunctionals& s, const std::vector<std::int64_t>& v) {
    Integer best;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        Integer acc = 0;
        for (std::size_t j = 0; j < v.size(); ++j) acc += s.rows[i][j] * v[j];
        if (i == 0 || acc > best) best = acc;
    }
    return best;
}

}  // namespace

std::vector<SweepEntry> sweep_stability(const WeightSystem& ws, const std::vector<Rational>& eps_list,
                                        std::size_t ray_samples, int jobs) {
    ws.validate();
    if (ray_samples < 1) throw std::invalid_argument("sweep_stability: need at least one ray");
    const auto rays = sample_rays(ws.rank, ray_samples);
    const auto Ls = scale(ws.L), Ks = scale(ws.K);
    const auto annihilator = ws.stabilizer.empty() ? std::vector<RationalVector>{} : nullspace(ws.stabilizer, ws.rank);
    const auto ann_s = scale(annihilator.empty() ? std::vector<RationalVector>{RationalVector(ws.rank, Rational(0))}
                                                 : annihilator);

    struct RayData {
        Rational wl, wk;
        Integer norm;
        bool in_stab = false;
    };
    std::vector<RayData> data(rays.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& v = rays[i];
            data[i].wl = Rational(max_dot_int(Ls, v), Ls.denom);
            data[i].wk = Rational(max_dot_int(Ks, v), Ks.denom);
            std::int64_t n = 0;
            for (auto x : v) n = std::max<std::int64_t>(n, x < 0 ? -x : x);
            data[i].norm = n;
            if (!ws.stabilizer.empty()) {
                bool zero = true;
                for (const auto& row : ann_s.rows) {
                    Integer acc = 0;
                    for (std::size_t j = 0; j < v.size(); ++j) acc += row[j] * v[j];
                    if (acc != 0) {
                        zero = false;
                        break;
                    }
                }
                data[i].in_stab = zero;
            }
        }
    };
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        work(0, rays.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (rays.size() + jobs - 1) / jobs;
        for (int t = 0; t < jobs; ++t) {
            std::size_t b = std::min(rays.size(), t * chunk), e = std::min(rays.size(), (t + 1) * chunk);
            pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }

    std::vector<SweepEntry> out;
    for (const auto& eps : eps_list) {
        SweepEntry e;
        e.eps = eps;
        e.rays_used = rays.size();
        const double epsd = to_double(eps);
        double best_d = std::numeric_limits<double>::infinity();
        bool have = false;
        for (std::size_t i = 0; i < rays.size(); ++i) {
            const auto& rd = data[i];
            if (rd.in_stab) continue;
            const double approx = (to_double(rd.wl) + epsd * to_double(rd.wk)) / rd.norm.convert_to<double>();
            const bool maybe_nonpos = approx <= 1e-9 * (1 + std::fabs(approx));
            if (have && !maybe_nonpos && approx > best_d + 1e-9 * (1 + std::fabs(best_d))) continue;
            Rational val = (rd.wl + eps * rd.wk) / Rational(rd.norm);
            if (val <= 0) e.nonpositive_off_stabilizer = true;
            if (!have || val < e.min_value) {
                have = true;
                e.min_value = val;
                e.argmin = RationalVector(rays[i].begin(), rays[i].end());
                best_d = to_double(val);
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

WeightSystem shift_polarization(const WeightSystem& ws, const Rational& c) {
    if (c < 0) throw std::invalid_argument("shift_polarization: c must be nonnegative");
    WeightSystem out = ws;
    out.K.clear();
    for (const auto& l : ws.L)
        for (const auto& m : ws.K) {
            RationalVector v(ws.rank);
            for (int i = 0; i < ws.rank; ++i) v[i] = c * l[i] + m[i];
            out.K.push_back(v);
        }
    return out;
}

Rational shifted_epsilon(const Rational& eps, const Rational& c) {
    Rational den = 1 - eps * c;
    if (den == 0) throw std::domain_error("shifted_epsilon: eps * c = 1");
    return eps / den;
}

nlohmann::json vector_json(const RationalVector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v) a.push_back(kblow::to_string(x));
    return a;
}

namespace {
RationalVector vector_from_json(const nlohmann::json& j) {
    RationalVector v;
    for (const auto& x : j) {
        if (x.is_string())
            v.push_back(parse_rational(x.get<std::string>()));
        else if (x.is_number_integer())
            v.emplace_back(x.get<long long>());
        else
            throw std::invalid_argument("functional entries must be integers or \"p/q\" strings");
    }
    return v;
}
std::vector<RationalVector> list_from_json(const nlohmann::json& j) {
    std::vector<RationalVector> out;
    for (const auto& row : j) out.push_back(vector_from_json(row));
    return out;
}
nlohmann::json list_json(const std::vector<RationalVector>& vs) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& v : vs) a.push_back(vector_json(v));
    return a;
}
}  // namespace

nlohmann::json to_json(const WeightSystem& ws) {
    return {{"schema", "kblow.weight_system/1"}, {"rank", ws.rank},
            {"L", list_json(ws.L)}, {"K", list_json(ws.K)}, {"stabilizer", list_json(ws.stabilizer)}};
}

WeightSystem weight_system_from_json(const nlohmann::json& j) {
    WeightSystem ws;
    ws.rank = j.at("rank").get<int>();
    ws.L = list_from_json(j.at("L"));
    ws.K = list_from_json(j.at("K"));
    if (j.contains("stabilizer")) ws.stabilizer = list_from_json(j.at("stabilizer"));
    ws.validate();
    return ws;
}

}  // namespace kblow::git
