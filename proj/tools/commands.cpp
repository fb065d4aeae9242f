#include "commands.hpp"

#include "acceptance.hpp"
#include "kblow/bs.hpp"
#include "kblow/futaki.hpp"
#include "kblow/git.hpp"
#include "kblow/gluing.hpp"
#include "kblow/moment.hpp"
#include "kblow/radial.hpp"
#include "kblow/rational.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace kblow::cli {

namespace fk = kblow::futaki;
namespace gs = kblow::git;
namespace mm = kblow::moment;
namespace gl = kblow::gluing;

namespace {

Rational rational_value(const json& v) {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<long long>());
    throw std::invalid_argument("expected an integer or a \"p/q\" string");
}

std::vector<Rational> rational_list(const Section& s, const std::string& key, std::vector<Rational> fallback) {
    if (!s.has(key)) return fallback;
    const auto& arr = s.raw().at(key);
    if (!arr.is_array()) s.fail(key, "expected an array");
    std::vector<Rational> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        try {
            out.push_back(rational_value(arr[i]));
        } catch (const std::exception& ex) {
            s.fail(key + "/" + std::to_string(i), ex.what());
        }
    }
    return out;
}

json string_list(const std::vector<Rational>& v) {
    json out = json::array();
    for (const auto& q : v) out.push_back(to_string(q));
    return out;
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

std::string regime_name(fk::BlowupFutaki::Regime r) {
    switch (r) {
        case fk::BlowupFutaki::Regime::HigherDim: return "m >= 3";
        case fk::BlowupFutaki::Regime::SurfaceGeneric: return "m = 2, a1 != 0";
        case fk::BlowupFutaki::Regime::SurfaceA1Zero: return "m = 2, a1 = 0";
    }
    return "";
}

}  // namespace

int futaki_command(Run& run) {
    auto root = run.root();
    root.allow_only({"schema", "polarized", "point", "projective", "order", "eps"});

    fk::PolarizedData d;
    fk::BlowupPoint p;
    json resolved = {{"schema", "kblow.futaki_config/1"}};
    std::string data_key = "polarized";
    if (root.has("projective")) {
        if (root.has("polarized") || root.has("point"))
            root.fail("projective", "give either projective weights or polarized data with a point");
        auto pr = root.child("projective");
        pr.allow_only({"weights", "vertex"});
        const auto w = pr.get<std::vector<long>>("weights");
        if (w.size() < 3) pr.fail("weights", "need m + 1 weights with m >= 2");
        const int vertex = pr.get<int>("vertex", 0);
        if (vertex < 0 || vertex >= static_cast<int>(w.size())) pr.fail("vertex", "index out of range");
        d = fk::projective_weight_data(static_cast<int>(w.size()) - 1, w);
        p = fk::projective_vertex(w, vertex);
        resolved["projective"] = {{"weights", w}, {"vertex", vertex}};
        data_key = "projective";
    } else {
        d = root.parse("polarized", fk::polarized_from_json);
        p = root.parse("point", fk::point_from_json);
        resolved["polarized"] = fk::to_json(d);
        resolved["point"] = fk::to_json(p);
    }
    if (d.m < 2) root.fail(data_key, "dimension must be at least 2");
    if (d.a0 <= 0) root.fail(data_key, "a0 must be positive");

    fk::BlowupFutaki bf(d, p, d.m);
    const long order = root.get<long>("order", bf.predicted_order() + 2);
    if (order < 1 || order > 64) root.fail("order", "expected 1..64");
    const auto eps = rational_list(root, "eps", {Rational(1, 10), Rational(1, 100), Rational(1, 1000)});
    for (std::size_t i = 0; i < eps.size(); ++i)
        if (eps[i] <= 0 || eps[i] >= 1) root.fail("eps/" + std::to_string(i), "expected 0 < eps < 1");
    resolved["order"] = order;
    resolved["eps"] = string_list(eps);
    run.set_resolved_config(resolved);

    run.begin_phase("series");
    const Rational base_futaki = fk::futaki(d);
    const auto normalized = fk::normalize_hamiltonian(d, p).second;
    const auto series = bf.series_to_order(order);
    json values = json::array();
    bool all_zero = series.is_zero();
    for (const auto& e : eps) {
        const Rational v = bf.value(e);
        all_zero = all_zero && v == 0;
        values.push_back({{"eps", to_string(e)}, {"value", to_string(v)}, {"approx", to_double(v)}});
    }

    json comparison;
    bool ok = true;
    if (base_futaki == 0) {
        const auto predicted = bf.predicted_series();
        const bool match = bf.series_to_order(bf.predicted_order()) == predicted;
        ok = match;
        comparison = {{"verdict", match ? "match, exact" : "mismatch"},
                      {"regime", regime_name(bf.regime())},
                      {"order", bf.predicted_order()},
                      {"predicted", fk::to_json(predicted)}};
    } else {
        comparison = {{"verdict", "not applicable"}, {"reason", "the base Futaki invariant is nonzero"}};
    }
    const bool expect_zero = base_futaki == 0 && normalized.h_p == 0 && normalized.lap_h_p == 0;
    if (expect_zero && !all_zero) ok = false;

    const auto& c = bf.coefficients();
    json report = {{"schema", "kblow.futaki_report/1"},
                   {"m", d.m},
                   {"polarized", fk::to_json(d)},
                   {"point", fk::to_json(p)},
                   {"normalized_point", fk::to_json(normalized)},
                   {"base_futaki", to_string(base_futaki)},
                   {"coefficients",
                    {{"a0", fk::to_json(c.a0)}, {"a1", fk::to_json(c.a1)}, {"b0", fk::to_json(c.b0)}, {"b1", fk::to_json(c.b1)}}},
                   {"series", fk::to_json(series)},
                   {"series_order", order},
                   {"values", values},
                   {"comparison", comparison},
                   {"vanishing", {{"expected", expect_zero}, {"all_zero", all_zero}}}};
    if (data_key == "projective") report["projective"] = resolved["projective"];
    run.write_json("futaki.json", report);
    print(report);
    if (!ok) throw CheckError(expect_zero && !all_zero ? "blowup Futaki invariant does not vanish identically"
                                                       : "exact series disagrees with the closed-form prediction");
    return Success;
}

int stability_command(Run& run) {
    auto root = run.root();
    root.allow_only({"schema", "system", "polarization_shift", "epsilon0", "sweep"});
    auto ws = root.parse("system", gs::weight_system_from_json);
    json resolved = {{"schema", "kblow.stability_config/1"}, {"system", gs::to_json(ws)}};
    if (root.has("polarization_shift")) {
        const Rational c = root.parse("polarization_shift", rational_value);
        ws = gs::shift_polarization(ws, c);
        resolved["polarization_shift"] = to_string(c);
    }
    std::size_t samples = 4000, rays = run.strict() ? 50000 : 20000;
    if (root.has("epsilon0")) {
        auto e = root.child("epsilon0");
        e.allow_only({"samples"});
        samples = e.get<std::size_t>("samples", samples);
    }
    std::vector<Rational> eps;
    if (root.has("sweep")) {
        auto s = root.child("sweep");
        s.allow_only({"eps", "rays"});
        rays = s.get<std::size_t>("rays", rays);
        eps = rational_list(s, "eps", {});
        for (std::size_t i = 0; i < eps.size(); ++i)
            if (eps[i] <= 0) s.fail("eps/" + std::to_string(i), "expected eps > 0");
    }
    if (samples == 0) root.fail("epsilon0", "samples must be positive");
    if (rays == 0) root.fail("sweep", "rays must be positive");

    run.begin_phase("verdict");
    const auto semi = gs::is_semistable(ws);
    const auto poly = gs::is_polystable_perturbed(ws);
    const auto positive = gs::perturbation_positive_on_cone(ws);
    const std::string verdict = poly.value ? "polystable" : semi.value ? "semistable" : "unstable";

    json bound = nullptr;
    gs::EpsilonBound eb;
    if (poly.value) {
        run.begin_phase("epsilon0");
        eb = gs::epsilon0_bound(ws, samples, run.seed());
        bound = {{"epsilon0", eb.unbounded ? json(nullptr) : json(to_string(eb.bound))},
                 {"approx", eb.unbounded ? std::numeric_limits<double>::infinity() : to_double(eb.bound)},
                 {"unbounded", eb.unbounded},
                 {"approximate", eb.approximate},
                 {"delta", eb.delta},
                 {"C", eb.C},
                 {"samples", eb.samples}};
    }
    if (eps.empty()) {
        const Rational base = poly.value ? (eb.unbounded ? Rational(1) : eb.bound) : Rational(1, 1000);
        for (int k = 1; k <= 5; ++k) eps.push_back(poly.value ? base / (Rational(2) * k * k) : base / (k * k));
    }
    resolved["epsilon0"] = {{"samples", samples}};
    resolved["sweep"] = {{"eps", string_list(eps)}, {"rays", rays}};
    run.set_resolved_config(resolved);

    run.begin_phase("sweep");
    const auto sweep = gs::sweep_stability(ws, eps, rays, run.jobs());
    int checked = 0, disagreements = 0;
    json entries = json::array();
    std::ostringstream csv;
    csv << "eps,min_value,nonpositive_off_stabilizer,rays_used,checked,agrees\n";
    for (const auto& e : sweep) {
        // Polystable: the verdict covers eps below the bound. Otherwise the witness certifies
        // instability exactly wherever w_L + eps w_K <= 0 on it.
        bool covered = false;
        if (poly.value) {
            covered = eb.unbounded || e.eps < eb.bound;
        } else if (poly.witness) {
            covered = gs::weight_L(ws, *poly.witness) + e.eps * gs::weight_K(ws, *poly.witness) <= 0;
        }
        const bool sweep_stable = !e.nonpositive_off_stabilizer;
        const bool agrees = sweep_stable == poly.value;
        if (covered) {
            ++checked;
            if (!agrees) ++disagreements;
        }
        entries.push_back({{"eps", to_string(e.eps)},
                           {"min_value", to_string(e.min_value)},
                           {"argmin", gs::vector_json(e.argmin)},
                           {"nonpositive_off_stabilizer", e.nonpositive_off_stabilizer},
                           {"rays_used", e.rays_used},
                           {"checked", covered},
                           {"agrees", agrees}});
        csv << to_string(e.eps) << ',' << fmt::format("{:.17g}", to_double(e.min_value)) << ','
            << e.nonpositive_off_stabilizer << ',' << e.rays_used << ',' << covered << ',' << agrees << '\n';
    }

    json report = {{"schema", "kblow.stability_report/1"},
                   {"verdict", verdict},
                   {"witness", poly.witness ? gs::vector_json(*poly.witness) : json(nullptr)},
                   {"bound", bound},
                   {"semistable", semi.value},
                   {"perturbation_positive_on_cone", positive.value},
                   {"sweep", entries},
                   {"sweep_checked", checked},
                   {"sweep_disagreements", disagreements}};
    if (semi.value) {
        const auto cone = gs::zero_cone(ws);
        json r = json::array(), f = json::array();
        for (const auto& v : cone.rays) r.push_back(gs::vector_json(v));
        for (const auto& v : cone.facet_normals) f.push_back(gs::vector_json(v));
        report["zero_cone"] = {{"rays", r}, {"facet_normals", f}};
    }
    run.write_json("stability.json", report);
    run.write("stability_sweep.csv", csv.str());
    print({{"verdict", verdict}, {"witness", report["witness"]}, {"bound", bound},
           {"sweep_disagreements", disagreements}});
    if (disagreements > 0)
        throw CheckError(fmt::format("ray sweep disagrees with the exact verdict at {} of {} checked eps values",
                                     disagreements, checked));
    return Success;
}

namespace {

mm::Point point_from(const Section& s, const std::string& key, int n) {
    if (!s.has(key)) s.fail(key, "required field is missing");
    const auto& arr = s.raw().at(key);
    if (!arr.is_array() || static_cast<int>(arr.size()) != n)
        s.fail(key, fmt::format("expected an array of {} coordinates", n));
    mm::Point z(n);
    for (int i = 0; i < n; ++i) {
        const auto& v = arr[i];
        if (v.is_number()) {
            z(i) = v.get<double>();
        } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
            z(i) = {v[0].get<double>(), v[1].get<double>()};
        } else {
            s.fail(key + "/" + std::to_string(i), "expected a number or [re, im]");
        }
    }
    return z;
}

}  // namespace

int deform_command(Run& run) {
    auto root = run.root();
    root.allow_only({"schema", "model", "x", "perturbation", "options", "ricci_moment"});
    const auto model = root.parse("model", mm::ActionModel::from_json);
    const auto x = point_from(root, "x", model.n());
    const auto pm = root.parse("perturbation", [&](const json& j) { return mm::PerturbedMap::from_json(model, j); });
    mm::DeformOptions opt;
    if (root.has("options")) {
        auto o = root.child("options");
        o.allow_only({"tol", "precondition_tol", "sup_threshold", "max_newton", "max_backtracks", "homotopy_steps",
                      "fd_step"});
        opt.tol = o.get<double>("tol", opt.tol);
        opt.precondition_tol = o.get<double>("precondition_tol", opt.precondition_tol);
        opt.sup_threshold = o.get<double>("sup_threshold", opt.sup_threshold);
        opt.max_newton = o.get<int>("max_newton", opt.max_newton);
        opt.max_backtracks = o.get<int>("max_backtracks", opt.max_backtracks);
        opt.homotopy_steps = o.get<int>("homotopy_steps", opt.homotopy_steps);
        opt.fd_step = o.get<double>("fd_step", opt.fd_step);
        if (!(opt.tol > 0)) o.fail("tol", "must be positive");
    }
    json xs = json::array();
    for (int i = 0; i < x.size(); ++i) xs.push_back({x(i).real(), x(i).imag()});
    json resolved = {{"schema", "kblow.deform_config/1"},
                     {"model", model.to_json()},
                     {"x", xs},
                     {"perturbation", root.raw().at("perturbation")},
                     {"options",
                      {{"tol", opt.tol},
                       {"precondition_tol", opt.precondition_tol},
                       {"sup_threshold", opt.sup_threshold},
                       {"max_newton", opt.max_newton},
                       {"max_backtracks", opt.max_backtracks},
                       {"homotopy_steps", opt.homotopy_steps},
                       {"fd_step", opt.fd_step}}}};

    struct RicciSpec {
        int m = 1;
        double s_min = 0.1, s_max = 10.0, max_defect = 1e-6, min_order = 1.8;
        std::size_t points = 2500;
        int levels = 3, stencil = 3;
    };
    std::optional<RicciSpec> ricci;
    if (root.has("ricci_moment")) {
        auto r = root.child("ricci_moment");
        r.allow_only({"m", "s_min", "s_max", "points", "levels", "stencil", "max_defect", "min_order"});
        RicciSpec sp;
        sp.m = r.get<int>("m", sp.m);
        sp.s_min = r.get<double>("s_min", sp.s_min);
        sp.s_max = r.get<double>("s_max", sp.s_max);
        sp.points = r.get<std::size_t>("points", sp.points);
        sp.levels = r.get<int>("levels", sp.levels);
        sp.stencil = r.get<int>("stencil", sp.stencil);
        sp.max_defect = r.get<double>("max_defect", sp.max_defect);
        sp.min_order = r.get<double>("min_order", sp.min_order);
        if (sp.m < 1) r.fail("m", "must be positive");
        if (!(sp.s_min > 0 && sp.s_max > sp.s_min)) r.fail("s_min", "need 0 < s_min < s_max");
        if (sp.levels < 2) r.fail("levels", "need at least two levels to observe an order");
        ricci = sp;
        resolved["ricci_moment"] = {{"m", sp.m},           {"s_min", sp.s_min},       {"s_max", sp.s_max},
                                    {"points", sp.points}, {"levels", sp.levels},     {"stencil", sp.stencil},
                                    {"max_defect", sp.max_defect}, {"min_order", sp.min_order}};
    }
    run.set_resolved_config(resolved);

    run.begin_phase("solve");
    mm::DeformResult res;
    try {
        res = mm::solve_deformed(model, x, pm, opt);
    } catch (const mm::DeformError& ex) {
        throw ConvergenceError(fmt::format("{} (last residual {:.3e})", ex.what(), ex.last_residual));
    } catch (const std::invalid_argument& ex) {
        throw CheckError(ex.what());
    }
    double commutator = 0.0;
    try {
        commutator = pm.check_commutes(res.y);
    } catch (const std::domain_error& ex) {
        throw CheckError(ex.what());
    }
    json report = to_json(res);
    report["schema"] = "kblow.deform_report/1";
    report["commutator_defect"] = commutator;
    report["sup_bound"] = pm.sup_bound();
    std::ostringstream hist;
    hist << "iteration,residual\n";
    for (std::size_t i = 0; i < res.history.size(); ++i) hist << i << ',' << fmt::format("{:.17g}", res.history[i]) << '\n';
    run.write("deform_history.csv", hist.str());

    bool ricci_ok = true;
    if (ricci) {
        run.begin_phase("ricci_moment");
        auto fs = [](double s) { return radial::Potential(log(1.0 + radial::variable(s))); };
        auto h = [](mm::Quad s) { return s / (1 + s); };
        const auto rr = mm::ricci_moment_refinement(ricci->m, fs, h, ricci->s_min, ricci->s_max, ricci->points,
                                                    ricci->levels, ricci->stencil, ricci->min_order);
        std::ostringstream csv;
        csv << "points,defect,order\n";
        for (std::size_t i = 0; i < rr.sizes.size(); ++i)
            csv << rr.sizes[i] << ',' << fmt::format("{:.17g}", rr.defects[i]) << ','
                << (i == 0 ? std::string() : fmt::format("{:.6f}", rr.orders[i - 1])) << '\n';
        run.write("ricci_moment.csv", csv.str());
        ricci_ok = rr.converging && rr.defects.back() < ricci->max_defect;
        report["ricci_moment"] = {{"sizes", rr.sizes}, {"defects", rr.defects}, {"orders", rr.orders},
                                  {"converging", rr.converging}, {"ok", ricci_ok}};
    }
    run.write_json("deform.json", report);
    print(report);
    const double full_tol = run.strict() ? opt.tol : 10 * opt.tol;
    if (!res.converged || res.residual > opt.tol)
        throw ConvergenceError(fmt::format("deformation residual {:.3e} above tolerance {:.1e}", res.residual, opt.tol));
    if (res.full_residual > full_tol)
        throw CheckError(fmt::format("mu_eps(y) leaves the stabilizer: |Pi_y mu_eps(y)| = {:.3e}", res.full_residual));
    if (!ricci_ok) throw CheckError("Ricci form identity does not converge to the required defect");
    return Success;
}

int bs_command(Run& run) {
    auto root = run.root();
    root.allow_only({"schema", "m", "t_max", "steps", "grid", "asymptotics", "max_scalar", "leading_tol"});
    const int m = root.get<int>("m", 3);
    if (m < 2) root.fail("m", "dimension must be at least 2");
    bs::SolveOptions so;
    so.t_max = root.get<double>("t_max", so.t_max);
    so.steps = root.get<int>("steps", so.steps);
    if (!(so.t_max > 1) || so.steps < 10) root.fail("t_max", "need t_max > 1 and steps >= 10");
    double s_min = 1e-6, s_max = 1e6;
    std::size_t points = 400;
    if (root.has("grid")) {
        auto g = root.child("grid");
        g.allow_only({"s_min", "s_max", "points"});
        s_min = g.get<double>("s_min", s_min);
        s_max = g.get<double>("s_max", s_max);
        points = g.get<std::size_t>("points", points);
        if (!(s_min > 0 && s_max > s_min) || points < 2) g.fail("s_min", "need 0 < s_min < s_max and points >= 2");
    }
    double r_min = 0, r_max = 0;
    int samples = 60;
    if (root.has("asymptotics")) {
        auto a = root.child("asymptotics");
        a.allow_only({"r_min", "r_max", "samples"});
        r_min = a.get<double>("r_min", r_min);
        r_max = a.get<double>("r_max", r_max);
        samples = a.get<int>("samples", samples);
    }
    const double max_scalar = root.get<double>("max_scalar", run.strict() ? 1e-7 : 1e-6);
    const double leading_tol = root.get<double>("leading_tol", run.strict() ? 1e-4 : 1e-3);
    run.set_resolved_config({{"schema", "kblow.bs_config/1"},
                             {"m", m},
                             {"t_max", so.t_max},
                             {"steps", so.steps},
                             {"grid", {{"s_min", s_min}, {"s_max", s_max}, {"points", points}}},
                             {"asymptotics", {{"r_min", r_min}, {"r_max", r_max}, {"samples", samples}}},
                             {"max_scalar", max_scalar},
                             {"leading_tol", leading_tol}});

    run.begin_phase("integrate");
    bs::BurnsSimanca b(m, so);
    run.begin_phase("profile");
    const auto grid = radial::geometric_grid(s_min, s_max, points);
    run.write("bs_profile.csv", bs::profile_csv(b, grid));
    const auto prof = b.profile(grid);
    double worst = 0;
    for (double v : radial::radial_scalar_curvature(prof)) worst = std::max(worst, std::abs(v));

    bs::Asymptotics asym;
    bool asym_ok = true;
    if (m >= 3) {
        run.begin_phase("asymptotics");
        asym = bs::asymptotics(b, r_min, r_max, samples);
        asym_ok = std::abs(asym.leading + 1.0) < leading_tol && asym.consistent && asym.a > 0;
    }
    json report = bs::metadata(b, asym);
    report["schema"] = "kblow.bs_report/1";
    if (m < 3) report["asymptotics"] = nullptr;
    report["max_abs_scalar"] = worst;
    report["positive"] = prof.positive();
    report["checks"] = {{"scalar_flat", worst < max_scalar}, {"asymptotics", asym_ok}};
    run.write_json("bs.json", report);
    print(report);
    if (!prof.positive()) throw CheckError("blowup metric is not positive on the grid");
    if (worst >= max_scalar) throw CheckError(fmt::format("max |scalar curvature| {:.3e} >= {:.1e}", worst, max_scalar));
    if (!asym_ok)
        throw CheckError(fmt::format("asymptotics off: leading {:.6f} (want -1), decay exponent {:.3f} (want >= {:.1f})",
                                     asym.leading, asym.decay_exponent, asym.expected_exponent - 0.5));
    return Success;
}

int glue_command(Run& run) {
    auto root = run.root();
    root.allow_only({"schema", "gluing", "eps_list", "with_gamma", "compare_without_gamma", "slope_tolerance",
                     "refine", "fixed_point"});
    gl::GluingConfig tmpl;
    if (root.has("gluing")) {
        auto g = root.child("gluing");
        g.allow_only({"m", "eps", "r_eps", "delta", "k", "alpha", "a", "a_upper", "a_lower", "theta", "sigma_min",
                      "s_max", "points"});
        tmpl = root.parse("gluing", gl::GluingConfig::from_json);
    }
    std::vector<double> eps;
    for (double k : {1.0, 1.5, 2.0, 2.5, 3.0}) eps.push_back(std::pow(10.0, -k));
    eps = root.get<std::vector<double>>("eps_list", eps);
    if (eps.size() < 2) root.fail("eps_list", "need at least two values");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        auto c = tmpl;
        c.eps = eps[i];
        try {
            (void)c.resolved();
        } catch (const std::invalid_argument& ex) {
            root.fail("eps_list/" + std::to_string(i), ex.what());
        }
    }
    const bool with_gamma = root.get<bool>("with_gamma", true);
    const bool compare = root.get<bool>("compare_without_gamma", false);
    const double tol = root.get<double>("slope_tolerance", run.strict() ? 0.05 : 0.15);
    const bool refine = root.get<bool>("refine", run.strict());

    std::optional<gl::FixedPointOptions> fpo;
    double fp_eps = 0.02;
    if (root.has("fixed_point")) {
        auto f = root.child("fixed_point");
        f.allow_only({"eps", "points", "max_iters", "stop_ratio", "condition_threshold", "cluster"});
        gl::FixedPointOptions o;
        fp_eps = f.get<double>("eps", fp_eps);
        o.points = f.get<std::size_t>("points", o.points);
        o.max_iters = f.get<int>("max_iters", o.max_iters);
        o.stop_ratio = f.get<double>("stop_ratio", o.stop_ratio);
        o.condition_threshold = f.get<double>("condition_threshold", o.condition_threshold);
        o.cluster = f.get<double>("cluster", o.cluster);
        auto c = tmpl;
        c.eps = fp_eps;
        try {
            (void)c.resolved();
        } catch (const std::invalid_argument& ex) {
            f.fail("eps", ex.what());
        }
        if (o.points < 50 || o.max_iters < 1) f.fail("points", "need points >= 50 and max_iters >= 1");
        fpo = o;
    }
    json resolved = {{"schema", "kblow.glue_config/1"},
                     {"gluing", tmpl.to_json()},
                     {"eps_list", eps},
                     {"with_gamma", with_gamma},
                     {"compare_without_gamma", compare},
                     {"slope_tolerance", tol},
                     {"refine", refine}};
    if (fpo)
        resolved["fixed_point"] = {{"eps", fp_eps},
                                   {"points", fpo->points},
                                   {"max_iters", fpo->max_iters},
                                   {"stop_ratio", fpo->stop_ratio},
                                   {"condition_threshold", fpo->condition_threshold},
                                   {"cluster", fpo->cluster}};
    run.set_resolved_config(resolved);

    auto experiment = [&](const gl::GluingConfig& t, bool gamma, const std::string& csv_name) {
        try {
            auto r = gl::scaling_experiment(t, eps, gamma, run.jobs());
            run.write(csv_name, gl::scaling_csv(r));
            return r;
        } catch (const gl::ScalingError& ex) {
            run.write(csv_name, gl::scaling_csv(ex.result));
            throw ConvergenceError(ex.what());
        } catch (const gl::PositivityError& ex) {
            throw ConvergenceError(fmt::format("{} (at r = {:.3e})", ex.what(), ex.r));
        }
    };

    run.begin_phase("scaling");
    const auto scaling = experiment(tmpl, with_gamma, "glue_scaling.csv");
    const double off = std::abs(scaling.slope - scaling.expected) / std::abs(scaling.expected);
    json report = {{"schema", "kblow.glue_report/1"},
                   {"config", tmpl.to_json()},
                   {"scaling", gl::to_json(scaling)},
                   {"slope", scaling.slope},
                   {"expected_slope", scaling.expected},
                   {"relative_error", off},
                   {"slope_ok", off < tol}};
    bool ok = off < tol;
    if (refine) {
        run.begin_phase("scaling_refined");
        auto fine_cfg = tmpl;
        fine_cfg.points *= 2;
        const auto fine = experiment(fine_cfg, with_gamma, "glue_scaling_refined.csv");
        const double change = std::abs(fine.slope - scaling.slope) / std::abs(scaling.slope);
        report["refined"] = {{"slope", fine.slope}, {"relative_change", change}, {"stable", change < 0.02}};
        ok = ok && change < 0.02;
    }
    if (compare) {
        run.begin_phase("scaling_without_gamma");
        const auto plain = experiment(tmpl, !with_gamma, with_gamma ? "glue_scaling_plain.csv" : "glue_scaling_gamma.csv");
        report[with_gamma ? "without_gamma" : "with_gamma_comparison"] = gl::to_json(plain);
    }

    bool fp_ok = true, fp_warn = false;
    if (fpo) {
        run.begin_phase("fixed_point");
        auto c = tmpl;
        c.eps = fp_eps;
        gl::FixedPointResult fp;
        try {
            fp = gl::fixed_point_iterate(gl::glued_potential(c, true), *fpo);
        } catch (const gl::PositivityError& ex) {
            throw ConvergenceError(fmt::format("{} (at r = {:.3e})", ex.what(), ex.r));
        }
        run.write("glue_fixed_point.csv", gl::fixed_point_csv(fp));
        fp_ok = fp.monotone && fp.converged && fp.in_ball;
        if (!fp_ok && !run.strict() && fp.condition > fpo->condition_threshold) fp_warn = true;
        report["fixed_point"] = gl::to_json(fp);
        report["fixed_point_ok"] = fp_ok;
        report["fixed_point_warning"] = fp_warn;
    }
    run.write_json("glue.json", report);
    json summary = {{"slope", scaling.slope}, {"expected_slope", scaling.expected}, {"relative_error", off}};
    if (report.contains("refined")) summary["refined"] = report["refined"];
    if (fpo) summary["fixed_point"] = {{"ok", fp_ok}, {"warning", fp_warn}, {"iterations", report["fixed_point"]["history"].size()}};
    print(summary);
    if (!ok) throw CheckError(fmt::format("slope {:.4f} is {:.1f}% from {:.2f}", scaling.slope, 100 * off, scaling.expected));
    if (!fp_ok && !fp_warn) throw ConvergenceError("fixed-point iteration did not contract into the ball");
    if (fp_warn) std::cerr << "warning: fixed point did not converge; the linearization is ill-conditioned\n";
    return Success;
}

int verify_all_command(Run& run, const VerifyFlags& flags) {
    auto root = run.root();
    root.allow_only({"schema", "only", "mutate_blowup"});
    acceptance::Options opt;
    opt.jobs = run.jobs();
    opt.seed = run.seed();
    opt.strict = run.strict();
    opt.only = flags.only.empty() ? root.get<std::vector<int>>("only", {}) : flags.only;
    opt.mutate_blowup = flags.mutate_blowup || root.get<bool>("mutate_blowup", false);
    for (int id : opt.only)
        if (id < 1 || id > 10) throw SchemaError(fmt::format("--only {}: criteria are numbered 1..10", id));
    run.set_resolved_config({{"schema", "kblow.verify_config/1"}, {"only", opt.only}, {"mutate_blowup", opt.mutate_blowup}});

    run.begin_phase("acceptance");
    int failed = 0, warned = 0;
    json outcomes = json::array();
    acceptance::run_all(opt, [&](const acceptance::Outcome& o) {
        std::cout << acceptance::format_line(o) << std::endl;
        if (!o.pass) ++failed;
        if (o.pass && o.warning) ++warned;
        outcomes.push_back({{"id", o.id},
                            {"name", o.name},
                            {"pass", o.pass},
                            {"warning", o.warning},
                            {"detail", o.detail},
                            {"seconds", o.seconds},
                            {"budget_seconds", o.budget_seconds}});
    });
    const json summary = {{"schema", "kblow.verify_all/1"},
                          {"passed", static_cast<int>(outcomes.size()) - failed},
                          {"failed", failed},
                          {"warnings", warned},
                          {"outcomes", outcomes}};
    run.write_json("verify_all.json", summary);
    std::cout << (failed == 0 ? "verify-all: all criteria passed" : fmt::format("verify-all: {} criteria failed", failed))
              << std::endl;
    return failed == 0 ? Success : CheckFailed;
}

}  // namespace kblow::cli
