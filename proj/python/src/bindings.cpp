#include "kblow/bs.hpp"
#include "kblow/futaki.hpp"
#include "kblow/git.hpp"
#include "kblow/gluing.hpp"
#include "kblow/moment.hpp"
#include "kblow/radial.hpp"
#include "kblow/rational.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>

namespace py = pybind11;
using nlohmann::json;
using kblow::Rational;

// Exact rationals cross the boundary as fractions.Fraction; int and "p/q" strings are accepted.
namespace pybind11::detail {
template <>
struct type_caster<Rational> {
    PYBIND11_TYPE_CASTER(Rational, const_name("fractions.Fraction"));

    bool load(handle src, bool) {
        try {
            if (py::isinstance<py::str>(src)) {
                value = kblow::parse_rational(src.cast<std::string>());
                return true;
            }
            if (py::isinstance<py::bool_>(src)) return false;
            if (py::isinstance<py::int_>(src)) {
                value = kblow::parse_rational(py::str(src).cast<std::string>());
                return true;
            }
            if (py::hasattr(src, "numerator") && py::hasattr(src, "denominator") && !py::isinstance<py::float_>(src)) {
                const auto num = py::str(src.attr("numerator")).cast<std::string>();
                const auto den = py::str(src.attr("denominator")).cast<std::string>();
                value = kblow::parse_rational(num + "/" + den);
                return true;
            }
        } catch (const std::exception&) {
            return false;
        }
        return false;
    }

    static handle cast(const Rational& q, return_value_policy, handle) {
        static py::object fraction = py::module_::import("fractions").attr("Fraction");
        return fraction(kblow::to_string(q)).release();
    }
};
}  // namespace pybind11::detail

namespace {

namespace fk = kblow::futaki;
namespace gs = kblow::git;
namespace mm = kblow::moment;
namespace bs = kblow::bs;
namespace gl = kblow::gluing;
namespace rd = kblow::radial;

// JSON crosses as plain Python containers through the json module; these are small config objects.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) {
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<double> array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::dict expansion_dict(const fk::ExactExpansion& e) {
    py::dict d;
    for (const auto& [k, v] : e.coefficients()) d[py::int_(k)] = py::cast(v);
    return d;
}

std::string regime_name(fk::BlowupFutaki::Regime r) {
    switch (r) {
        case fk::BlowupFutaki::Regime::HigherDim: return "higher_dim";
        case fk::BlowupFutaki::Regime::SurfaceGeneric: return "surface_generic";
        case fk::BlowupFutaki::Regime::SurfaceA1Zero: return "surface_a1_zero";
    }
    return "";
}

py::object verdict(const gs::Verdict& v) {
    return py::make_tuple(v.value, v.witness ? py::cast(*v.witness) : py::none());
}

void bind_futaki(py::module_& m) {
    auto f = m.def_submodule("futaki", "Exact blowup Futaki invariants");

    py::class_<fk::PolarizedData>(f, "PolarizedData")
        .def(py::init([](int dim, Rational a0, Rational a1, Rational b0, Rational b1) {
                 return fk::PolarizedData{dim, a0, a1, b0, b1};
             }),
             py::arg("m"), py::arg("a0"), py::arg("a1"), py::arg("b0"), py::arg("b1"))
        .def_readwrite("m", &fk::PolarizedData::m)
        .def_readwrite("a0", &fk::PolarizedData::a0)
        .def_readwrite("a1", &fk::PolarizedData::a1)
        .def_readwrite("b0", &fk::PolarizedData::b0)
        .def_readwrite("b1", &fk::PolarizedData::b1)
        .def("__repr__", [](const fk::PolarizedData& d) { return "PolarizedData(" + fk::to_json(d).dump() + ")"; });

    py::class_<fk::BlowupPoint>(f, "BlowupPoint")
        .def(py::init([](Rational h, Rational lap) { return fk::BlowupPoint{h, lap}; }), py::arg("h_p"),
             py::arg("lap_h_p"))
        .def_readwrite("h_p", &fk::BlowupPoint::h_p)
        .def_readwrite("lap_h_p", &fk::BlowupPoint::lap_h_p)
        .def_property_readonly("cotangent_weight", &fk::BlowupPoint::cotangent_weight)
        .def_property_readonly("fibre_weight", &fk::BlowupPoint::fibre_weight)
        .def("__repr__", [](const fk::BlowupPoint& p) { return "BlowupPoint(" + fk::to_json(p).dump() + ")"; });

    f.def("point_from_weights", &fk::point_from_weights, py::arg("fibre_weight"), py::arg("cotangent_weight"));
    f.def("futaki", &fk::futaki, py::arg("data"));
    f.def("jet_dimension", &fk::jet_dimension, py::arg("m"), py::arg("l"));
    f.def("jet_weight", &fk::jet_weight, py::arg("m"), py::arg("l"), py::arg("weights"));
    f.def("projective_weight_data", &fk::projective_weight_data, py::arg("m"), py::arg("action_weights"));
    f.def("projective_vertex", &fk::projective_vertex, py::arg("action_weights"), py::arg("vertex"));
    f.def("normalize_hamiltonian", &fk::normalize_hamiltonian, py::arg("data"), py::arg("point"));
    f.def(
        "blowup_coefficients",
        [](const fk::PolarizedData& d, const fk::BlowupPoint& p, int dim) {
            auto c = fk::blowup_coefficients(d, p, dim);
            py::dict out;
            out["a0"] = expansion_dict(c.a0);
            out["a1"] = expansion_dict(c.a1);
            out["b0"] = expansion_dict(c.b0);
            out["b1"] = expansion_dict(c.b1);
            return out;
        },
        py::arg("data"), py::arg("point"), py::arg("m"),
        "Coefficient expansions in eps, as {exponent: Fraction} dictionaries.");

    py::class_<fk::BlowupFutaki>(f, "BlowupFutaki")
        .def(py::init<const fk::PolarizedData&, const fk::BlowupPoint&, int>(), py::arg("data"), py::arg("point"),
             py::arg("m"))
        .def("value", &fk::BlowupFutaki::value, py::arg("eps"))
        .def(
            "series", [](const fk::BlowupFutaki& b, long n) { return expansion_dict(b.series_to_order(n)); },
            py::arg("order"))
        .def("predicted_series", [](const fk::BlowupFutaki& b) { return expansion_dict(b.predicted_series()); })
        .def_property_readonly("predicted_order", &fk::BlowupFutaki::predicted_order)
        .def_property_readonly("regime", [](const fk::BlowupFutaki& b) { return regime_name(b.regime()); });
}

void bind_git(py::module_& m) {
    auto g = m.def_submodule("git", "Exact Hilbert-Mumford checks on torus-restricted weight systems");
    auto system = [](const py::object& o) { return gs::weight_system_from_json(from_py(o)); };

    g.def("weight_L", [=](const py::object& ws, const kblow::RationalVector& l) { return gs::weight_L(system(ws), l); },
          py::arg("system"), py::arg("direction"));
    g.def("weight_K", [=](const py::object& ws, const kblow::RationalVector& l) { return gs::weight_K(system(ws), l); },
          py::arg("system"), py::arg("direction"));
    g.def("is_semistable", [=](const py::object& ws) { return verdict(gs::is_semistable(system(ws))); },
          py::arg("system"), "(verdict, witness or None)");
    g.def("is_polystable_perturbed", [=](const py::object& ws) { return verdict(gs::is_polystable_perturbed(system(ws))); },
          py::arg("system"), "(verdict, witness or None)");
    g.def(
        "zero_cone",
        [=](const py::object& ws) {
            auto c = gs::zero_cone(system(ws));
            py::dict d;
            d["rays"] = c.rays;
            d["facet_normals"] = c.facet_normals;
            return d;
        },
        py::arg("system"));
    g.def(
        "epsilon0_bound",
        [=](const py::object& ws, std::size_t samples, std::uint64_t seed) {
            const auto w = system(ws);
            gs::EpsilonBound b;
            {
                py::gil_scoped_release release;
                b = gs::epsilon0_bound(w, samples, seed);
            }
            py::dict d;
            d["bound"] = b.unbounded ? py::none() : py::cast(b.bound);
            d["delta"] = b.delta;
            d["C"] = b.C;
            d["unbounded"] = b.unbounded;
            d["approximate"] = b.approximate;
            d["samples"] = b.samples;
            return d;
        },
        py::arg("system"), py::arg("samples") = 4000, py::arg("seed") = 1);
    g.def(
        "sweep_stability",
        [=](const py::object& ws, const std::vector<Rational>& eps, std::size_t rays, int jobs) {
            const auto w = system(ws);
            std::vector<gs::SweepEntry> out;
            {
                py::gil_scoped_release release;
                out = gs::sweep_stability(w, eps, rays, jobs);
            }
            py::list rows;
            for (const auto& e : out) {
                py::dict d;
                d["eps"] = e.eps;
                d["min_value"] = e.min_value;
                d["argmin"] = e.argmin;
                d["nonpositive_off_stabilizer"] = e.nonpositive_off_stabilizer;
                d["rays_used"] = e.rays_used;
                rows.append(d);
            }
            return rows;
        },
        py::arg("system"), py::arg("eps"), py::arg("rays") = 20000, py::arg("jobs") = 1);
}

void bind_moment(py::module_& m) {
    auto d = m.def_submodule("moment", "Moment-map deformation on diagonal torus models");
    py::register_exception<mm::DeformError>(d, "DeformError", PyExc_RuntimeError);

    d.def(
        "stabilizer_at",
        [](const py::object& model, const mm::Point& y) {
            return mm::stabilizer_at(mm::ActionModel::from_json(from_py(model)), y).basis;
        },
        py::arg("model"), py::arg("y"), "Columns: orthonormal basis of the stabilizer under the model inner product.");
    d.def(
        "solve_deformed",
        [](const py::object& model, const mm::Point& x, const py::object& perturbation, double tol) {
            const auto M = mm::ActionModel::from_json(from_py(model));
            const auto pm = mm::PerturbedMap::from_json(M, from_py(perturbation));
            mm::DeformOptions opt;
            opt.tol = tol;
            return to_py(mm::to_json(mm::solve_deformed(M, x, pm, opt)));
        },
        py::arg("model"), py::arg("x"), py::arg("perturbation"), py::arg("tol") = 1e-12);
    d.def(
        "ricci_moment_fubini_study",
        [](int dim, double s_min, double s_max, std::size_t n, int levels) {
            auto fs = [](double s) { return rd::Potential(log(1.0 + rd::variable(s))); };
            auto h = [](mm::Quad s) { return s / (1 + s); };
            mm::RicciMomentRefinement r;
            {
                py::gil_scoped_release release;
                r = mm::ricci_moment_refinement(dim, fs, h, s_min, s_max, n, levels);
            }
            py::dict out;
            out["sizes"] = r.sizes;
            out["defects"] = r.defects;
            out["orders"] = r.orders;
            out["converging"] = r.converging;
            return out;
        },
        py::arg("m"), py::arg("s_min") = 0.1, py::arg("s_max") = 10.0, py::arg("n") = 2500, py::arg("levels") = 3,
        "Ricci form identity for the rotation field of Fubini-Study P^m under grid refinement.");
}

void bind_bs(py::module_& m) {
    auto b = m.def_submodule("bs", "Scalar-flat blowup metric");
    b.def("series", [](int dim, int order) { return bs::bs_series(dim, order).c; }, py::arg("m"), py::arg("order"),
          "Exact coefficients of the profile series in t = 1/s.");

    py::class_<bs::BurnsSimanca, std::shared_ptr<bs::BurnsSimanca>>(b, "BlowupMetric")
        .def(py::init([](int dim, double t_max, int steps) {
                 bs::SolveOptions o;
                 o.t_max = t_max;
                 o.steps = steps;
                 py::gil_scoped_release release;
                 return std::make_shared<bs::BurnsSimanca>(dim, o);
             }),
             py::arg("m"), py::arg("t_max") = 1e8, py::arg("steps") = 4000)
        .def_property_readonly("m", &bs::BurnsSimanca::m)
        .def_property_readonly("kappa", &bs::BurnsSimanca::kappa)
        .def_property_readonly("divisor_moment", &bs::BurnsSimanca::divisor_moment)
        .def("psi", &bs::BurnsSimanca::psi_normalized, py::arg("s"), "Normalised psi = A - s/2.")
        .def(
            "profile",
            [](const bs::BurnsSimanca& self, const std::vector<double>& s) {
                auto p = self.profile(s);
                py::dict d;
                d["s"] = array(p.s);
                d["f"] = array(p.f);
                d["scalar"] = array(rd::radial_scalar_curvature(p));
                d["positive"] = p.positive();
                return d;
            },
            py::arg("s"))
        .def("asymptotics", [](const bs::BurnsSimanca& self) {
            auto a = bs::asymptotics(self);
            py::dict d;
            d["leading"] = a.leading;
            d["a"] = a.a;
            d["a_series"] = a.a_series;
            d["decay_exponent"] = a.decay_exponent;
            d["expected_exponent"] = a.expected_exponent;
            d["consistent"] = a.consistent;
            return d;
        });
}

gl::GluingConfig config_from(const py::object& o) {
    return o.is_none() ? gl::GluingConfig{} : gl::GluingConfig::from_json(from_py(o));
}

void bind_gluing(py::module_& m) {
    auto g = m.def_submodule("gluing", "Glued metrics, weighted residuals and the extremal fixed point");
    py::register_exception<gl::PositivityError>(g, "PositivityError", PyExc_RuntimeError);
    py::register_exception<gl::ScalingError>(g, "ScalingError", PyExc_RuntimeError);

    g.def("resolve_config", [](const py::object& c) { return to_py(config_from(c).resolved().to_json()); },
          py::arg("config") = py::none(), "Fill in every defaulted field; raises ValueError on inconsistent input.");
    g.def("solve_gamma", [](int dim) { return to_py(gl::solve_gamma(dim).to_json()); }, py::arg("m"));
    g.def("base_scalar", &gl::base_scalar, py::arg("m"));
    g.def(
        "residual",
        [](const py::object& c, bool with_gamma) {
            const auto cfg = config_from(c);
            gl::Residual r;
            {
                py::gil_scoped_release release;
                r = gl::residual_F(gl::glued_potential(cfg, with_gamma));
            }
            py::dict d;
            d["s"] = array(r.s);
            d["r"] = array(r.r);
            d["F"] = array(r.F);
            d["norm"] = r.norm;
            d["peak_r"] = r.peak_r;
            d["zone_norm"] = std::vector<double>(r.zone_norm, r.zone_norm + 3);
            return d;
        },
        py::arg("config") = py::none(), py::arg("with_gamma") = true);
    g.def(
        "scaling_experiment",
        [](const py::object& c, const std::vector<double>& eps, bool with_gamma, int jobs) {
            const auto cfg = config_from(c);
            gl::ScalingResult r;
            {
                py::gil_scoped_release release;
                r = gl::scaling_experiment(cfg, eps, with_gamma, jobs);
            }
            return to_py(gl::to_json(r));
        },
        py::arg("config"), py::arg("eps"), py::arg("with_gamma") = true, py::arg("jobs") = 1);
    g.def(
        "fixed_point",
        [](const py::object& c, std::size_t points, int max_iters) {
            const auto cfg = config_from(c);
            gl::FixedPointOptions o;
            o.points = points;
            o.max_iters = max_iters;
            gl::FixedPointResult r;
            {
                py::gil_scoped_release release;
                r = gl::fixed_point_iterate(gl::glued_potential(cfg, true), o);
            }
            return to_py(gl::to_json(r));
        },
        py::arg("config"), py::arg("points") = 600, py::arg("max_iters") = 20);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Exact and numerical checks for extremal metrics on blowups";
    bind_futaki(m);
    bind_git(m);
    bind_moment(m);
    bind_bs(m);
    bind_gluing(m);
    m.def(
        "radial_scalar_curvature",
        [](int dim, const std::vector<double>& s, const std::vector<double>& f) {
            return array(rd::radial_scalar_curvature(rd::RadialProfile::from_values(dim, s, f)));
        },
        py::arg("m"), py::arg("s"), py::arg("f"),
        "Scalar curvature of i dd^c A(|z|^2) from f = A' sampled on a geometric grid.");
#ifdef KBLOW_VERSION
    m.attr("__version__") = KBLOW_VERSION;
#endif
}
