#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "esrkit/constants.hpp"
#include "esrkit/faddeeva.hpp"
#include "esrkit/fitting.hpp"
#include "esrkit/geometry.hpp"
#include "esrkit/lineshape.hpp"
#include "esrkit/spin_levels.hpp"
#include "esrkit/version.hpp"

namespace py = pybind11;
using namespace esr;

namespace {

SpinSystem make_spin(const std::string& kind, double g_e, double a_hz, double d_hz,
                     bool nuclear_zeeman) {
    SpinSystem s;
    if (kind == "free_doublet")
        s = SpinSystem::free_doublet(g_e);
    else if (kind == "hyperfine")
        s = SpinSystem::hyperfine(g_e, a_hz);
    else if (kind == "triplet")
        s = SpinSystem::triplet(g_e, d_hz);
    else
        throw py::value_error("unknown spin kind '" + kind + "'");
    s.nuclear_zeeman = nuclear_zeeman;
    s.validate();
    return s;
}

py::dict fit_to_dict(const FitResult& fit) {
    py::dict params, ci;
    for (size_t i = 0; i < fit.names.size(); ++i) {
        params[fit.names[i].c_str()] = fit.params[static_cast<Eigen::Index>(i)];
        ci[fit.names[i].c_str()] = fit.ci95[static_cast<Eigen::Index>(i)];
    }
    py::dict d;
    d["params"] = params;
    d["ci95"] = ci;
    d["converged"] = fit.converged;
    d["iterations"] = fit.iterations;
    d["residual_norm"] = std::sqrt(2.0 * fit.cost);
    d["notes"] = fit.notes;
    return d;
}

}  // namespace

PYBIND11_MODULE(_esrkit, m) {
    m.doc() = "Surface-spin ESR toolkit: levels, lineshapes, geometry, fits";
    m.attr("__version__") = kVersion;

    py::class_<SpinSystem>(m, "SpinSystem")
        .def(py::init(&make_spin), py::arg("kind"), py::arg("g_e") = 2.0,
             py::arg("a_hz") = 0.0, py::arg("d_hz") = 0.0,
             py::arg("nuclear_zeeman") = true)
        .def_readonly("g_e", &SpinSystem::g_e)
        .def_readonly("a_hz", &SpinSystem::a_hz)
        .def_readonly("d_hz", &SpinSystem::d_hz)
        .def("dim", &SpinSystem::dim);

    m.def(
        "energies",
        [](const SpinSystem& s, double b) -> Eigen::VectorXd {
            return eigensystem(s, b).energies_hz;
        },
        py::arg("spin"), py::arg("b_tesla"),
        "Exact level energies in Hz, ascending");

    m.def(
        "transitions",
        [](const SpinSystem& s, double b, double min_strength) {
            py::list out;
            for (const auto& t : transitions(s, b, min_strength)) {
                py::dict d;
                d["frequency_hz"] = t.frequency_hz;
                d["strength"] = t.strength;
                d["lower"] = t.lower;
                d["upper"] = t.upper;
                d["label"] = to_string(t.label);
                out.append(d);
            }
            return out;
        },
        py::arg("spin"), py::arg("b_tesla"), py::arg("min_strength") = 0.01);

    m.def(
        "resonance_fields",
        [](const SpinSystem& s, double f_res, double b_max, const std::string& label) {
            std::optional<TransitionLabel> only;
            if (!label.empty()) {
                only = transition_label_from_string(label);
                if (!only) throw py::value_error("unknown label '" + label + "'");
            }
            return resonance_fields(s, f_res, b_max, only);
        },
        py::arg("spin"), py::arg("f_res_hz"), py::arg("b_max_tesla"),
        py::arg("label") = "");

    m.def("apparent_g", &apparent_g, py::arg("b_peak_tesla"), py::arg("f_res_hz"));

    m.def(
        "peak_area_factor",
        [](const SpinSystem& s, double b, double f0, double t_kelvin) {
            auto trans = transitions(s, b, 1e-4);
            if (trans.empty()) throw py::value_error("no visible transition");
            const Transition* line = &trans[0];
            for (const auto& t : trans)
                if (std::abs(t.frequency_hz - f0) < std::abs(line->frequency_hz - f0))
                    line = &t;
            return peak_area_factor(s, *line, b, t_kelvin);
        },
        py::arg("spin"), py::arg("b_tesla"), py::arg("f0_hz"), py::arg("t_kelvin"),
        "Thermal weight of the line nearest f0_hz");

    m.def("faddeeva_w", &faddeeva, py::arg("z"), "w(z) = exp(-z^2) erfc(-iz)");

    py::class_<StripGeometry>(m, "StripGeometry")
        .def(py::init([](double b, double w, double delta_cut, double z0, double l_res) {
                 StripGeometry g{b, w, delta_cut, z0, l_res};
                 g.validate();
                 return g;
             }),
             py::arg("b") = 5e-6, py::arg("w") = 2e-6, py::arg("delta_cut") = 140e-9,
             py::arg("z0") = 50.0, py::arg("l_res") = 3e-3)
        .def_readonly("b", &StripGeometry::b)
        .def_readonly("w", &StripGeometry::w)
        .def("outer", &StripGeometry::outer);

    m.def("elliptic_k", &elliptic_k, py::arg("k"));
    m.def("alpha_conversion", &alpha_conversion, py::arg("geometry"));
    m.def("field_integral", &field_integral, py::arg("geometry"), py::arg("f0_hz"));
    m.def("spin_density", &spin_density, py::arg("omega_rad_s"), py::arg("t_kelvin"),
          py::arg("f0_hz"), py::arg("geometry"));
    m.def("derive_t1", &derive_t1, py::arg("p_sat_watt"), py::arg("t2e_s"),
          py::arg("alpha"), py::arg("g") = 2.0);

    m.def(
        "fit_resonance",
        [](const Eigen::VectorXd& f_hz, const Eigen::VectorXcd& s21) {
            S21Trace tr{f_hz, s21};
            ResonanceFit r = fit_resonance(tr);
            py::dict d = fit_to_dict(r.fit);
            d["f0_hz"] = r.f0_hz;
            d["q"] = r.q;
            d["qc"] = r.qc;
            d["q_internal"] = r.q_internal;
            return d;
        },
        py::arg("f_hz"), py::arg("s21"));

    m.def(
        "fit_saturation",
        [](const Eigen::VectorXd& p_drive, const Eigen::VectorXd& qs_inv, double q,
           double q_ext) {
            SaturationCurve c{p_drive, qs_inv, q, q_ext};
            SaturationFit r = fit_saturation(c);
            py::dict d = fit_to_dict(r.fit);
            d["qs0_inv"] = r.qs0_inv;
            d["p_sat_watt"] = r.p_sat_watt;
            d["epsilon"] = r.epsilon;
            return d;
        },
        py::arg("p_drive_watt"), py::arg("qs_inv"), py::arg("q"), py::arg("q_ext"));

    m.def(
        "fit_angle",
        [](const Eigen::VectorXd& theta_deg, const Eigen::VectorXd& g_app) {
            AngleFit r = fit_angle(AngleSeries{theta_deg, g_app});
            py::dict d = fit_to_dict(r.fit);
            d["g"] = r.g;
            d["a"] = r.a;
            d["b"] = r.b;
            return d;
        },
        py::arg("theta_deg"), py::arg("g_app"));
}
