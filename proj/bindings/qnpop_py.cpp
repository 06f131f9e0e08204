// pybind11 bindings: the main operations of the toolkit (zoo models, exact
// simulation, fluid flows, slow-manifold charts, generator coefficients, the
// jump-moment oracle, and the limiting diffusion).

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qnpop/diffusion.hpp"
#include "qnpop/errors.hpp"
#include "qnpop/experiments.hpp"
#include "qnpop/io.hpp"
#include "qnpop/manifold.hpp"
#include "qnpop/simulate.hpp"
#include "qnpop/zoo.hpp"

namespace py = pybind11;
using namespace qnpop;

namespace {

py::dict chart_dict(const ManifoldChart& ch) {
    py::dict d;
    d["x"] = ch.x;
    d["pi"] = ch.pi;
    d["tau"] = ch.tau;
    d["lambda"] = ch.lambda_at_pi;
    d["n_e"] = ch.n_e;
    d["dpi"] = ch.dpi;
    d["dtau"] = ch.dtau;
    if (ch.d2pi) {
        py::list l;
        for (const auto& m : *ch.d2pi) l.append(m);
        d["d2pi"] = l;
    }
    py::dict res;
    res["R_at_pi"] = ch.r_at_pi;
    res["pitau"] = ch.pitau_defect;
    res["dr_dpi"] = ch.dr_dpi_defect;
    res["dpi_F_rel"] = ch.dpi_f_defect;
    res["dtau_F_plus_R"] = ch.dtau_f_defect;
    d["residuals"] = res;
    return d;
}

py::dict coefficients_dict(const GeneratorCoefficients& gc) {
    py::dict d;
    d["point"] = gc.point;
    d["drift"] = gc.drift;
    d["diffusion"] = gc.diffusion;
    d["lambda"] = gc.lambda;
    py::dict terms;
    terms["mutation_direct"] = gc.terms.mutation_direct;
    terms["mutation_projection"] = gc.terms.mutation_projection;
    terms["selection_direct"] = gc.terms.selection_direct;
    terms["selection_projection"] = gc.terms.selection_projection;
    terms["qv_drift"] = gc.terms.qv_drift;
    terms["qv_diffusion"] = gc.terms.qv_diffusion;
    d["terms"] = terms;
    d["notes"] = gc.notes;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Simulation and numerical analysis of competitive density-dependent "
              "population processes: exact jump chains, fluid limits, slow-manifold "
              "geometry, and the limiting diffusion on the manifold.";

    py::register_exception<QnError>(m, "QnError");

    py::class_<ModelSpec>(m, "Model")
        .def_property_readonly("name", [](const ModelSpec& s) { return s.name; })
        .def_property_readonly("K", [](const ModelSpec& s) { return s.K; })
        .def_property_readonly("quasi_neutral",
                               [](const ModelSpec& s) { return s.quasi_neutral.has_value(); })
        .def("drift", [](const ModelSpec& s, const Vector& x) { return drift_F(s, x); })
        .def("jacobian", &jacobian_DF)
        .def("R", [](const ModelSpec& s, const Vector& x) { return s.R_at(x); })
        .def("beta_bar", [](const ModelSpec& s, const Vector& x) { return s.beta_bar(x); })
        .def("beta_check", [](const ModelSpec& s, const Vector& x) { return s.beta_check(x); })
        .def("to_json", [](const ModelSpec& s) { return model_to_json(s).dump(); });

    m.def("zoo_names", &zoo_names, "preset model names");
    m.def(
        "zoo",
        [](const std::string& name, bool check) { return zoo_make(name, check).spec; },
        py::arg("name"), py::arg("check") = false, "instantiate a preset model");
    m.def(
        "neutral_logistic",
        [](int K, double b, double theta, int clutch_size) {
            return neutral_logistic(K, b, theta, clutch_size, false).spec;
        },
        py::arg("K") = 2, py::arg("b") = 1.0, py::arg("theta") = 0.0,
        py::arg("clutch_size") = 1);
    m.def(
        "gause_lotka_volterra",
        [](const Vector& b, const Matrix& A, const Vector& d, bool require_qn) {
            return gause_lotka_volterra(b, A, d, require_qn, false).spec;
        },
        py::arg("b"), py::arg("A"), py::arg("d"), py::arg("require_quasi_neutral") = false);
    m.def(
        "double_monod",
        [](const Vector& b, const Vector& h, double yield, double d) {
            return double_monod(b, h, yield, d, false).spec;
        },
        py::arg("b"), py::arg("h"), py::arg("yield"), py::arg("d"));

    m.def(
        "simulate",
        [](const ModelSpec& model, const Vector& x0, int64_t N, double horizon, uint64_t seed,
           double snapshot_dt, bool log_events, uint64_t stream) {
            SimOptions so;
            so.log_events = log_events;
            so.stream = stream;
            const PopulationPath p = simulate_path(model, x0, N, horizon, seed, snapshot_dt, so);
            py::dict d;
            py::list ts, xs;
            for (const auto& s : p.snapshots) {
                ts.append(s.t);
                xs.append(s.x);
            }
            d["times"] = ts;
            d["densities"] = xs;
            py::list ev;
            for (const auto& e : p.events) ev.append(py::make_tuple(e.time, e.channel));
            d["events"] = ev;
            d["n_events"] = p.n_events;
            d["absorbed"] = p.absorbed;
            d["escaped"] = p.escaped;
            d["final_counts"] = p.final_state.counts;
            return d;
        },
        py::arg("model"), py::arg("x0"), py::arg("N"), py::arg("horizon"), py::arg("seed") = 12345,
        py::arg("snapshot_dt") = 0.0, py::arg("log_events") = false, py::arg("stream") = 0,
        "exact simulation of the density-dependent jump chain");

    m.def(
        "flow",
        [](const ModelSpec& model, const Vector& x0, double t, bool fundamental, bool backward,
           double rtol) {
            FlowOptions fo;
            fo.rtol = rtol;
            const FlowResult r = flow(model, x0, t, fundamental,
                                      backward ? FlowDirection::Backward : FlowDirection::Forward,
                                      fo);
            py::dict d;
            d["endpoint"] = r.endpoint;
            d["t"] = r.t;
            d["steps"] = r.steps;
            if (r.fundamental) d["fundamental"] = *r.fundamental;
            return d;
        },
        py::arg("model"), py::arg("x0"), py::arg("t"), py::arg("fundamental") = false,
        py::arg("backward") = false, py::arg("rtol") = 1e-10);

    m.def(
        "chart",
        [](const ModelSpec& model, const Vector& x, bool with_d2pi) {
            ChartOptions copts;
            copts.with_d2pi = with_d2pi;
            return chart_dict(chart(model, x, copts));
        },
        py::arg("model"), py::arg("x"), py::arg("with_d2pi") = false,
        "slow-manifold chart (pi, tau, lambda, n_e, derivatives) at a point");

    m.def(
        "effective_density",
        [](const ModelSpec& model, const Vector& p) { return effective_density(model, p); },
        py::arg("model"), py::arg("p"));

    m.def(
        "generator_coefficients",
        [](const ModelSpec& model, const Vector& pi) {
            return coefficients_dict(generator_coefficients(model, pi));
        },
        py::arg("model"), py::arg("pi"),
        "drift and diffusion of the limiting generator on the manifold");

    m.def(
        "pushforward_frequency",
        [](const ModelSpec& model, const Vector& pi) {
            const GeneratorCoefficients gc = generator_coefficients(model, pi);
            const FrequencyCoefficients fc = pushforward_frequency(model, gc);
            py::dict d;
            d["drift_p"] = fc.drift_p;
            d["diffusion_p"] = fc.diffusion_p;
            d["n_e"] = fc.n_e;
            return d;
        },
        py::arg("model"), py::arg("pi"));

    m.def(
        "jump_moment_oracle",
        [](const ModelSpec& model, const Vector& pi, int64_t N, int n_replicas, double h,
           uint64_t seed, int threads) {
            OracleOptions oo;
            oo.seed = seed;
            oo.threads = threads;
            const MomentEstimate est = jump_moment_oracle(model, pi, N, n_replicas, h, oo);
            py::dict d;
            d["b_hat"] = est.b_hat;
            d["b_se"] = est.b_se;
            d["a_hat"] = est.a_hat;
            d["a_se"] = est.a_se;
            d["n_invalid"] = est.n_invalid;
            d["total_events"] = est.total_events;
            return d;
        },
        py::arg("model"), py::arg("pi"), py::arg("N"), py::arg("n_replicas"), py::arg("h") = 0.05,
        py::arg("seed") = 20240901, py::arg("threads") = 0,
        "empirical short-burst drift/diffusion of the projected chain");

    m.def(
        "simulate_diffusion",
        [](const ModelSpec& model, const Vector& pi0, double T, double dt, uint64_t seed) {
            const DiffusionPath p = simulate_diffusion(model, pi0, T, dt, seed);
            py::dict d;
            d["times"] = p.times;
            py::list pts;
            for (const auto& q : p.points) pts.append(q);
            d["points"] = pts;
            d["absorptions"] = p.absorptions;
            return d;
        },
        py::arg("model"), py::arg("pi0"), py::arg("T"), py::arg("dt") = 0.01,
        py::arg("seed") = 12345, "Euler-Maruyama on the slow manifold with retraction");

#ifdef QNPOP_VERSION
    m.attr("__version__") = QNPOP_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
