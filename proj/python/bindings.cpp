#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "nmespf/config.hpp"
#include "nmespf/predictor.hpp"

namespace py = pybind11;
using namespace nmespf;

namespace {

// Scenario facade for the bindings: plant + reference + envelope set built
// from the same strict config text the CLI reads.
struct PyScenario {
    ScenarioConfig cfg;
    Scenario sc;

    explicit PyScenario(const std::string& text)
        : cfg(parse_config_text(text, "<python>")), sc(build_scenario(cfg)) {}

    py::dict plant_terms(double q, double qdot) const {
        const PlantTerms t = sc.model->terms(q, qdot);
        py::dict d;
        d["potential"] = t.potential;
        d["potential_slope"] = t.potential_slope;
        d["damping"] = t.damping;
        d["input_gain"] = t.input_gain;
        return d;
    }

    py::tuple to_error(double q, double qdot, double t) const {
        const ErrorState x = to_error_coords(*sc.model, {q, qdot}, *sc.ref, t);
        return py::make_tuple(x.x1, x.x2);
    }

    py::tuple from_error(double x1, double x2, double t) const {
        const PlantState s = from_error_coords({x1, x2}, *sc.ref, t);
        return py::make_tuple(s.q, s.qdot);
    }

    py::tuple rhs(double t, double x1, double x2, double u) const {
        const Vec2 f = error_rhs(*sc.model, *sc.ref, t, {x1, x2}, u);
        return py::make_tuple(f.x1, f.x2);
    }

    double lyapunov(double x1, double x2) const {
        return lyapunov_value(sc.env.mu(), {x1, x2});
    }

    double feedback(double t, double x1, double x2) const {
        return nominal_feedback(*sc.model, *sc.ref, sc.env.mu(), t, {x1, x2});
    }

    py::dict constants() const {
        py::dict d;
        d["mu"] = sc.env.mu();
        d["eps"] = sc.env.eps();
        d["r"] = sc.env.r();
        d["tau"] = sc.env.tau();
        d["energy_growth"] = sc.env.energy_growth();
        d["gain_sup"] = sc.env.gain_sup();
        d["lyap_condition"] = sc.env.lyap_condition();
        d["decay_slack"] = sc.env.decay_slack();
        d["capture_level"] = sc.env.capture_level();
        d["feedback_slope"] = sc.env.feedback_slope();
        d["local_lipschitz"] = sc.env.local_lipschitz();
        d["hold_mismatch_gain_log10"] = sc.env.hold_mismatch_gain().lg;
        d["accuracy_slope_log10"] = sc.env.accuracy_slope().lg;
        d["decay_rate"] = sc.env.decay_rate();
        return d;
    }

    py::dict step_count(double s) const {
        const StepCount n = sc.env.step_count(s);
        py::dict d;
        d["n"] = n.n;
        d["capped"] = n.capped;
        d["log10_n"] = n.log10_n;
        return d;
    }

    double prediction_accuracy(double s) const {
        return sc.env.prediction_accuracy(s).value();
    }

    py::list validate(int n_samples, std::uint64_t seed) const {
        const ValidationReport rep = sc.env.validate(n_samples, seed);
        py::list out;
        for (const auto& e : rep.entries) {
            py::dict d;
            d["id"] = e.id;
            d["samples"] = e.samples;
            d["violations"] = e.violations;
            d["worst_margin"] = e.worst_margin;
            out.append(d);
        }
        return out;
    }

    py::dict predict_ahead(double x1, double x2, double u_amp) const {
        const double tau = sc.env.tau();
        InputHistory hist;
        hist.add(std::make_unique<CallableSegment>(
            cfg.sim.t0 - tau, cfg.sim.t0,
            [this, u_amp, tau](double s) {
                return sc.ref->vd(s) + u_amp * std::cos(2.0 * (s + tau - cfg.sim.t0));
            }));
        const PredictionResult pr = predict(sc.env, cfg.sim.t0, {x1, x2}, hist);
        py::dict d;
        d["x_pred"] = py::make_tuple(pr.x_pred.x1, pr.x_pred.x2);
        d["n_used"] = pr.n_used;
        d["certified"] = pr.certified;
        d["s_input"] = pr.s_input;
        d["accuracy_target"] = sc.env.prediction_accuracy(pr.s_input).value();
        return d;
    }

    py::dict run(py::object q0, py::object qdot0, py::object seed,
                 py::object horizon) const {
        SimSetup setup = cfg.sim;
        std::uint64_t sd = cfg.seed;
        if (!q0.is_none()) setup.q0 = q0.cast<double>();
        if (!qdot0.is_none()) setup.qdot0 = qdot0.cast<double>();
        if (!seed.is_none()) sd = seed.cast<std::uint64_t>();
        if (!horizon.is_none()) setup.horizon = horizon.cast<double>();
        const SamplingSchedule sched =
            make_schedule(cfg.schedule_kind, cfg.r, setup.horizon, sd);
        const RunResult rr = run_closed_loop(sc.model, sc.ref, sc.env, sched, setup);

        py::dict d;
        d["status"] = static_cast<int>(rr.status);
        d["message"] = rr.message;
        if (rr.status != RunStatus::Ok) return d;

        std::vector<double> t, q, qd, qdes, v, vd, x1, x2, metric, V;
        for (const auto& row : rr.traj.rows) {
            t.push_back(row.t);
            q.push_back(row.q);
            qd.push_back(row.qdot);
            qdes.push_back(row.q_d);
            v.push_back(row.v);
            vd.push_back(row.v_d);
            x1.push_back(row.x1);
            x2.push_back(row.x2);
            metric.push_back(row.err_metric);
            V.push_back(row.lyap);
        }
        d["t"] = t;
        d["q"] = q;
        d["qdot"] = qd;
        d["q_d"] = qdes;
        d["v"] = v;
        d["v_d"] = vd;
        d["x1"] = x1;
        d["x2"] = x2;
        d["err_metric"] = metric;
        d["V"] = V;
        d["terminal_metric"] = rr.terminal_metric;
        d["omega_hat"] =
            fit_decay_rate(t, metric, setup.t0 + 2.0 * cfg.tau + 2.0 * cfg.r);
        const DecayCheck dec = check_lyapunov_decay(rr.traj, sc.env, setup.t0);
        d["lyapunov_violations"] = dec.violations;
        d["decay_rate"] = sc.env.decay_rate();
        return d;
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Predictor-feedback tracking toolkit for input-delayed joint models";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<EnvelopeError>(m, "EnvelopeError");

    py::class_<PyScenario>(m, "Scenario")
        .def(py::init<const std::string&>(), py::arg("config_text") = "",
             "Build a scenario from config text (same format as the CLI files); "
             "empty text is the default scenario.")
        .def("plant_terms", &PyScenario::plant_terms, py::arg("q"), py::arg("qdot"))
        .def("to_error", &PyScenario::to_error, py::arg("q"), py::arg("qdot"),
             py::arg("t"))
        .def("from_error", &PyScenario::from_error, py::arg("x1"), py::arg("x2"),
             py::arg("t"))
        .def("error_rhs", &PyScenario::rhs, py::arg("t"), py::arg("x1"),
             py::arg("x2"), py::arg("u"))
        .def("lyapunov", &PyScenario::lyapunov, py::arg("x1"), py::arg("x2"))
        .def("nominal_feedback", &PyScenario::feedback, py::arg("t"), py::arg("x1"),
             py::arg("x2"))
        .def("constants", &PyScenario::constants)
        .def("step_count", &PyScenario::step_count, py::arg("s"))
        .def("prediction_accuracy", &PyScenario::prediction_accuracy, py::arg("s"))
        .def("validate", &PyScenario::validate, py::arg("n_samples") = 2000,
             py::arg("seed") = 2026)
        .def("predict", &PyScenario::predict_ahead, py::arg("x1"), py::arg("x2"),
             py::arg("u_amp") = 0.0,
             "Predict the error one delay ahead from a synthetic input history.")
        .def("run", &PyScenario::run, py::arg("q0") = py::none(),
             py::arg("qdot0") = py::none(), py::arg("seed") = py::none(),
             py::arg("horizon") = py::none(),
             "Run the closed loop; returns the recorded trajectory and summary.");

    m.def(
        "fit_decay_rate",
        [](const std::vector<double>& t, const std::vector<double>& series,
           double window_start) { return fit_decay_rate(t, series, window_start); },
        py::arg("t"), py::arg("series"), py::arg("window_start") = 0.0);
}
