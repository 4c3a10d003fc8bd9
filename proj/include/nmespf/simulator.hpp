#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nmespf/controller.hpp"
#include "nmespf/core.hpp"
#include "nmespf/envelopes.hpp"
#include "nmespf/history.hpp"

namespace nmespf {

struct SamplingSchedule {
    enum class Kind { Uniform, Jittered };
    std::vector<double> times;  // offsets from t0, starting at 0
    double max_gap = 0.0;       // declared bound r on consecutive gaps
};

// Uniform: offsets i*r through the horizon. Jittered: seeded gaps drawn
// uniformly from [r/2, r]; the same seed reproduces the same schedule.
SamplingSchedule make_schedule(SamplingSchedule::Kind kind, double r, double horizon,
                               std::uint64_t seed);

struct TrajectoryRow {
    double t;
    double q, qdot;
    double q_d, qdot_d;
    double v, v_d;
    double x1, x2;
    double err_metric;  // |q-q_d| + |qdot-qdot_d| + sup of |v-v_d| one delay back
    double lyap;        // V(x)
};

struct SampleRow {
    double t;
    long long n_steps;
    double s_input;
    double xi1, xi2;
    bool certified;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    std::vector<SampleRow> samples;
};

enum class RunStatus {
    Ok = 0,
    ConfigError = 2,
    EnvelopeFailure = 3,
    ConstraintViolation = 4,
};

struct RunResult {
    RunStatus status = RunStatus::Ok;
    std::string message;
    Trajectory traj;
    double terminal_metric = 0.0;
};

enum class HistoryKind { Zero, OnReference, Constant };

struct SimSetup {
    double t0 = 0.0;
    double horizon = 20.0;
    double h_plant = 1e-4;
    double record_dt = 1e-3;
    double q0 = 0.0;
    double qdot0 = 0.0;
    HistoryKind history = HistoryKind::Zero;
    double history_value = 0.0;
    // Ablation: feed the controller the raw measured error instead of the
    // delay-ahead prediction (demonstration only).
    bool disable_prediction = false;
    // Fault injection for the decay checker's negative control.
    double fault_xi_offset = 0.0;
};

// Ground-truth closed-loop run: the plant is integrated with fixed-step RK4
// whose mesh never straddles a control discontinuity (sample times and
// their delay images), the controller updates at each schedule point, and
// the delayed input is evaluated exactly from the stored closed forms.
RunResult run_closed_loop(std::shared_ptr<const PlantModel> model,
                          std::shared_ptr<const ReferenceTrajectory> ref,
                          const EnvelopeSet& env, const SamplingSchedule& sched,
                          const SimSetup& setup);

// Least-squares slope of log(series) over [window_start, end]; returns the
// decay rate (minus the slope). Zeros are floored at 1e-14.
double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& series,
                      double window_start);

struct DecayCheck {
    int violations = 0;
    double worst_margin = 0.0;  // max over intervals of (measured - allowed)
    double worst_time = 0.0;
};

// Interval check of the Lyapunov decay dV/dt <= -2 mu V + gamma along the
// recorded trajectory after one delay, with tolerance 1e-4 * max(V, 1).
DecayCheck check_lyapunov_decay(const Trajectory& traj, const EnvelopeSet& env,
                                double t0);

struct PredictionInstance {
    double t0 = 0.0;
    Vec2 x0{};
    std::function<double(double)> u;  // input error over [t0, t0+tau)
    double u_sup = 0.0;               // its actual supremum
    long long n = 1;
};

struct BoundCheck {
    double measured_error = 0.0;
    double bound_log10 = 0.0;   // log10 of the first-order error bound
    double reach = 0.0;         // iterate bound
    double max_iterate = 0.0;
    bool error_ok = false;
    bool iterates_ok = false;
};

// First-order accuracy certificate on one instance: Euler-with-inputs
// against a step-halved RK4 truth, plus the iterate bound.
BoundCheck check_accuracy_bound(const EnvelopeSet& env, const PredictionInstance& inst);

}  // namespace nmespf
