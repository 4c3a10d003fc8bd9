#pragma once

#include "nmespf/core.hpp"
#include "nmespf/error_system.hpp"
#include "nmespf/plant.hpp"
#include "nmespf/reference.hpp"

namespace nmespf {

class InputHistory;
class EnvelopeSet;
struct PredictionResult;

// Quadratic Lyapunov function of the nominal error loop,
// V(x) = 2/(mu^2+2-mu*sqrt(mu^2+4)) * (x1^2 + (x2+mu*x1)^2).
double lyapunov_value(double mu, const Vec2& x);
Vec2 lyapunov_gradient(double mu, const Vec2& x);

// Condition number of V: |x|^2 <= V(x) <= K |x|^2.
double lyapunov_condition(double mu);

// Nominal feedback u = -((1+mu^2) x1 + 2 mu x2 + ftilde) / gtilde; along it
// the error field collapses to (x2, -(1+mu^2) x1 - 2 mu x2).
double nominal_feedback(const PlantModel& model, const ReferenceTrajectory& ref,
                        double mu, double t, const Vec2& x);

// Closed-form flow of the nominal closed loop started at xi0; `elapsed` is
// time since the last sample.
Vec2 nominal_flow(double mu, const Vec2& xi0, double elapsed);

// Controller memory between samples: the predicted error at the last sample
// and how it was produced.
struct ControllerState {
    double mu = 0.0;
    double t_sample = 0.0;
    Vec2 xi_sample{};
    long long n_last = 0;
    bool certified = false;
    double s_input = 0.0;
    bool initialized = false;

    // Predicted error coasting along the nominal loop.
    Vec2 xi(double t) const;
};

// Measurement update: predict the error one delay ahead from the sampled
// state and the stored input history, then reset the coasting state.
ControllerState on_sample(const EnvelopeSet& env, double t_sample,
                          const PlantState& measured, const InputHistory& hist,
                          const ReferenceTrajectory& ref);

// Control value at time t in [t_sample, next sample). Equals
// v_d(t) + nominal_feedback(t + tau, xi(t)) identically.
double control_value(const ControllerState& ctrl, const PlantModel& model,
                     const ReferenceTrajectory& ref, double t);

}  // namespace nmespf
