#pragma once

#include <functional>
#include <vector>

#include "nmespf/core.hpp"
#include "nmespf/envelopes.hpp"
#include "nmespf/history.hpp"

namespace nmespf {

// One step of the transformed error recursion: position advances linearly,
// velocity by the integrals of the transformed drift and of the gain times
// the stored (delayed) input, plus the exact reference increment. Integrals
// are composite Gauss panels split at history kinks, relative tolerance
// 1e-10.
Vec2 predictor_step(const PlantModel& model, const ReferenceTrajectory& ref,
                    double t0, double h, const Vec2& x, const InputHistory& hist,
                    double quad_tol = 1e-10);

// Explicit Euler extended to systems with inputs:
// x_{i+1} = x_i + integral of f(s, x_i, u(s)) over the i-th step.
// `u_kinks` lists discontinuities of the input for quadrature splitting.
Vec2 euler_with_inputs(const std::function<Vec2(double, const Vec2&, double)>& f,
                       double t0, double tau, long long n, const Vec2& x0,
                       const std::function<double(double)>& u,
                       const std::vector<double>& u_kinks = {},
                       double quad_tol = 1e-10,
                       std::vector<Vec2>* iterates = nullptr);

struct PredictionResult {
    Vec2 x_pred{};
    long long n_used = 1;
    bool certified = false;   // step count followed the rule uncapped
    double s_input = 0.0;     // |x0| + true sup of the stored input error
    double max_iterate = 0.0; // largest |z_i| along the recursion
};

// Advance the error state one delay ahead from the sampled value and the
// stored input history. Certified results satisfy the accuracy target
// |x_pred - x(t0+tau)| <= R(s_input).
PredictionResult predict(const EnvelopeSet& env, double t0, const Vec2& x0,
                         const InputHistory& hist);

}  // namespace nmespf
