#include "nmespf/predictor.hpp"

#include <cmath>

#include "nmespf/quadrature.hpp"

namespace nmespf {

Vec2 predictor_step(const PlantModel& model, const ReferenceTrajectory& ref,
                    double t0, double h, const Vec2& x, const InputHistory& hist,
                    double quad_tol) {
    if (!(h > 0.0)) throw std::invalid_argument("predictor_step: h must be positive");
    const double tau = ref.tau();
    if (!hist.covers(t0 - tau, t0 + h - tau)) {
        throw std::out_of_range("predictor_step: input history does not cover the step");
    }
    auto kinks = hist.kinks_in(t0 - tau, t0 + h - tau);
    for (double& k : kinks) k += tau;

    const auto integrand = [&](double s) {
        const G12 g = eval_g12(model, ref.zeta(s) + x);
        return g.g1 + g.g2 * hist.value(s - tau);
    };
    const double drift = integrate(integrand, t0, t0 + h, kinks, quad_tol);
    const double ref_step = ref.zeta(t0).x2 - ref.zeta(t0 + h).x2;
    return {x.x1 + h * x.x2, x.x2 + drift + ref_step};
}

Vec2 euler_with_inputs(const std::function<Vec2(double, const Vec2&, double)>& f,
                       double t0, double tau, long long n, const Vec2& x0,
                       const std::function<double(double)>& u,
                       const std::vector<double>& u_kinks, double quad_tol,
                       std::vector<Vec2>* iterates) {
    if (n < 1) throw std::invalid_argument("euler_with_inputs: n must be >= 1");
    const double h = tau / static_cast<double>(n);
    Vec2 x = x0;
    if (iterates) {
        iterates->clear();
        iterates->push_back(x);
    }
    for (long long i = 0; i < n; ++i) {
        const double a = t0 + h * static_cast<double>(i);
        const double b = (i + 1 == n) ? t0 + tau : a + h;
        const auto f1 = [&](double s) { return f(s, x, u(s)).x1; };
        const auto f2 = [&](double s) { return f(s, x, u(s)).x2; };
        const Vec2 inc{integrate(f1, a, b, u_kinks, quad_tol),
                       integrate(f2, a, b, u_kinks, quad_tol)};
        x = x + inc;
        if (!finite(x)) {
            throw std::runtime_error(
                "euler_with_inputs: non-finite state at step " + std::to_string(i) +
                " (t=" + format_double(b) + "); the instance is outside the usable regime");
        }
        if (iterates) iterates->push_back(x);
    }
    return x;
}

PredictionResult predict(const EnvelopeSet& env, double t0, const Vec2& x0,
                         const InputHistory& hist) {
    const ReferenceTrajectory& ref = env.ref();
    const PlantModel& model = env.model();
    const double tau = env.tau();
    if (!hist.covers(t0 - tau, t0)) {
        throw std::out_of_range("predict: history must cover one delay before t0");
    }

    PredictionResult out;
    out.s_input = x0.norm() + hist.sup_input_error(ref, t0 - tau, t0);
    const StepCount sc = env.step_count(out.s_input);
    out.n_used = sc.n;
    out.certified = !sc.capped;

    const double h = tau / static_cast<double>(sc.n);
    Vec2 z = x0;
    out.max_iterate = z.norm();
    for (long long k = 0; k < sc.n; ++k) {
        const double tk = t0 + h * static_cast<double>(k);
        const double step = (k + 1 == sc.n) ? (t0 + tau - tk) : h;
        z = predictor_step(model, ref, tk, step, z, hist);
        if (!finite(z)) {
            throw std::runtime_error("predict: non-finite iterate at step " +
                                     std::to_string(k));
        }
        out.max_iterate = std::max(out.max_iterate, z.norm());
    }
    out.x_pred = z;
    return out;
}

}  // namespace nmespf
