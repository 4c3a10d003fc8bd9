#include "nmespf/controller.hpp"

#include <cmath>

#include "nmespf/history.hpp"
#include "nmespf/predictor.hpp"

namespace nmespf {

double lyapunov_value(double mu, const Vec2& x) {
    const double root = std::sqrt(mu * mu + 4.0);
    const double coef = 2.0 / (mu * mu + 2.0 - mu * root);
    const double w = x.x2 + mu * x.x1;
    return coef * (x.x1 * x.x1 + w * w);
}

Vec2 lyapunov_gradient(double mu, const Vec2& x) {
    const double root = std::sqrt(mu * mu + 4.0);
    const double coef = 2.0 / (mu * mu + 2.0 - mu * root);
    const double w = x.x2 + mu * x.x1;
    return {coef * (2.0 * x.x1 + 2.0 * mu * w), coef * 2.0 * w};
}

double lyapunov_condition(double mu) {
    const double root = std::sqrt(mu * mu + 4.0);
    return (mu * mu + 2.0 + mu * root) / (mu * mu + 2.0 - mu * root);
}

double nominal_feedback(const PlantModel& model, const ReferenceTrajectory& ref,
                        double mu, double t, const Vec2& x) {
    return -((1.0 + mu * mu) * x.x1 + 2.0 * mu * x.x2 + ftilde(model, ref, t, x)) /
           gtilde(model, ref, t, x);
}

Vec2 nominal_flow(double mu, const Vec2& xi0, double elapsed) {
    if (elapsed < 0.0) throw std::invalid_argument("nominal_flow: negative elapsed time");
    const double e = std::exp(-mu * elapsed);
    const double s = std::sin(elapsed);
    const double c = std::cos(elapsed);
    return {e * ((xi0.x2 + mu * xi0.x1) * s + xi0.x1 * c),
            e * (-(mu * xi0.x2 + (1.0 + mu * mu) * xi0.x1) * s + xi0.x2 * c)};
}

Vec2 ControllerState::xi(double t) const {
    if (!initialized) throw std::logic_error("controller not initialized");
    if (t < t_sample - 1e-12) {
        throw std::logic_error("controller queried before its sample time");
    }
    return nominal_flow(mu, xi_sample, std::max(0.0, t - t_sample));
}

ControllerState on_sample(const EnvelopeSet& env, double t_sample,
                          const PlantState& measured, const InputHistory& hist,
                          const ReferenceTrajectory& ref) {
    const ErrorState z0 = to_error_coords(env.model(), measured, ref, t_sample);
    const PredictionResult pr = predict(env, t_sample, z0.vec(), hist);
    ControllerState c;
    c.mu = env.mu();
    c.t_sample = t_sample;
    c.xi_sample = pr.x_pred;
    c.n_last = pr.n_used;
    c.certified = pr.certified;
    c.s_input = pr.s_input;
    c.initialized = true;
    return c;
}

double control_value(const ControllerState& ctrl, const PlantModel& model,
                     const ReferenceTrajectory& ref, double t) {
    const Vec2 xi = ctrl.xi(t);
    const double mu = ctrl.mu;
    const Vec2 zd = ref.zeta(t + ref.tau());
    const G12 nominal = eval_g12(model, zd);
    const G12 shifted = eval_g12(model, zd + xi);
    return (nominal.g2 * ref.vd(t) - shifted.g1 + nominal.g1 -
            (1.0 + mu * mu) * xi.x1 - 2.0 * mu * xi.x2) /
           shifted.g2;
}

}  // namespace nmespf
