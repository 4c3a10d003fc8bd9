#include "nmespf/reference.hpp"

#include <algorithm>
#include <cmath>

namespace nmespf {

ReferenceSpec ReferenceSpec::constant(double value) {
    ReferenceSpec s;
    s.kind = Kind::Constant;
    s.offset = value;
    return s;
}

ReferenceSpec ReferenceSpec::sinusoid(double amplitude, double omega, double offset) {
    ReferenceSpec s;
    s.kind = Kind::Sinusoid;
    s.offset = offset;
    s.terms.push_back({amplitude, omega, 0.0});
    return s;
}

ReferenceTrajectory::ReferenceTrajectory(ReferenceSpec spec,
                                         std::shared_ptr<const PlantModel> model,
                                         double tau)
    : spec_(std::move(spec)), model_(std::move(model)), tau_(tau) {
    if (!(tau_ > 0.0)) throw std::invalid_argument("reference: tau must be positive");
    for (const auto& term : spec_.terms) {
        if (!(term.omega > 0.0))
            throw std::invalid_argument("reference: sinusoid frequency must be positive");
    }

    // Analytic amplitude bound first: offset + sum |a_i| must stay inside
    // the constraint.
    double amp = std::fabs(spec_.offset);
    for (const auto& term : spec_.terms) amp += std::fabs(term.amplitude);
    if (!(amp < kHalfPi)) {
        throw std::invalid_argument("reference: sup|q_d| = " + format_double(amp) +
                                    " violates the pi/2 constraint");
    }
    sup_q_ = amp;

    // Dense sampling of the bound constants over one period (or a few of the
    // longest period for sums), 1.05 safety factor.
    double span = 1.0;
    for (const auto& term : spec_.terms)
        span = std::max(span, 2.0 * M_PI / term.omega);
    if (spec_.terms.size() > 1) span *= 8.0;
    const int n = 20000;
    double l[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i <= n; ++i) {
        const double t = span * i / n;
        l[0] = std::max(l[0], zeta(t).norm());
        l[2] = std::max(l[2], zeta_dot(t).norm());
        l[4] = std::max(l[4], zeta_ddot(t).norm());
        const double targ = t - tau_;  // v_d is needed from -tau on
        l[1] = std::max(l[1], std::fabs(vd(targ)));
        l[3] = std::max(l[3], std::fabs(vd_dot(targ)));
    }
    for (int i = 0; i < 5; ++i) lambda_[i] = 1.05 * l[i];
}

double ReferenceTrajectory::q(double t) const {
    double v = spec_.offset;
    for (const auto& term : spec_.terms)
        v += term.amplitude * std::sin(term.omega * t + term.phase);
    return v;
}

double ReferenceTrajectory::qdot(double t) const {
    double v = 0.0;
    for (const auto& term : spec_.terms)
        v += term.amplitude * term.omega * std::cos(term.omega * t + term.phase);
    return v;
}

double ReferenceTrajectory::qddot(double t) const {
    double v = 0.0;
    for (const auto& term : spec_.terms)
        v -= term.amplitude * term.omega * term.omega *
             std::sin(term.omega * t + term.phase);
    return v;
}

double ReferenceTrajectory::qdddot(double t) const {
    double v = 0.0;
    for (const auto& term : spec_.terms)
        v -= term.amplitude * term.omega * term.omega * term.omega *
             std::cos(term.omega * t + term.phase);
    return v;
}

Vec2 ReferenceTrajectory::zeta(double t) const {
    const double qd = q(t);
    const double c = std::cos(qd);
    return {std::tan(qd), qdot(t) / (c * c)};
}

Vec2 ReferenceTrajectory::zeta_dot(double t) const {
    const double qd = q(t);
    const double qd1 = qdot(t);
    const double qd2 = qddot(t);
    const double c = std::cos(qd);
    const double sec2 = 1.0 / (c * c);
    const double tn = std::tan(qd);
    // d/dt tan(q) = qdot sec^2; d/dt [qdot sec^2] = sec^2 (qddot + 2 qdot^2 tan)
    return {qd1 * sec2, sec2 * (qd2 + 2.0 * qd1 * qd1 * tn)};
}

Vec2 ReferenceTrajectory::zeta_ddot(double t) const {
    const double qd = q(t);
    const double qd1 = qdot(t);
    const double qd2 = qddot(t);
    const double qd3 = qdddot(t);
    const double c = std::cos(qd);
    const double sec2 = 1.0 / (c * c);
    const double tn = std::tan(qd);
    const double first = sec2 * (qd2 + 2.0 * qd1 * qd1 * tn);
    const double second =
        sec2 * (qd3 + 6.0 * qd1 * qd2 * tn + 4.0 * qd1 * qd1 * qd1 * tn * tn +
                2.0 * qd1 * qd1 * qd1 * sec2);
    return {first, second};
}

double ReferenceTrajectory::vd(double t) const {
    const double s = t + tau_;
    const double qd = q(s);
    const double qd1 = qdot(s);
    return (qddot(s) + model_->potential_slope(qd) + model_->damping(qd1)) /
           model_->input_gain(qd, qd1);
}

double ReferenceTrajectory::vd_dot(double t) const {
    const double h = 1e-6;
    return (vd(t + h) - vd(t - h)) / (2.0 * h);
}

ReferenceTrajectory build_reference(const ReferenceSpec& spec,
                                    std::shared_ptr<const PlantModel> model,
                                    double tau) {
    return ReferenceTrajectory(spec, std::move(model), tau);
}

}  // namespace nmespf
