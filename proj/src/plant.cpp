#include "nmespf/plant.hpp"

#include <cmath>

namespace nmespf {

namespace {

void check_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("PlantModel: ") + name +
                                    " must be positive and finite");
    }
}

}  // namespace

void PlantModel::check_angle(double q) {
    if (!(std::fabs(q) < kHalfPi)) {
        throw std::domain_error("joint angle outside (-pi/2, pi/2): q=" +
                                format_double(q));
    }
}

PlantModel::PlantModel(double inertia, double mass, double length, double gravity,
                       double k1, double k2, double k3, double b1, double b2,
                       double b3, double constant_gain)
    : inertia_(inertia), mass_(mass), length_(length), gravity_(gravity),
      k1_(k1), k2_(k2), k3_(k3), b1_(b1), b2_(b2), b3_(b3),
      constant_gain_(true), gain_value_(constant_gain) {
    check_positive(inertia, "inertia");
    check_positive(mass, "mass");
    check_positive(length, "length");
    check_positive(gravity, "gravity");
    check_positive(k1, "k1");
    check_positive(k2, "k2");
    check_positive(k3, "k3");
    check_positive(b1, "b1");
    check_positive(b2, "b2");
    check_positive(b3, "b3");
    check_positive(constant_gain, "moment gain");
    gain_ = [g = constant_gain](double, double) { return g; };
    init_bounds();
}

PlantModel::PlantModel(double inertia, double mass, double length, double gravity,
                       double k1, double k2, double k3, double b1, double b2,
                       double b3, MomentGain gain)
    : inertia_(inertia), mass_(mass), length_(length), gravity_(gravity),
      k1_(k1), k2_(k2), k3_(k3), b1_(b1), b2_(b2), b3_(b3),
      gain_(std::move(gain)) {
    check_positive(inertia, "inertia");
    check_positive(mass, "mass");
    check_positive(length, "length");
    check_positive(gravity, "gravity");
    check_positive(k1, "k1");
    check_positive(k2, "k2");
    check_positive(k3, "k3");
    check_positive(b1, "b1");
    check_positive(b2, "b2");
    check_positive(b3, "b3");
    init_bounds();
}

void PlantModel::init_bounds() {
    if (constant_gain_) {
        gain_sup_ = gain_value_ / inertia_;
        gain_inf_ = gain_value_ / inertia_;
    } else {
        // Sampled sup/inf over the constraint strip, 5% safety each way.
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        const int nq = 257, nv = 129;
        for (int i = 0; i < nq; ++i) {
            const double q = (-1.0 + 2.0 * i / (nq - 1)) * (kHalfPi - 1e-6);
            for (int j = 0; j < nv; ++j) {
                // velocity grid covers a wide symmetric range; gains are
                // assumed bounded so the tails are flat
                const double qd = std::tan((-1.0 + 2.0 * j / (nv - 1)) * 1.55) * 20.0;
                const double g = gain_(q, qd);
                if (!(g > 0.0) || !std::isfinite(g)) {
                    throw std::invalid_argument("moment gain must be positive and bounded");
                }
                lo = std::min(lo, g);
                hi = std::max(hi, g);
            }
        }
        gain_sup_ = hi * 1.05 / inertia_;
        gain_inf_ = lo / 1.05 / inertia_;
    }

    const double qhat = kHalfPi * std::exp(k2_ * kHalfPi);
    slope_c0_ = (mass_ * gravity_ * length_ + k1_ * qhat) / inertia_;
    slope_c1_ = k3_ / inertia_;
    curv_c0_ = (mass_ * gravity_ * length_ +
                k1_ * (1.0 + k2_ * kHalfPi) * std::exp(k2_ * kHalfPi)) /
               inertia_;
    curv_c1_ = k3_ / inertia_;
}

double PlantModel::potential(double q) const {
    check_angle(q);
    const double mgl = mass_ * gravity_ * length_ / inertia_;
    // e^{-k2 q}(e^{k2 q} - 1 - k2 q) = -expm1(-k2 q) - k2 q e^{-k2 q}
    const double kq = k2_ * q;
    const double elastic = (-std::expm1(-kq) - kq * std::exp(-kq)) / (k2_ * k2_);
    return mgl * (1.0 - std::cos(q)) + (k1_ / inertia_) * elastic -
           (k3_ / inertia_) * std::log(std::cos(q));
}

double PlantModel::potential_slope(double q) const {
    check_angle(q);
    return (mass_ * gravity_ * length_ * std::sin(q) + k1_ * q * std::exp(-k2_ * q) +
            k3_ * std::tan(q)) /
           inertia_;
}

double PlantModel::potential_curv(double q) const {
    check_angle(q);
    const double sec = 1.0 / std::cos(q);
    return (mass_ * gravity_ * length_ * std::cos(q) +
            k1_ * (1.0 - k2_ * q) * std::exp(-k2_ * q) + k3_ * sec * sec) /
           inertia_;
}

double PlantModel::damping(double qdot) const {
    return (b1_ * std::tanh(b2_ * qdot) + b3_ * qdot) / inertia_;
}

double PlantModel::damping_slope(double qdot) const {
    const double c = std::cosh(b2_ * qdot);
    return (b1_ * b2_ / (c * c) + b3_) / inertia_;
}

double PlantModel::input_gain(double q, double qdot) const {
    check_angle(q);
    return gain_(q, qdot) / inertia_;
}

PlantTerms PlantModel::terms(double q, double qdot) const {
    return {potential(q), potential_slope(q), damping(qdot), input_gain(q, qdot)};
}

Vec2 PlantModel::rhs(const PlantState& s, double v_delayed) const {
    check_angle(s.q);
    const double qdd = -potential_slope(s.q) - damping(s.qdot) +
                       input_gain(s.q, s.qdot) * v_delayed;
    return {s.qdot, qdd};
}

}  // namespace nmespf
