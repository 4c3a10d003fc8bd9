#pragma once

#include <functional>
#include <stdexcept>

#include "nmespf/core.hpp"

namespace nmespf {

struct PlantState {
    double q = 0.0;     // joint angle, rad; constrained to (-pi/2, pi/2)
    double qdot = 0.0;  // joint velocity, rad/s
};

struct PlantTerms {
    double potential;        // F(q)
    double potential_slope;  // dF/dq(q)
    double damping;          // H(qdot)
    double input_gain;       // G(q, qdot)
};

// Knee-joint model: inertia, gravity, two-term elasticity (exponential +
// tan barrier), tanh+linear damping, and a positive bounded torque gain.
// The tan barrier makes the potential blow up at |q| = pi/2, which is what
// keeps trajectories inside the physical range.
class PlantModel {
  public:
    using MomentGain = std::function<double(double q, double qdot)>;

    PlantModel(double inertia, double mass, double length, double gravity,
               double k1, double k2, double k3, double b1, double b2, double b3,
               double constant_gain);

    // Arbitrary positive bounded gain; its sup/inf are estimated by sampling
    // with a 5% safety margin.
    PlantModel(double inertia, double mass, double length, double gravity,
               double k1, double k2, double k3, double b1, double b2, double b3,
               MomentGain gain);

    double inertia() const { return inertia_; }

    double potential(double q) const;          // F
    double potential_slope(double q) const;    // dF/dq
    double potential_curv(double q) const;     // d2F/dq2
    double damping(double qdot) const;         // H
    double damping_slope(double qdot) const;   // H'
    double input_gain(double q, double qdot) const;  // G = moment_gain / J

    PlantTerms terms(double q, double qdot) const;

    // (qdot, qddot) under the delayed input value v_delayed.
    Vec2 rhs(const PlantState& s, double v_delayed) const;

    double gain_sup() const { return gain_sup_; }  // upper bound on G
    double gain_inf() const { return gain_inf_; }  // lower bound on G
    bool constant_gain() const { return constant_gain_; }

    // Coefficients of closed-form growth majorants used by the envelope
    // tails: |dF/dq(atan z)| <= slope_c0 + slope_c1*|z|,
    // |d2F/dq2(atan z)| <= curv_c0 + curv_c1*(1+z^2).
    double slope_c0() const { return slope_c0_; }
    double slope_c1() const { return slope_c1_; }
    double curv_c0() const { return curv_c0_; }
    double curv_c1() const { return curv_c1_; }
    double damping_offset() const { return b1_ / inertia_; }     // |H| <= off + slope*|x|
    double damping_lin() const { return b3_ / inertia_; }
    double damping_slope_max() const { return (b1_ * b2_ + b3_) / inertia_; }

    static void check_angle(double q);

  private:
    void init_bounds();

    double inertia_, mass_, length_, gravity_;
    double k1_, k2_, k3_;
    double b1_, b2_, b3_;
    MomentGain gain_;
    bool constant_gain_ = false;
    double gain_value_ = 0.0;
    double gain_sup_ = 0.0;
    double gain_inf_ = 0.0;
    double slope_c0_, slope_c1_, curv_c0_, curv_c1_;
};

}  // namespace nmespf
