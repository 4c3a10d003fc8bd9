#pragma once

#include <memory>
#include <vector>

#include "nmespf/core.hpp"
#include "nmespf/plant.hpp"

namespace nmespf {

// Desired joint trajectory. The built-in kinds are analytic (constant,
// sinusoid, sum of sinusoids), so all derivatives through the third are
// exact; tabulated references are rejected because the feedforward needs
// the exact acceleration.
struct ReferenceSpec {
    enum class Kind { Constant, Sinusoid, SumOfSinusoids };
    struct Term {
        double amplitude = 0.0;
        double omega = 0.0;
        double phase = 0.0;
    };
    Kind kind = Kind::Constant;
    double offset = 0.0;
    std::vector<Term> terms;  // q_d(t) = offset + sum a_i sin(w_i t + p_i)

    static ReferenceSpec constant(double value);
    static ReferenceSpec sinusoid(double amplitude, double omega, double offset = 0.0);
};

class ReferenceTrajectory {
  public:
    ReferenceTrajectory(ReferenceSpec spec, std::shared_ptr<const PlantModel> model,
                        double tau);

    double q(double t) const;
    double qdot(double t) const;
    double qddot(double t) const;
    double qdddot(double t) const;

    // Transformed reference (tan(q_d), qdot_d / cos^2 q_d) and derivatives.
    Vec2 zeta(double t) const;
    Vec2 zeta_dot(double t) const;
    Vec2 zeta_ddot(double t) const;

    // Feedforward input, as a function of its own argument; defined for
    // t >= -tau. Substituted back into the reference dynamics it closes
    // the loop identically.
    double vd(double t) const;
    double vd_dot(double t) const;  // central finite difference

    double tau() const { return tau_; }
    const PlantModel& model() const { return *model_; }

    // Sampled suprema with a 1.05 safety factor.
    double sup_zeta() const { return lambda_[0]; }        // bound on |zeta_d|
    double sup_vd() const { return lambda_[1]; }          // bound on |v_d|
    double sup_zeta_dot() const { return lambda_[2]; }    // bound on |d/dt zeta_d|
    double sup_vd_dot() const { return lambda_[3]; }      // bound on |d/dt v_d|
    double sup_zeta_ddot() const { return lambda_[4]; }   // bound on |d2/dt2 zeta_d|
    double sup_q() const { return sup_q_; }

  private:
    ReferenceSpec spec_;
    std::shared_ptr<const PlantModel> model_;
    double tau_;
    double lambda_[5] = {0, 0, 0, 0, 0};
    double sup_q_ = 0.0;
};

// Validates the requested trajectory (sup |q_d| < pi/2) and computes the bound constants.
ReferenceTrajectory build_reference(const ReferenceSpec& spec,
                                    std::shared_ptr<const PlantModel> model,
                                    double tau);

}  // namespace nmespf
