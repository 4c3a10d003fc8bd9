#pragma once

#include "nmespf/core.hpp"
#include "nmespf/plant.hpp"
#include "nmespf/reference.hpp"

namespace nmespf {

// Tracking error in the tan coordinates:
//   x1 = tan(q) - tan(q_d),  x2 = qdot/cos^2(q) - qdot_d/cos^2(q_d).
struct ErrorState {
    double x1 = 0.0;
    double x2 = 0.0;
    Vec2 vec() const { return {x1, x2}; }
};

struct G12 {
    double g1;  // drift of the transformed system
    double g2;  // input gain of the transformed system, always > 0
};

// Vector fields of the transformed plant: zeta1' = zeta2,
// zeta2' = g1(zeta) + g2(zeta) * v(t - tau).
G12 eval_g12(const PlantModel& model, const Vec2& zeta);

ErrorState to_error_coords(const PlantModel& model, const PlantState& s,
                           const ReferenceTrajectory& ref, double t);

// Inverse transform; lands strictly inside the angle constraint for any
// finite error.
PlantState from_error_coords(const ErrorState& x, const ReferenceTrajectory& ref,
                             double t);

// Error dynamics f(t, x, u) = (x2, ftilde + gtilde * u) where u is the
// input error v - v_d (already delay-shifted by the caller).
Vec2 error_rhs(const PlantModel& model, const ReferenceTrajectory& ref, double t,
               const Vec2& x, double u);

double ftilde(const PlantModel& model, const ReferenceTrajectory& ref, double t,
              const Vec2& x);
double gtilde(const PlantModel& model, const ReferenceTrajectory& ref, double t,
              const Vec2& x);

}  // namespace nmespf
