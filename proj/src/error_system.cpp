#include "nmespf/error_system.hpp"

#include <cmath>

namespace nmespf {

G12 eval_g12(const PlantModel& model, const Vec2& zeta) {
    const double z1 = zeta.x1;
    const double z2 = zeta.x2;
    const double one_z2 = 1.0 + z1 * z1;
    const double q = std::atan(z1);
    const double qdot = z2 / one_z2;
    const double g1 = -one_z2 * model.potential_slope(q) +
                      2.0 * z1 * z2 * z2 / one_z2 - one_z2 * model.damping(qdot);
    const double g2 = one_z2 * model.input_gain(q, qdot);
    return {g1, g2};
}

ErrorState to_error_coords(const PlantModel& model, const PlantState& s,
                           const ReferenceTrajectory& ref, double t) {
    PlantModel::check_angle(s.q);
    (void)model;
    const double cq = std::cos(s.q);
    const double qd = ref.q(t);
    const double cd = std::cos(qd);
    return {std::tan(s.q) - std::tan(qd),
            s.qdot / (cq * cq) - ref.qdot(t) / (cd * cd)};
}

PlantState from_error_coords(const ErrorState& x, const ReferenceTrajectory& ref,
                             double t) {
    const double qd = ref.q(t);
    const double cd = std::cos(qd);
    const double z1 = x.x1 + std::tan(qd);
    const double z2 = x.x2 + ref.qdot(t) / (cd * cd);
    return {std::atan(z1), z2 / (1.0 + z1 * z1)};
}

double ftilde(const PlantModel& model, const ReferenceTrajectory& ref, double t,
              const Vec2& x) {
    const Vec2 zd = ref.zeta(t);
    const G12 shifted = eval_g12(model, zd + x);
    const G12 nominal = eval_g12(model, zd);
    return shifted.g1 - nominal.g1 + (shifted.g2 - nominal.g2) * ref.vd(t - ref.tau());
}

double gtilde(const PlantModel& model, const ReferenceTrajectory& ref, double t,
              const Vec2& x) {
    return eval_g12(model, ref.zeta(t) + x).g2;
}

Vec2 error_rhs(const PlantModel& model, const ReferenceTrajectory& ref, double t,
               const Vec2& x, double u) {
    const Vec2 zd = ref.zeta(t);
    const G12 shifted = eval_g12(model, zd + x);
    const G12 nominal = eval_g12(model, zd);
    const double f2 = shifted.g1 - nominal.g1 +
                      (shifted.g2 - nominal.g2) * ref.vd(t - ref.tau()) +
                      shifted.g2 * u;
    return {x.x2, f2};
}

}  // namespace nmespf
