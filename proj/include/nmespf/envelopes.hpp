#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nmespf/core.hpp"
#include "nmespf/error_system.hpp"
#include "nmespf/plant.hpp"
#include "nmespf/posval.hpp"
#include "nmespf/reference.hpp"

namespace nmespf {

// Energy-like certificate of forward completeness:
// Wtilde(x) = 1 + 0.5*(x2/(1+x1^2))^2 + F(atan x1), and W(t,x) shifted by
// the transformed reference. W >= 1 everywhere; it blows up at the angle
// constraint, which is what bounds reachable sets.
class EnergyFunction {
  public:
    EnergyFunction(std::shared_ptr<const PlantModel> model,
                   std::shared_ptr<const ReferenceTrajectory> ref)
        : model_(std::move(model)), ref_(std::move(ref)) {}

    double tilde(const Vec2& x) const;
    double at(double t, const Vec2& x) const;  // = tilde(zeta_d(t) + x)
    Vec2 grad_tilde(const Vec2& x) const;
    // (h11, h12, h22)
    std::array<double, 3> hess_tilde(const Vec2& x) const;

    const PlantModel& model() const { return *model_; }
    const ReferenceTrajectory& ref() const { return *ref_; }

  private:
    std::shared_ptr<const PlantModel> model_;
    std::shared_ptr<const ReferenceTrajectory> ref_;
};

enum class StepMode { Certified, Practical };

struct StepCount {
    long long n = 1;
    bool capped = false;     // practical-mode cap was hit
    double log10_n = 0.0;    // magnitude of the uncapped requirement
};

struct EnvelopeOptions {
    int grid_radii = 360;
    int grid_angles = 256;
    double grid_rho_max = 1e6;
    double safety = 1.1;           // majorant slack on sampled suprema
    double minorant_deflate = 0.995;
    double omega_margin = 1e-9;
    StepMode mode = StepMode::Practical;
    long long step_cap = 10000000;
};

struct ValidationEntry {
    std::string id;
    int samples = 0;
    int violations = 0;
    double worst_margin = 0.0;  // min over samples of (bound - value); < 0 means violated
    std::string witness;        // where the worst margin occurred
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    bool ok() const {
        for (const auto& e : entries)
            if (e.violations > 0) return false;
        return true;
    }
    std::string text() const;
    std::string csv() const;
};

class EnvelopeError : public std::runtime_error {
  public:
    explicit EnvelopeError(const std::string& what) : std::runtime_error(what) {}
};

// All constants and monotone majorant functions the hybrid law needs:
// Lipschitz growth, reachability and horizon bounds, Euler growth rates,
// feedback envelopes, the prediction accuracy target, the step-count rule
// and the guaranteed decay rate. Grid-backed pieces are built once
// (write-once memo tables); everything here is immutable after build and
// safe to share across threads.
class EnvelopeSet {
  public:
    static EnvelopeSet build(std::shared_ptr<const PlantModel> model,
                             std::shared_ptr<const ReferenceTrajectory> ref,
                             double mu, double eps, double r, double tau,
                             EnvelopeOptions opts = {});

    // --- scalar constants ---
    double mu() const { return mu_; }
    double eps() const { return eps_; }
    double r() const { return r_; }
    double tau() const { return tau_; }
    double energy_growth() const { return c_; }          // rate in the W dissipation bound
    double gain_sup() const { return gain_sup_; }
    double lyap_condition() const { return K_; }         // V condition number
    double decay_slack() const { return gamma_; }        // residual allowed in the V decay
    double capture_level() const { return delta_; }      // V level held after capture
    double feedback_slope() const { return ktilde_; }    // |u| <= slope*|x| near zero
    double local_lipschitz() const { return Ltilde_; }   // Lipschitz rate inside the capture ball
    PosVal hold_mismatch_gain() const { return phi_; }   // prediction-to-decay transfer gain
    PosVal accuracy_slope() const { return Rtilde_; }    // slope cap of the accuracy target
    double energy_offset() const { return R2_; }
    double decay_rate() const { return omega_; }         // certified rate of the tracking bound

    // --- monotone envelope functions ---
    double grad_env_g1(double rho) const;   // sup |grad g1| over the disc
    double grad_env_g2(double rho) const;
    double grad_env_energy(double rho) const;   // sup |grad Wtilde|
    double hess_env_energy(double rho) const;   // sup |hess Wtilde|
    PosVal grad_env_g1(PosVal rho) const;
    PosVal grad_env_g2(PosVal rho) const;
    PosVal grad_env_energy(PosVal rho) const;
    PosVal hess_env_energy(PosVal rho) const;

    double energy_minorant(double sigma) const;          // theta1
    double energy_majorant(double sigma) const;          // theta2
    PosVal energy_majorant(PosVal sigma) const;
    PosVal energy_minorant_inv(PosVal y) const;

    double gain_floor(double rho) const;                 // min g2 over the disc
    double input_energy_rate(double u) const;            // p(u) = Gsup^2 u^2

    double lipschitz(double s) const;                    // L
    PosVal lipschitz(PosVal s) const;
    PosVal defect_bound(PosVal s) const;                 // P
    PosVal reach_bound(double w, PosVal s) const;        // Q_w
    PosVal horizon_bound(double w, PosVal s) const;      // a_w
    PosVal euler_rate(double s) const;                   // A
    PosVal euler_curvature(double s) const;              // B
    PosVal feedback_mismatch(PosVal s) const;            // M
    PosVal feedback_envelope(PosVal s) const;            // atilde
    double feedback_envelope_inv(double y) const;
    PosVal scaled_envelope(PosVal s) const;              // beta
    PosVal hold_drift(PosVal s) const;                   // D_r
    PosVal prediction_accuracy(double s) const;          // R, the accuracy target
    // Accuracy the hold-interval decay argument would ask for; reported but
    // not folded into the target (see README on practical magnitudes).
    PosVal hold_accuracy_requirement(double s) const;

    // Step-count rule. Monotone in s, N(0) = 1. In practical mode counts
    // above the cap are clamped and flagged; in certified mode an
    // infeasible count throws.
    StepCount step_count(double s) const;
    PosVal step_count_raw(double s) const;

    // Largest decay rate in (0, mu/2) passing both hold-interval
    // inequalities with margin; scanned then bisected.
    double choose_omega() const;

    const EnergyFunction& energy() const { return energy_; }
    const PlantModel& model() const { return *model_; }
    const ReferenceTrajectory& ref() const { return *ref_; }
    const EnvelopeOptions& options() const { return options_; }
    StepMode mode() const { return options_.mode; }
    void set_mode(StepMode m) { options_.mode = m; }
    void set_step_cap(long long cap) { options_.step_cap = cap; }

    // Sampled verification of every inequality the construction promises;
    // any violation is a hard failure for the caller.
    ValidationReport validate(int n_samples, std::uint64_t seed) const;

  private:
    EnvelopeSet() = default;
    void build_grids();
    void build_constants();
    double circle_min_energy(double sigma) const;
    double theta1_knot(std::size_t i) const;

    std::shared_ptr<const PlantModel> model_;
    std::shared_ptr<const ReferenceTrajectory> ref_;
    EnergyFunction energy_{nullptr, nullptr};
    EnvelopeOptions options_;

    double mu_ = 0, eps_ = 0, r_ = 0, tau_ = 0;
    double c_ = 0, gain_sup_ = 0, K_ = 0, gamma_ = 0, delta_ = 0;
    double ktilde_ = 0, Ltilde_ = 0, R2_ = 1.0, omega_ = 0;
    PosVal phi_, Rtilde_;
    double lambda1_ = 0, lambda2_ = 0, lambda3_ = 0, lambda4_ = 0, lambda5_ = 0;

    // log-spaced radial knots with per-knot disc suprema / circle minima
    std::vector<double> rho_;
    std::vector<double> psi1_, psi2_, psi3_, psi4_;
    std::vector<double> g2min_;
    std::vector<double> theta2_;
    std::vector<double> menv_;  // monotone lower envelope of the circle minimum of Wtilde
    double theta1_log_slope_ = 0;

    // tail coefficients (closed-form quadratic majorants beyond the grid)
    double p1a_ = 0, p1b_ = 0, p1c_ = 0;
    double p2a_ = 0, p2b_ = 0;
    double p3a_ = 0, p3b_ = 0, p3c_ = 0;
    double p4a_ = 0, p4b_ = 0, p4c_ = 0;
};

EnvelopeSet build_envelopes(std::shared_ptr<const PlantModel> model,
                            std::shared_ptr<const ReferenceTrajectory> ref,
                            double mu, double eps, double r, double tau,
                            EnvelopeOptions opts = {});

}  // namespace nmespf
