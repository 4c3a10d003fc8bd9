#include "nmespf/envelopes.hpp"

#include "nmespf/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nmespf {

namespace {

constexpr double kLn10 = 2.302585092994045684;

// right-knot lookup on a log-spaced monotone (non-decreasing) table
double majorant_lookup(const std::vector<double>& rho,
                       const std::vector<double>& val, double x) {
    if (x <= rho.front()) return val.front();
    auto it = std::lower_bound(rho.begin(), rho.end(), x);
    if (it == rho.end()) return val.back();
    return val[static_cast<std::size_t>(it - rho.begin())];
}

double lerp_lookup(const std::vector<double>& rho, const std::vector<double>& val,
                   double x) {
    if (x <= rho.front()) {
        // linear from the origin through the first knot
        return val.front() * (x / rho.front());
    }
    auto it = std::lower_bound(rho.begin(), rho.end(), x);
    if (it == rho.end()) return val.back();
    const std::size_t i = static_cast<std::size_t>(it - rho.begin());
    if (i == 0) return val.front();
    const double t = (x - rho[i - 1]) / (rho[i] - rho[i - 1]);
    return val[i - 1] + t * (val[i] - val[i - 1]);
}

}  // namespace

// ---------------------------------------------------------------- energy --

double EnergyFunction::tilde(const Vec2& x) const {
    const double d = 1.0 + x.x1 * x.x1;
    const double kin = x.x2 / d;
    return 1.0 + 0.5 * kin * kin + model_->potential(std::atan(x.x1));
}

double EnergyFunction::at(double t, const Vec2& x) const {
    return tilde(ref_->zeta(t) + x);
}

Vec2 EnergyFunction::grad_tilde(const Vec2& x) const {
    const double d = 1.0 + x.x1 * x.x1;
    const double q = std::atan(x.x1);
    const double g1 = -2.0 * x.x1 * x.x2 * x.x2 / (d * d * d) +
                      model_->potential_slope(q) / d;
    const double g2 = x.x2 / (d * d);
    return {g1, g2};
}

std::array<double, 3> EnergyFunction::hess_tilde(const Vec2& x) const {
    const double d = 1.0 + x.x1 * x.x1;
    const double q = std::atan(x.x1);
    const double fq = model_->potential_slope(q);
    const double fqq = model_->potential_curv(q);
    const double h11 = -2.0 * x.x2 * x.x2 * (1.0 - 5.0 * x.x1 * x.x1) /
                           (d * d * d * d) +
                       (fqq - 2.0 * x.x1 * fq) / (d * d);
    const double h12 = -4.0 * x.x1 * x.x2 / (d * d * d);
    const double h22 = 1.0 / (d * d);
    return {h11, h12, h22};
}

// ----------------------------------------------------------------- build --

EnvelopeSet EnvelopeSet::build(std::shared_ptr<const PlantModel> model,
                               std::shared_ptr<const ReferenceTrajectory> ref,
                               double mu, double eps, double r, double tau,
                               EnvelopeOptions opts) {
    if (!(mu > 0) || !(eps > 0) || !(r > 0) || !(tau > 0)) {
        throw EnvelopeError("build_envelopes: mu, eps, r, tau must be positive");
    }
    EnvelopeSet e;
    e.model_ = model;
    e.ref_ = ref;
    e.energy_ = EnergyFunction(model, ref);
    e.options_ = opts;
    e.mu_ = mu;
    e.eps_ = eps;
    e.r_ = r;
    e.tau_ = tau;
    e.lambda1_ = ref->sup_zeta();
    e.lambda2_ = ref->sup_vd();
    e.lambda3_ = ref->sup_zeta_dot();
    e.lambda4_ = ref->sup_vd_dot();
    e.lambda5_ = ref->sup_zeta_ddot();
    e.gain_sup_ = model->gain_sup();
    e.build_grids();
    e.build_constants();
    return e;
}

EnvelopeSet build_envelopes(std::shared_ptr<const PlantModel> model,
                            std::shared_ptr<const ReferenceTrajectory> ref,
                            double mu, double eps, double r, double tau,
                            EnvelopeOptions opts) {
    return EnvelopeSet::build(std::move(model), std::move(ref), mu, eps, r, tau, opts);
}

double EnvelopeSet::circle_min_energy(double sigma) const {
    const int na = options_.grid_angles;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < na; ++a) {
        const double ang = 2.0 * M_PI * a / na;
        best = std::min(best,
                        energy_.tilde({sigma * std::cos(ang), sigma * std::sin(ang)}));
    }
    return best;
}

void EnvelopeSet::build_grids() {
    const PlantModel& m = *model_;
    const int nr = options_.grid_radii;
    const int na = options_.grid_angles;
    const double rho_min = 1e-6;
    const double rho_max = options_.grid_rho_max;

    rho_.resize(nr);
    for (int i = 0; i < nr; ++i) {
        rho_[i] = rho_min * std::pow(rho_max / rho_min, double(i) / (nr - 1));
    }

    psi1_.assign(nr, 0.0);
    psi2_.assign(nr, 0.0);
    psi3_.assign(nr, 0.0);
    psi4_.assign(nr, 0.0);
    g2min_.assign(nr, std::numeric_limits<double>::infinity());
    theta2_.assign(nr, 0.0);
    std::vector<double> mraw(nr, 0.0);

    const bool const_gain = m.constant_gain();
    double gain_grad_bound = 0.0;
    if (!const_gain) {
        // finite-difference sup of the gain gradient over the strip
        for (int i = 0; i < 65; ++i) {
            const double q = (-1.0 + 2.0 * i / 64.0) * (kHalfPi - 1e-4);
            for (int j = 0; j < 33; ++j) {
                const double qd = std::tan((-1.0 + 2.0 * j / 32.0) * 1.5) * 10.0;
                const double h = 1e-5;
                const double gq =
                    (m.input_gain(std::min(q + h, kHalfPi - 1e-9), qd) -
                     m.input_gain(std::max(q - h, -kHalfPi + 1e-9), qd)) /
                    (2 * h);
                const double gv = (m.input_gain(q, qd + h) - m.input_gain(q, qd - h)) /
                                  (2 * h);
                gain_grad_bound = std::max(gain_grad_bound,
                                           std::fabs(gq) + std::fabs(gv));
            }
        }
        gain_grad_bound *= options_.safety;
    }

    for (int i = 0; i < nr; ++i) {
        const double rho = rho_[i];
        double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
        double gmin = std::numeric_limits<double>::infinity();
        double wmax = 0.0;
        double wmin = std::numeric_limits<double>::infinity();
        for (int a = 0; a < na; ++a) {
            const double ang = 2.0 * M_PI * a / na;
            const double z1 = rho * std::cos(ang);
            const double z2 = rho * std::sin(ang);
            const double d = 1.0 + z1 * z1;
            const double q = std::atan(z1);
            const double w = z2 / d;

            // analytic gradient of the transformed drift
            const double fq = m.potential_slope(q);
            const double fqq = m.potential_curv(q);
            const double hw = m.damping(w);
            const double hpw = m.damping_slope(w);
            const double dg1_1 = -2.0 * z1 * fq - fqq +
                                 2.0 * z2 * z2 * (1.0 - z1 * z1) / (d * d) -
                                 2.0 * z1 * hw + 2.0 * z1 * z2 * hpw / d;
            const double dg1_2 = 4.0 * z1 * z2 / d - hpw;
            s1 = std::max(s1, std::hypot(dg1_1, dg1_2));

            // gradient of the transformed input gain
            const double g = m.input_gain(q, w);
            double dg2_1, dg2_2;
            if (const_gain) {
                dg2_1 = 2.0 * z1 * g;
                dg2_2 = 0.0;
            } else {
                const double h = 1e-5 * (1.0 + rho);
                const double gp = eval_g12(m, {z1 + h, z2}).g2;
                const double gm = eval_g12(m, {z1 - h, z2}).g2;
                const double gp2 = eval_g12(m, {z1, z2 + h}).g2;
                const double gm2 = eval_g12(m, {z1, z2 - h}).g2;
                dg2_1 = (gp - gm) / (2 * h);
                dg2_2 = (gp2 - gm2) / (2 * h);
            }
            s2 = std::max(s2, std::hypot(dg2_1, dg2_2));
            gmin = std::min(gmin, d * g);

            const Vec2 x{z1, z2};
            const Vec2 gw = energy_.grad_tilde(x);
            s3 = std::max(s3, gw.norm());
            const auto hs = energy_.hess_tilde(x);
            // spectral norm of the symmetric 2x2
            const double tr = 0.5 * (hs[0] + hs[2]);
            const double dd = std::sqrt(0.25 * (hs[0] - hs[2]) * (hs[0] - hs[2]) +
                                        hs[1] * hs[1]);
            s4 = std::max(s4, std::fabs(tr) + dd);

            const double wv = energy_.tilde(x);
            wmax = std::max(wmax, wv);
            wmin = std::min(wmin, wv);
        }
        const double sf = options_.safety;
        psi1_[i] = s1 * sf;
        psi2_[i] = s2 * sf;
        psi3_[i] = s3 * sf;
        psi4_[i] = s4 * sf;
        g2min_[i] = gmin / 1.05;
        theta2_[i] = (wmax - 1.0) * sf;
        mraw[i] = wmin;
        if (i > 0) {
            psi1_[i] = std::max(psi1_[i], psi1_[i - 1]);
            psi2_[i] = std::max(psi2_[i], psi2_[i - 1]);
            psi3_[i] = std::max(psi3_[i], psi3_[i - 1]);
            psi4_[i] = std::max(psi4_[i], psi4_[i - 1]);
            theta2_[i] = std::max(theta2_[i], theta2_[i - 1]);
            g2min_[i] = std::min(g2min_[i], g2min_[i - 1]);
        }
    }

    // monotone lower envelope of the circle minimum (min over all larger radii)
    menv_ = mraw;
    for (int i = nr - 2; i >= 0; --i) menv_[i] = std::min(menv_[i], menv_[i + 1]);

    // closed-form quadratic majorant coefficients for beyond-grid arguments
    p1c_ = 2.0 * m.slope_c1() + m.curv_c1() + 2.0 + 2.0 * m.damping_lin() +
           m.damping_slope_max();
    p1b_ = 2.0 * m.slope_c0() + 2.0 * m.damping_offset() + 2.0;
    p1a_ = m.curv_c0() + m.curv_c1() + m.damping_slope_max();
    p2b_ = 2.0 * gain_sup_;
    p2a_ = gain_grad_bound * 2.0;
    p3c_ = 0.52;
    p3b_ = 1.0;
    p3a_ = m.slope_c0() + 0.5 * m.slope_c1();
    p4c_ = 2.0;
    p4b_ = 2.6;
    p4a_ = 1.0 + m.curv_c0() + m.curv_c1() + m.slope_c0() + m.slope_c1();

    // log-slope tail of the energy minorant, checked against samples past
    // the grid edge
    theta1_log_slope_ = 0.25 * m.slope_c1();
    const double edge = theta1_knot(rho_.size() - 1);
    for (double mult : {2.0, 4.0, 8.0}) {
        const double sigma = rho_.back() * mult;
        const double mval = circle_min_energy(sigma);
        const double tail = edge + theta1_log_slope_ * std::log(mult);
        if (tail > options_.minorant_deflate * mval - std::exp(-sigma)) {
            theta1_log_slope_ *= 0.5;  // rare; very soft barriers
        }
    }
}

double EnvelopeSet::theta1_knot(std::size_t i) const {
    const double lower = 0.9 * rho_[i] / (1.0 + rho_[i]);
    return std::max(options_.minorant_deflate * menv_[i] - std::exp(-rho_[i]), lower);
}

void EnvelopeSet::build_constants() {
    const double mu = mu_;
    const double root = std::sqrt(mu * mu + 4.0);
    K_ = (mu * mu + 2.0 + mu * root) / (mu * mu + 2.0 - mu * root);
    c_ = 0.5 + gain_sup_ * gain_sup_ * lambda2_ * lambda2_;
    delta_ = eps_ * eps_ / (4.0 * K_);
    gamma_ = std::min(eps_ / (2.0 * std::sqrt(K_)), mu * eps_ * eps_ / (8.0 * K_));
    if (2.0 * std::sqrt(K_ * delta_) > eps_ * (1.0 + 1e-12)) {
        throw EnvelopeError("capture level inconsistent with eps");
    }

    const double sqrtK = std::sqrt(K_);
    ktilde_ = ((1.0 + mu) * (1.0 + mu) + grad_env_g1(lambda1_ + eps_) +
               lambda2_ * grad_env_g2(lambda1_ + eps_)) /
              gain_floor(lambda1_ + eps_);
    Ltilde_ = lipschitz((1.0 + ktilde_) * eps_ + eps_ / (2.0 * sqrtK));

    const PosVal m_arg = feedback_mismatch(pv(eps_ + eps_ / (2.0 * sqrtK)));
    phi_ = pv(2.0 * K_) * m_arg * PosVal::exp_of(r_ * Ltilde_);
    // beyond ~10^1e12 the log representation cannot resolve the products the
    // contraction check needs
    if (!std::isfinite(phi_.lg) || phi_.lg > 1e12) {
        throw EnvelopeError(
            "mismatch gain is 10^" + format_double(phi_.lg) +
            "; the contraction conditions cannot be verified at this magnitude");
    }

    Rtilde_ = min(pv(mu * std::sqrt(2.0)) / (pv(2.0) * phi_ *
                                             pv(1.0 + 4.0 * ktilde_ * sqrtK)),
                  min(pv(1.0 / (2.0 * ktilde_ * sqrtK)), pv(0.5)));

    // feasibility of the hold-interval contraction pair
    const PosVal first = Rtilde_ * pv(ktilde_ * sqrtK);
    if (!(first < pv(1.0))) {
        throw EnvelopeError("contraction condition violated: Rtilde*ktilde*sqrt(K) = " +
                            first.str() + " >= 1");
    }
    const double fr = first.value();
    const PosVal second =
        phi_ * Rtilde_ / pv(mu * std::sqrt(2.0)) *
        pv(1.0 + ktilde_ * sqrtK * (Rtilde_.value() + 1.0) / (1.0 - fr));
    if (!(second < pv(1.0))) {
        throw EnvelopeError("contraction condition violated: hold-interval gain = " +
                            second.str() + " >= 1");
    }

    omega_ = choose_omega();
}

// ------------------------------------------------------------- envelopes --

double EnvelopeSet::grad_env_g1(double rho) const {
    if (rho > rho_.back())
        return std::max(psi1_.back(), p1a_ + rho * (p1b_ + rho * p1c_));
    return majorant_lookup(rho_, psi1_, rho);
}

double EnvelopeSet::grad_env_g2(double rho) const {
    if (rho > rho_.back()) return std::max(psi2_.back(), p2a_ + p2b_ * rho);
    return majorant_lookup(rho_, psi2_, rho);
}

double EnvelopeSet::grad_env_energy(double rho) const {
    if (rho > rho_.back())
        return std::max(psi3_.back(), p3a_ + rho * (p3b_ + rho * p3c_));
    return majorant_lookup(rho_, psi3_, rho);
}

double EnvelopeSet::hess_env_energy(double rho) const {
    if (rho > rho_.back())
        return std::max(psi4_.back(), p4a_ + rho * (p4b_ + rho * p4c_));
    return majorant_lookup(rho_, psi4_, rho);
}

PosVal EnvelopeSet::grad_env_g1(PosVal rho) const {
    if (rho.lg < 300.0) return pv(grad_env_g1(rho.value()));
    return pv(p1a_) + rho * (pv(p1b_) + rho * pv(p1c_));
}

PosVal EnvelopeSet::grad_env_g2(PosVal rho) const {
    if (rho.lg < 300.0) return pv(grad_env_g2(rho.value()));
    return pv(p2a_) + pv(p2b_) * rho;
}

PosVal EnvelopeSet::grad_env_energy(PosVal rho) const {
    if (rho.lg < 300.0) return pv(grad_env_energy(rho.value()));
    return pv(p3a_) + rho * (pv(p3b_) + rho * pv(p3c_));
}

PosVal EnvelopeSet::hess_env_energy(PosVal rho) const {
    if (rho.lg < 300.0) return pv(hess_env_energy(rho.value()));
    return pv(p4a_) + rho * (pv(p4b_) + rho * pv(p4c_));
}

double EnvelopeSet::energy_minorant(double sigma) const {
    if (sigma <= 0.0) return 0.0;
    if (sigma > rho_.back()) {
        return theta1_knot(rho_.size() - 1) +
               theta1_log_slope_ * std::log(sigma / rho_.back());
    }
    if (sigma <= rho_.front()) {
        return theta1_knot(0) * (sigma / rho_.front());
    }
    auto it = std::lower_bound(rho_.begin(), rho_.end(), sigma);
    const std::size_t i = static_cast<std::size_t>(it - rho_.begin());
    const double t = (sigma - rho_[i - 1]) / (rho_[i] - rho_[i - 1]);
    return theta1_knot(i - 1) + t * (theta1_knot(i) - theta1_knot(i - 1));
}

double EnvelopeSet::energy_majorant(double sigma) const {
    if (sigma <= 0.0) return 0.0;
    if (sigma > rho_.back()) {
        const double k3j = model_->slope_c1();
        auto ub = [&](double s) {
            return 0.5 * s * s + 0.5 * k3j * std::log1p(s * s) + model_->slope_c0();
        };
        const double edge = std::max(theta2_.back(), ub(rho_.back()));
        return edge + options_.safety * (ub(sigma) - ub(rho_.back()));
    }
    if (sigma <= rho_.front()) return theta2_.front() * (sigma / rho_.front());
    return majorant_lookup(rho_, theta2_, sigma);
}

PosVal EnvelopeSet::energy_majorant(PosVal sigma) const {
    if (sigma.lg < 150.0) return pv(energy_majorant(sigma.value()));
    // quadratic kinetic term dominates far out
    const double k3j = model_->slope_c1();
    const PosVal quad = pv(0.5 * options_.safety) * sigma * sigma;
    const PosVal logpart = pv(options_.safety * k3j * kLn10) * pv(std::max(sigma.lg, 1.0));
    return quad + logpart + pv(theta2_.back());
}

PosVal EnvelopeSet::energy_minorant_inv(PosVal y) const {
    const double edge = theta1_knot(rho_.size() - 1);
    if (!(y.lg > -std::numeric_limits<double>::infinity())) return pv(0.0);
    const double yv = y.value();
    if (std::isfinite(yv) && yv <= edge) {
        double lo = 0.0, hi = rho_.back();
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (energy_minorant(mid) < yv) lo = mid; else hi = mid;
        }
        return pv(0.5 * (lo + hi));
    }
    // log tail: sigma = rho_max * exp((y - edge)/slope)
    PosVal out;
    if (std::isfinite(yv)) {
        out.lg = std::log10(rho_.back()) + (yv - edge) / (theta1_log_slope_ * kLn10);
    } else {
        out.lg = std::numeric_limits<double>::infinity();
    }
    return out;
}

double EnvelopeSet::gain_floor(double rho) const {
    if (rho > rho_.back()) return std::min(g2min_.back(), model_->gain_inf());
    if (rho <= rho_.front()) return g2min_.front();
    auto it = std::lower_bound(rho_.begin(), rho_.end(), rho);
    return g2min_[static_cast<std::size_t>(it - rho_.begin())];
}

double EnvelopeSet::input_energy_rate(double u) const {
    return gain_sup_ * gain_sup_ * u * u;
}

double EnvelopeSet::lipschitz(double s) const {
    return 1.0 + s + grad_env_g1(lambda1_ + s) +
           (1.0 + lambda2_) * grad_env_g2(lambda1_ + s) +
           gain_sup_ * (1.0 + 2.0 * lambda1_ * lambda1_ + 2.0 * s * s);
}

PosVal EnvelopeSet::lipschitz(PosVal s) const {
    if (s.lg < 150.0) return pv(lipschitz(s.value()));
    const PosVal l1 = pv(lambda1_);
    const PosVal arg = l1 + s;
    return pv(1.0) + s + grad_env_g1(arg) + pv(1.0 + lambda2_) * grad_env_g2(arg) +
           pv(gain_sup_) * (pv(1.0 + 2.0 * lambda1_ * lambda1_) + pv(2.0) * s * s);
}

PosVal EnvelopeSet::defect_bound(PosVal s) const {
    const PosVal L = lipschitz(s);
    const PosVal sL = s * L;
    const PosVal dilated = s * (pv(1.0) + pv(tau_) * L);
    const PosVal t1 = pv(2.0 * lambda3_) * grad_env_g1(s + pv(lambda1_)) +
                      pv(2.0 * lambda2_ * lambda3_) * grad_env_g2(s + pv(lambda1_)) +
                      pv(lambda4_ + lambda3_) * s * grad_env_g2(s + pv(lambda1_));
    const PosVal t2 = grad_env_energy(s + pv(lambda1_));
    const PosVal sum = pv(lambda3_) + sL;
    return t1 * t1 + t2 * t2 + pv(1.0) +
           hess_env_energy(dilated + pv(lambda1_)) * sum * sum +
           pv(lambda5_) * grad_env_energy(dilated + pv(lambda1_));
}

PosVal EnvelopeSet::reach_bound(double w, PosVal s) const {
    const PosVal bound = PosVal::exp_of(2.0 * c_ * w) *
                             (pv(R2_) + energy_majorant(s + pv(lambda1_))) +
                         pv(1.0 / (2.0 * c_)) * PosVal::exp_of(2.0 * c_ * w) *
                             pv(gain_sup_ * gain_sup_) * s * s;
    return pv(1.0) + energy_minorant_inv(bound) + pv(lambda1_);
}

PosVal EnvelopeSet::horizon_bound(double w, PosVal s) const {
    const PosVal L = lipschitz(reach_bound(w, s) + s);
    const double wl = (L.lg < 300.0) ? w * L.value()
                                     : std::numeric_limits<double>::infinity();
    const PosVal growth = std::isfinite(wl)
                              ? PosVal::exp_of(wl)
                              : PosVal::exp_of(std::numeric_limits<double>::infinity());
    return s * (pv(1.0) + pv(w) * L) * growth;
}

PosVal EnvelopeSet::euler_rate(double s) const {
    const PosVal sp = pv(s);
    return lipschitz(reach_bound(tau_, sp) + horizon_bound(tau_, sp) + sp);
}

PosVal EnvelopeSet::euler_curvature(double s) const {
    const PosVal sp = pv(s);
    const PosVal a = horizon_bound(tau_, sp) + sp;
    return euler_rate(s) * a * lipschitz(a);
}

PosVal EnvelopeSet::feedback_mismatch(PosVal s) const {
    const double floor_arg = (s.lg < 300.0)
                                 ? lambda1_ + s.value()
                                 : std::numeric_limits<double>::infinity();
    const double floor = std::isfinite(floor_arg)
                             ? gain_floor(floor_arg)
                             : std::min(g2min_.back(), model_->gain_inf());
    return (pv((1.0 + mu_) * (1.0 + mu_)) + lipschitz(s)) *
           (pv(1.0) + s * grad_env_g2(s + pv(lambda1_)) / pv(floor));
}

PosVal EnvelopeSet::feedback_envelope(PosVal s) const {
    if (s.lg < 300.0 && s.value() < eps_) return pv(ktilde_) * s;
    const double floor_arg = (s.lg < 300.0)
                                 ? lambda1_ + s.value()
                                 : std::numeric_limits<double>::infinity();
    const double floor = std::isfinite(floor_arg)
                             ? gain_floor(floor_arg)
                             : std::min(g2min_.back(), model_->gain_inf());
    return (pv((1.0 + mu_) * (1.0 + mu_)) + grad_env_g1(s + pv(lambda1_)) +
            pv(lambda2_) * grad_env_g2(s + pv(lambda1_))) *
           s / pv(floor);
}

double EnvelopeSet::feedback_envelope_inv(double y) const {
    if (!(y >= 0.0)) throw std::domain_error("feedback_envelope_inv: negative");
    if (y == 0.0) return 0.0;
    double hi = std::max(1.0, eps_);
    while (feedback_envelope(pv(hi)).value() < y && hi < 1e12) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (feedback_envelope(pv(mid)).value() < y) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

PosVal EnvelopeSet::scaled_envelope(PosVal s) const {
    const PosVal sk = s * pv(std::sqrt(K_));
    return feedback_envelope(sk) + sk;
}

PosVal EnvelopeSet::hold_drift(PosVal s) const {
    const PosVal a = horizon_bound(r_, s);
    const PosVal arg = a + s;
    const PosVal L = lipschitz(arg);
    const double rl = (L.lg < 300.0) ? r_ * L.value()
                                     : std::numeric_limits<double>::infinity();
    const PosVal growth = std::isfinite(rl)
                              ? PosVal::exp_of(rl)
                              : PosVal::exp_of(std::numeric_limits<double>::infinity());
    return pv(2.0 * K_) * arg * feedback_mismatch(arg) * growth;
}

PosVal EnvelopeSet::prediction_accuracy(double s) const {
    // min of the slope cap and the small-feedback branch; see README for why
    // the hold-interval requirement is reported separately.
    const PosVal b1 = Rtilde_ * pv(s);
    const PosVal b2 = pv(1.0 / (2.0 * std::sqrt(K_))) *
                      pv(feedback_envelope_inv(0.5 * s));
    return min(b1, b2);
}

PosVal EnvelopeSet::hold_accuracy_requirement(double s) const {
    const PosVal sp = pv(s);
    const PosVal d = hold_drift(horizon_bound(r_, sp) + scaled_envelope(reach_bound(tau_, sp)));
    return pv(gamma_) / max(pv(1.0), d);
}

PosVal EnvelopeSet::step_count_raw(double s) const {
    if (s <= 0.0) return pv(1.0);
    const PosVal sp = pv(s);
    const PosVal a = horizon_bound(tau_, sp);
    const PosVal A = euler_rate(s);
    const double tA = (A.lg < 300.0) ? tau_ * A.value()
                                     : std::numeric_limits<double>::infinity();
    const PosVal egrow = std::isfinite(tA)
                             ? PosVal::expm1_of(tA)
                             : PosVal::exp_of(std::numeric_limits<double>::infinity());
    const PosVal branch1 = pv(tau_) * (a + sp) * lipschitz(a + sp) * egrow /
                           (pv(2.0) * prediction_accuracy(s));
    const PosVal branch2 = pv(tau_) * defect_bound(reach_bound(tau_, sp) + sp) / pv(c_);
    return max(branch1, branch2);
}

StepCount EnvelopeSet::step_count(double s) const {
    StepCount out;
    if (s <= 0.0) {
        out.n = 1;
        out.log10_n = 0.0;
        return out;
    }
    const PosVal raw = step_count_raw(s);
    out.log10_n = raw.lg;
    if (raw.lg < 17.0) {
        const long long n = static_cast<long long>(std::floor(raw.value())) + 1;
        if (options_.mode == StepMode::Practical && n > options_.step_cap) {
            out.n = options_.step_cap;
            out.capped = true;
        } else if (options_.mode == StepMode::Certified && n > 1000000000LL) {
            throw EnvelopeError("certified step count infeasible: N = " + raw.str());
        } else {
            out.n = n;
        }
        return out;
    }
    if (options_.mode == StepMode::Certified) {
        throw EnvelopeError("certified step count infeasible: N = " + raw.str());
    }
    out.n = options_.step_cap;
    out.capped = true;
    return out;
}

// --------------------------------------------------------------- omega ----

namespace {

struct HoldIneq {
    // both inequalities of the hold-interval contraction with rate w
    static bool feasible(double w, double mu, double r, double tau, double K,
                         double ktilde, PosVal phi, PosVal Rtilde, double margin) {
        if (!(w > 0.0) || !(w < mu / 2.0)) return false;
        const double sqrtK = std::sqrt(K);
        const PosVal first = Rtilde * pv(ktilde * sqrtK) * PosVal::exp_of(w * (r + tau));
        if (!(first.value() < 1.0 - margin)) return false;
        const double fr = first.value();
        const PosVal inner = pv(1.0) + pv(ktilde * sqrtK) * PosVal::exp_of(w * r) *
                                           (Rtilde + PosVal::exp_of(-w * tau)) /
                                           pv(1.0 - fr);
        const PosVal second = phi * Rtilde / pv(std::sqrt(2.0 * mu)) *
                              PosVal::exp_of(w * (r + tau)) /
                              pv(std::sqrt(mu - 2.0 * w)) * inner;
        return second.value() < 1.0 - margin;
    }
};

}  // namespace

double EnvelopeSet::choose_omega() const {
    const double margin = options_.omega_margin;
    auto ok = [&](double w) {
        return HoldIneq::feasible(w, mu_, r_, tau_, K_, ktilde_, phi_, Rtilde_, margin);
    };
    const int n = 4096;
    double best = -1.0;
    for (int i = 1; i < n; ++i) {
        const double w = mu_ / 2.0 * i / n;
        if (ok(w)) best = w;
    }
    if (best < 0.0) {
        throw EnvelopeError("no feasible decay rate in (0, mu/2)");
    }
    double lo = best, hi = std::min(best + mu_ / (2.0 * n), mu_ / 2.0);
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (ok(mid)) lo = mid; else hi = mid;
    }
    return lo;
}

// ------------------------------------------------------------ validation --

namespace {

struct Check {
    ValidationEntry e;
    void record(double margin, const std::string& where) {
        e.samples += 1;
        if (e.samples == 1 || margin < e.worst_margin) {
            e.worst_margin = margin;
            e.witness = where;
        }
        if (margin < 0.0) e.violations += 1;
    }
};

std::string where_str(double t, const Vec2& x) {
    return "t=" + format_double(t) + " x=(" + format_double(x.x1) + "," +
           format_double(x.x2) + ")";
}

}  // namespace

ValidationReport EnvelopeSet::validate(int n_samples, std::uint64_t seed) const {
    const PlantModel& m = *model_;
    const ReferenceTrajectory& ref = *ref_;
    Rng rng(seed);
    const double t_max = 20.0;
    const double x_box = 3.0;
    const double u_box = 2.0;

    auto rand_vec = [&](double box) {
        return Vec2{rng.uniform(-box, box), rng.uniform(-box, box)};
    };

    Check lip2{{"state-lipschitz"}};
    Check lip3{{"field-growth"}};
    Check cur5{{"energy-curvature"}};
    Check grd6{{"energy-gradient"}};
    Check tim7{{"time-regularity"}};
    Check sqz9{{"energy-squeeze"}};
    Check v15{{"quadratic-form-squeeze"}};
    Check v16{{"quadratic-form-gradient"}};
    Check fb17{{"feedback-magnitude"}};
    Check fb18{{"feedback-linear-head"}};
    Check fb19{{"feedback-mismatch"}};
    Check rea8{{"reachability"}};

    for (int it = 0; it < n_samples; ++it) {
        const double t = rng.uniform(0.0, t_max);
        const Vec2 x = rand_vec(x_box);
        const Vec2 y = rand_vec(x_box);
        const double u = rng.uniform(-u_box, u_box);

        {
            const Vec2 fx = error_rhs(m, ref, t, x, u);
            const Vec2 fy = error_rhs(m, ref, t, y, u);
            const double lhs = (fx - fy).norm();
            const double rhs = lipschitz(x.norm() + y.norm() + std::fabs(u)) *
                               (x - y).norm();
            lip2.record(rhs - lhs, where_str(t, x));

            const double s = x.norm() + std::fabs(u);
            lip3.record(s * lipschitz(s) - fx.norm(), where_str(t, x));
        }

        {
            // finite differences of W(t, x) = Wtilde(zeta_d(t) + x)
            const double s = rng.uniform(0.0, x_box);
            const double dil = s * (1.0 + tau_ * lipschitz(s));
            const double ang = rng.uniform(0.0, 2.0 * M_PI);
            const double rad = rng.uniform(0.0, std::min(dil, 50.0));
            const Vec2 xi{rad * std::cos(ang), rad * std::sin(ang)};
            const double h = 1e-4;
            auto W = [&](double tt, const Vec2& xx) { return energy_.at(tt, xx); };
            const double wtt =
                (W(t + h, xi) - 2.0 * W(t, xi) + W(t - h, xi)) / (h * h);
            const Vec2 e1{h, 0}, e2{0, h};
            const double wtx1 = (W(t + h, xi + e1) - W(t + h, xi - e1) -
                                 W(t - h, xi + e1) + W(t - h, xi - e1)) /
                                (4 * h * h);
            const double wtx2 = (W(t + h, xi + e2) - W(t + h, xi - e2) -
                                 W(t - h, xi + e2) + W(t - h, xi - e2)) /
                                (4 * h * h);
            const double w11 =
                (W(t, xi + e1) - 2.0 * W(t, xi) + W(t, xi - e1)) / (h * h);
            const double w22 =
                (W(t, xi + e2) - 2.0 * W(t, xi) + W(t, xi - e2)) / (h * h);
            const double w12 = (W(t, xi + e1 + e2) - W(t, xi + e1 - e2) -
                                W(t, xi - e1 + e2) + W(t, xi - e1 - e2)) /
                               (4 * h * h);
            const double tr = 0.5 * (w11 + w22);
            const double dd = std::sqrt(0.25 * (w11 - w22) * (w11 - w22) + w12 * w12);
            const double hxx = std::fabs(tr) + dd;
            const double L = lipschitz(s);
            const double lhs = std::fabs(wtt) +
                               2.0 * s * L * std::hypot(wtx1, wtx2) +
                               s * s * L * L * hxx;
            const double P = defect_bound(pv(s)).value();
            // FD curvature carries O(h^2) noise; 0.1% headroom on the bound
            cur5.record(1.001 * (P - 1.0) - lhs, where_str(t, xi) + " s=" + format_double(s));

            const Vec2 grad{(W(t, xi + e1) - W(t, xi - e1)) / (2 * h),
                            (W(t, xi + e2) - W(t, xi - e2)) / (2 * h)};
            grd6.record(1.001 * std::sqrt(defect_bound(pv(xi.norm())).value()) -
                            grad.norm(),
                        where_str(t, xi));
        }

        {
            const double s2 = t + rng.uniform(0.0, 5.0);
            const Vec2 fx = error_rhs(m, ref, t, x, u);
            const Vec2 fs = error_rhs(m, ref, s2, x, u);
            const double rhs = (s2 - t) *
                               std::sqrt(defect_bound(pv(x.norm() + std::fabs(u))).value());
            tim7.record(rhs - (fs - fx).norm(), where_str(t, x));
        }

        {
            const double w = energy_.tilde(x);
            const double lo = energy_minorant(x.norm());
            const double hi = R2_ + energy_majorant(x.norm());
            sqz9.record(std::min(w - lo, hi - w), where_str(0, x));
        }

        {
            const double V = lyapunov_value(mu_, x);
            const double n2 = x.x1 * x.x1 + x.x2 * x.x2;
            v15.record(std::min(V - n2, K_ * n2 - V), where_str(0, x));
            v16.record(2.0 * K_ * x.norm() - lyapunov_gradient(mu_, x).norm(),
                       where_str(0, x));
        }

        {
            const double k = nominal_feedback(m, ref, mu_, t, x);
            fb17.record(feedback_envelope(pv(x.norm())).value() - std::fabs(k),
                        where_str(t, x));
            const double s = rng.uniform(0.0, eps_);
            fb18.record(1e-9 - std::fabs(feedback_envelope(pv(s)).value() - ktilde_ * s),
                        "s=" + format_double(s));
            const double kx = nominal_feedback(m, ref, mu_, t, x);
            const double ky = nominal_feedback(m, ref, mu_, t, y);
            const double lhs = gtilde(m, ref, t, x) * std::fabs(kx - ky);
            const double rhs = feedback_mismatch(pv(x.norm() + y.norm())).value() *
                               (x - y).norm();
            fb19.record(rhs - lhs, where_str(t, x));
        }

        if (it % 5 == 0) {
            // reachability: if W(t+h, x) is under the propagated level then
            // |x| is inside the reach bound
            const double s = rng.uniform(0.0, x_box);
            const double h = rng.uniform(0.0, tau_);
            double wmax = 0.0;
            for (int a = 0; a < 32; ++a) {
                const double ang = 2.0 * M_PI * a / 32;
                wmax = std::max(wmax, energy_.at(t, {s * std::cos(ang),
                                                     s * std::sin(ang)}));
            }
            const double level = std::exp(2.0 * c_ * tau_) * wmax +
                                 std::exp(2.0 * c_ * tau_) / (2.0 * c_) *
                                     input_energy_rate(s);
            if (energy_.at(t + h, x) <= level) {
                rea8.record(reach_bound(tau_, pv(s)).value() - x.norm(), where_str(t, x));
            } else {
                rea8.e.samples += 1;
            }
        }
    }

    ValidationReport rep;
    for (auto* c : {&lip2, &lip3, &cur5, &grd6, &tim7, &sqz9, &v15, &v16, &fb17,
                    &fb18, &fb19, &rea8}) {
        rep.entries.push_back(c->e);
    }
    return rep;
}

std::string ValidationReport::text() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << (e.violations == 0 ? "ok  " : "FAIL") << "  " << e.id
           << "  samples=" << e.samples << "  violations=" << e.violations
           << "  worst_margin=" << format_double(e.worst_margin);
        if (e.violations > 0) os << "  at " << e.witness;
        os << "\n";
    }
    return os.str();
}

std::string ValidationReport::csv() const {
    std::ostringstream os;
    os << "id,samples,violations,worst_margin\n";
    for (const auto& e : entries) {
        os << '"' << e.id << '"' << ',' << e.samples << ',' << e.violations << ','
           << format_double(e.worst_margin) << "\n";
    }
    return os.str();
}

}  // namespace nmespf
