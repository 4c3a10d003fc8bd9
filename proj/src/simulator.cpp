#include "nmespf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nmespf/predictor.hpp"
#include "nmespf/rk4.hpp"

namespace nmespf {

SamplingSchedule make_schedule(SamplingSchedule::Kind kind, double r, double horizon,
                               std::uint64_t seed) {
    if (!(r > 0.0) || !(horizon > 0.0)) {
        throw std::invalid_argument("make_schedule: r and horizon must be positive");
    }
    SamplingSchedule s;
    s.max_gap = r;
    if (kind == SamplingSchedule::Kind::Uniform) {
        const long long n = static_cast<long long>(std::ceil(horizon / r - 1e-12));
        for (long long i = 0; i <= n; ++i) {
            s.times.push_back(std::min(r * static_cast<double>(i), horizon));
        }
    } else {
        Rng rng(seed);
        double t = 0.0;
        s.times.push_back(0.0);
        while (t < horizon) {
            t = std::min(t + rng.uniform(0.5 * r, r), horizon);
            s.times.push_back(t);
        }
    }
    return s;
}

namespace {

// Cache of per-segment input-error suprema for the sliding metric window.
class SupCache {
  public:
    SupCache(const InputHistory& hist, const ReferenceTrajectory& ref)
        : hist_(hist), ref_(ref) {}

    double window_sup(double a, double b) {
        double best = 0.0;
        for (std::size_t i = 0; i < hist_.segment_count(); ++i) {
            const Segment& seg = hist_.segment(i);
            if (seg.end <= a || seg.begin >= b) continue;
            if (seg.begin >= a && seg.end <= b) {
                auto it = full_.find(seg.begin);
                if (it == full_.end()) {
                    it = full_.emplace(seg.begin,
                                       hist_.sup_input_error(ref_, seg.begin, seg.end))
                             .first;
                }
                best = std::max(best, it->second);
            } else {
                best = std::max(best, hist_.sup_input_error(
                                          ref_, std::max(a, seg.begin),
                                          std::min(b, seg.end)));
            }
        }
        return best;
    }

  private:
    const InputHistory& hist_;
    const ReferenceTrajectory& ref_;
    std::map<double, double> full_;
};

}  // namespace

RunResult run_closed_loop(std::shared_ptr<const PlantModel> model,
                          std::shared_ptr<const ReferenceTrajectory> ref,
                          const EnvelopeSet& env, const SamplingSchedule& sched,
                          const SimSetup& setup) {
    RunResult out;
    const double tau = env.tau();
    const double t0 = setup.t0;
    const double t_end = t0 + setup.horizon;
    const double q_limit = kHalfPi - 1e-9;

    if (!(std::fabs(setup.q0) < kHalfPi)) {
        out.status = RunStatus::ConfigError;
        out.message = "initial angle violates the pi/2 constraint";
        return out;
    }
    if (sched.times.empty() || sched.times.front() != 0.0) {
        out.status = RunStatus::ConfigError;
        out.message = "schedule must start at offset 0";
        return out;
    }

    InputHistory hist;
    switch (setup.history) {
        case HistoryKind::Zero:
            hist.add(std::make_unique<ConstantSegment>(t0 - tau, t0, 0.0));
            break;
        case HistoryKind::Constant:
            hist.add(std::make_unique<ConstantSegment>(t0 - tau, t0,
                                                       setup.history_value));
            break;
        case HistoryKind::OnReference:
            hist.add(std::make_unique<CallableSegment>(
                t0 - tau, t0, [ref](double s) { return ref->vd(s); }));
            break;
    }

    std::vector<double> samples;
    for (double T : sched.times) {
        if (T <= setup.horizon + 1e-12) samples.push_back(t0 + T);
    }

    SupCache metric_cache(hist, *ref);
    PlantState state{setup.q0, setup.qdot0};
    double next_record = t0;

    auto record_row = [&](double t, bool prefer_left) {
        TrajectoryRow row;
        row.t = t;
        row.q = state.q;
        row.qdot = state.qdot;
        row.q_d = ref->q(t);
        row.qdot_d = ref->qdot(t);
        row.v = hist.value(t, prefer_left);
        row.v_d = ref->vd(t);
        const ErrorState x = to_error_coords(*model, state, *ref, t);
        row.x1 = x.x1;
        row.x2 = x.x2;
        row.err_metric = std::fabs(row.q - row.q_d) + std::fabs(row.qdot - row.qdot_d) +
                         metric_cache.window_sup(t - tau, t);
        row.lyap = lyapunov_value(env.mu(), x.vec());
        out.traj.rows.push_back(row);
    };

    try {
        for (std::size_t si = 0; si < samples.size(); ++si) {
            const double t_i = samples[si];
            if (t_i >= t_end - 1e-12 && si > 0) break;

            // anything older than one delay plus one gap is unreachable by
            // every remaining delayed lookup and metric window
            hist.drop_before(t_i - tau - 2.0 * sched.max_gap);

            ControllerState ctrl = on_sample(env, t_i, state, hist, *ref);
            if (setup.disable_prediction) {
                ctrl.xi_sample = to_error_coords(*model, state, *ref, t_i).vec();
            }
            ctrl.xi_sample.x1 += setup.fault_xi_offset;
            out.traj.samples.push_back({t_i, ctrl.n_last, ctrl.s_input,
                                        ctrl.xi_sample.x1, ctrl.xi_sample.x2,
                                        ctrl.certified});

            const double t_next =
                (si + 1 < samples.size()) ? std::min(samples[si + 1], t_end) : t_end;
            hist.add(std::make_unique<ControllerSegment>(t_i, std::max(t_next, t_i + 1e-12),
                                                         ref, ctrl));

            // control kinks arrive in the plant one delay later
            std::vector<double> breaks = hist.kinks_in(t_i - tau, t_next - tau);
            for (double& b : breaks) b += tau;
            std::vector<double> cuts;
            cuts.push_back(t_i);
            for (double b : breaks) {
                if (b > t_i && b < t_next) cuts.push_back(b);
            }
            cuts.push_back(t_next);
            std::sort(cuts.begin(), cuts.end());

            for (std::size_t ci = 0; ci + 1 < cuts.size(); ++ci) {
                const double lo = cuts[ci];
                const double hi = cuts[ci + 1];
                if (hi <= lo) continue;
                const int n = std::max(
                    1, static_cast<int>(std::ceil((hi - lo) / setup.h_plant - 1e-12)));
                const double h = (hi - lo) / n;
                for (int k = 0; k < n; ++k) {
                    const double t = lo + h * k;
                    if (t >= next_record - 1e-12) {
                        record_row(t, false);
                        next_record = t + setup.record_dt;
                    }
                    const double tend = (k + 1 == n) ? hi : t + h;
                    const bool last = (k + 1 == n);
                    auto rhs = [&](double s, const PlantState& ps, bool left) {
                        return model->rhs(ps, hist.value(s - tau, left));
                    };
                    const Vec2 k1 = rhs(t, state, false);
                    const Vec2 k2 =
                        rhs(t + 0.5 * h,
                            {state.q + 0.5 * h * k1.x1, state.qdot + 0.5 * h * k1.x2},
                            false);
                    const Vec2 k3 =
                        rhs(t + 0.5 * h,
                            {state.q + 0.5 * h * k2.x1, state.qdot + 0.5 * h * k2.x2},
                            false);
                    const Vec2 k4 = rhs(
                        tend, {state.q + h * k3.x1, state.qdot + h * k3.x2}, last);
                    state.q += (h / 6.0) * (k1.x1 + 2 * k2.x1 + 2 * k3.x1 + k4.x1);
                    state.qdot += (h / 6.0) * (k1.x2 + 2 * k2.x2 + 2 * k3.x2 + k4.x2);
                    if (!std::isfinite(state.q) || !std::isfinite(state.qdot)) {
                        out.status = RunStatus::ConstraintViolation;
                        out.message = "non-finite state at t=" + format_double(tend);
                        return out;
                    }
                    if (std::fabs(state.q) >= q_limit) {
                        out.status = RunStatus::ConstraintViolation;
                        out.message = "angle constraint violated at t=" +
                                      format_double(tend) +
                                      " (q=" + format_double(state.q) + ")";
                        return out;
                    }
                }
            }
            if (t_next >= t_end - 1e-12) break;
        }
        record_row(t_end, true);
    } catch (const EnvelopeError&) {
        throw;  // step-count refusal in certified mode
    } catch (const std::exception& ex) {
        out.status = RunStatus::ConstraintViolation;
        out.message = ex.what();
        return out;
    }

    out.terminal_metric = out.traj.rows.back().err_metric;
    return out;
}

double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& series,
                      double window_start) {
    if (t.size() != series.size()) {
        throw std::invalid_argument("fit_decay_rate: size mismatch");
    }
    double st = 0, sy = 0, stt = 0, sty = 0;
    long long n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < window_start) continue;
        const double y = std::log(std::max(series[i], 1e-14));
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
        ++n;
    }
    if (n < 2) throw std::invalid_argument("fit_decay_rate: empty window");
    const double denom = n * stt - st * st;
    if (denom == 0.0) return 0.0;
    const double slope = (n * sty - st * sy) / denom;
    return -slope;
}

DecayCheck check_lyapunov_decay(const Trajectory& traj, const EnvelopeSet& env,
                                double t0) {
    DecayCheck out;
    const double mu = env.mu();
    const double gamma = env.decay_slack();
    bool first = true;
    for (std::size_t i = 0; i + 1 < traj.rows.size(); ++i) {
        const auto& a = traj.rows[i];
        const auto& b = traj.rows[i + 1];
        if (a.t < t0 + env.tau()) continue;
        const double dt = b.t - a.t;
        if (dt <= 0.0) continue;
        const double vref = std::min(a.lyap, b.lyap);
        const double lhs = (b.lyap - a.lyap) / dt;
        const double allowed = -2.0 * mu * vref + gamma + 1e-4 * std::max(vref, 1.0);
        const double margin = lhs - allowed;
        if (first || margin > out.worst_margin) {
            out.worst_margin = margin;
            out.worst_time = a.t;
            first = false;
        }
        if (margin > 0.0) out.violations += 1;
    }
    return out;
}

BoundCheck check_accuracy_bound(const EnvelopeSet& env, const PredictionInstance& inst) {
    const PlantModel& model = env.model();
    const ReferenceTrajectory& ref = env.ref();
    const double tau = env.tau();
    const double s = inst.x0.norm() + inst.u_sup;

    auto f = [&](double t, const Vec2& x, double u) {
        return error_rhs(model, ref, t, x, u);
    };
    std::vector<Vec2> iterates;
    const Vec2 xn = euler_with_inputs(f, inst.t0, tau, inst.n, inst.x0, inst.u, {},
                                      1e-10, &iterates);
    const Vec2 truth = rk4_truth(
        [&](double t, const Vec2& x, bool) {
            return error_rhs(model, ref, t, x, inst.u(t));
        },
        inst.t0, inst.t0 + tau, inst.x0, {}, 1e-10);

    BoundCheck out;
    out.measured_error = (xn - truth).norm();
    const PosVal A = env.euler_rate(s);
    const PosVal B = env.euler_curvature(s);
    const double tA = (A.lg < 300.0) ? tau * A.value()
                                     : std::numeric_limits<double>::infinity();
    const PosVal egrow = std::isfinite(tA)
                             ? PosVal::expm1_of(tA)
                             : PosVal::exp_of(std::numeric_limits<double>::infinity());
    const PosVal bound = pv(tau) * B * egrow /
                         (pv(2.0 * static_cast<double>(inst.n)) * A);
    out.bound_log10 = bound.lg;
    out.error_ok = out.measured_error == 0.0 ||
                   std::log10(out.measured_error) <= bound.lg;
    const PosVal reach = env.reach_bound(tau, pv(s));
    out.reach = reach.value();
    for (const Vec2& z : iterates) {
        out.max_iterate = std::max(out.max_iterate, z.norm());
    }
    out.iterates_ok = pv(out.max_iterate) <= reach;
    return out;
}

}  // namespace nmespf
