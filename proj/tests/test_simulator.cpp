#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmespf/config.hpp"
#include "nmespf/simulator.hpp"

using namespace nmespf;

namespace {

ScenarioConfig short_cfg() {
    ScenarioConfig cfg;
    cfg.n_cap = 1500;
    cfg.sim.horizon = 2.0;
    cfg.sim.record_dt = 2e-3;
    cfg.sim.q0 = 0.4;
    cfg.sim.qdot0 = -0.3;
    return cfg;
}

RunResult run_of(const ScenarioConfig& cfg) {
    Scenario sc = build_scenario(cfg);
    const SamplingSchedule sched =
        make_schedule(cfg.schedule_kind, cfg.r, cfg.sim.horizon, cfg.seed);
    return run_closed_loop(sc.model, sc.ref, sc.env, sched, cfg.sim);
}

}  // namespace

TEST_CASE("uniform schedules hit exact multiples and the endpoint") {
    const SamplingSchedule s =
        make_schedule(SamplingSchedule::Kind::Uniform, 0.05, 0.2, 1);
    REQUIRE(s.times.size() == 5);
    CHECK(s.times[0] == 0.0);
    CHECK(s.times[1] == 0.05);
    CHECK(s.times[2] == 0.10);
    CHECK(s.times[3] == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(s.times[4] == 0.2);
}

TEST_CASE("jittered schedules respect the gap bounds and the seed") {
    const SamplingSchedule a =
        make_schedule(SamplingSchedule::Kind::Jittered, 0.05, 5.0, 42);
    const SamplingSchedule b =
        make_schedule(SamplingSchedule::Kind::Jittered, 0.05, 5.0, 42);
    const SamplingSchedule c =
        make_schedule(SamplingSchedule::Kind::Jittered, 0.05, 5.0, 43);
    REQUIRE(a.times.size() == b.times.size());
    for (std::size_t i = 0; i < a.times.size(); ++i) REQUIRE(a.times[i] == b.times[i]);
    bool differs = (a.times.size() != c.times.size());
    for (std::size_t i = 0; !differs && i < std::min(a.times.size(), c.times.size()); ++i) {
        differs = a.times[i] != c.times[i];
    }
    CHECK(differs);
    CHECK(a.times.front() == 0.0);
    CHECK(a.times.back() >= 5.0 - 1e-12);
    for (std::size_t i = 1; i < a.times.size(); ++i) {
        const double gap = a.times[i] - a.times[i - 1];
        REQUIRE(gap > 0.0);
        REQUIRE(gap <= 0.05 + 1e-15);
    }
}

TEST_CASE("decay-rate fit recovers synthetic rates") {
    std::vector<double> t, y_exp, y_const;
    for (int i = 0; i <= 1000; ++i) {
        t.push_back(0.01 * i);
        y_exp.push_back(3.0 * std::exp(-2.0 * 0.01 * i));
        y_const.push_back(0.7);
    }
    CHECK(fit_decay_rate(t, y_exp, 0.0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit_decay_rate(t, y_const, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_decay_rate(t, y_exp, 100.0), std::invalid_argument);
}

TEST_CASE("an on-reference start stays on the reference") {
    ScenarioConfig cfg = short_cfg();
    cfg.sim.q0 = 0.0;
    cfg.sim.qdot0 = 0.5;
    cfg.sim.history = HistoryKind::OnReference;
    const RunResult rr = run_of(cfg);
    REQUIRE(rr.status == RunStatus::Ok);
    double worst = 0.0;
    for (const auto& r : rr.traj.rows) worst = std::max(worst, r.err_metric);
    CHECK(worst < 1e-9);
}

TEST_CASE("halving the plant step barely moves the endpoint") {
    ScenarioConfig cfg = short_cfg();
    cfg.sim.horizon = 1.0;
    const RunResult coarse = run_of(cfg);
    cfg.sim.h_plant = 5e-5;
    const RunResult fine = run_of(cfg);
    REQUIRE(coarse.status == RunStatus::Ok);
    REQUIRE(fine.status == RunStatus::Ok);
    const auto& a = coarse.traj.rows.back();
    const auto& b = fine.traj.rows.back();
    REQUIRE(a.t == b.t);
    CHECK(std::fabs(a.q - b.q) < 1e-8);
    CHECK(std::fabs(a.qdot - b.qdot) < 1e-8);
}

TEST_CASE("recorded error coordinates match the transform row by row") {
    ScenarioConfig cfg = short_cfg();
    const RunResult rr = run_of(cfg);
    REQUIRE(rr.status == RunStatus::Ok);
    Scenario sc = build_scenario(cfg);
    double m1 = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        m1 = std::max(m1, std::fabs(sc.ref->zeta(8.0 * i / 4000.0).x2));
    }
    m1 *= 2.0;
    for (const auto& r : rr.traj.rows) {
        const ErrorState x =
            to_error_coords(*sc.model, {r.q, r.qdot}, *sc.ref, r.t);
        REQUIRE(std::fabs(x.x1 - r.x1) <= 1e-12 * (1.0 + std::fabs(x.x1)));
        REQUIRE(std::fabs(x.x2 - r.x2) <= 1e-12 * (1.0 + std::fabs(x.x2)));
        // global relations between physical and transformed errors
        REQUIRE(std::fabs(r.q - r.q_d) <= std::fabs(r.x1) + 1e-12);
        REQUIRE(std::fabs(r.qdot - r.qdot_d) <=
                std::fabs(r.x2) + m1 * std::fabs(r.x1) + 1e-9);
        // the metric dominates its first two terms
        REQUIRE(r.err_metric >=
                std::fabs(r.q - r.q_d) + std::fabs(r.qdot - r.qdot_d) - 1e-15);
        REQUIRE(std::fabs(r.q) < kHalfPi);
    }
    // the first recorded metric reproduces its definition
    const auto& first = rr.traj.rows.front();
    Scenario sc2 = build_scenario(cfg);
    double sup_vd = 0.0;
    for (int i = 0; i <= 200; ++i) {
        sup_vd = std::max(sup_vd, std::fabs(sc2.ref->vd(-cfg.tau + cfg.tau * i / 200.0)));
    }
    CHECK(first.err_metric ==
          doctest::Approx(std::fabs(first.q - first.q_d) +
                          std::fabs(first.qdot - first.qdot_d) + sup_vd)
              .epsilon(1e-6));
}

TEST_CASE("running error level stops growing once the loop is closed") {
    ScenarioConfig cfg = short_cfg();
    cfg.sim.horizon = 4.0;
    cfg.sim.q0 = 0.8;
    cfg.sim.qdot0 = 0.6;
    const RunResult rr = run_of(cfg);
    REQUIRE(rr.status == RunStatus::Ok);
    const double head_end = cfg.sim.t0 + cfg.tau + cfg.r;
    double head = 0.0, tail = 0.0;
    for (const auto& r : rr.traj.rows) {
        const double level = Vec2{r.x1, r.x2}.norm() +
                             (r.err_metric - std::fabs(r.q - r.q_d) -
                              std::fabs(r.qdot - r.qdot_d));
        if (r.t <= head_end) head = std::max(head, level);
        else tail = std::max(tail, level);
    }
    CHECK(tail <= head * (1.0 + 1e-9));
}

TEST_CASE("faulted predictor states break the decay certificate, clean runs do not") {
    ScenarioConfig cfg = short_cfg();
    cfg.sim.horizon = 6.0;
    cfg.sim.q0 = 0.5;
    cfg.sim.qdot0 = 0.5;
    Scenario sc = build_scenario(cfg);
    const SamplingSchedule sched =
        make_schedule(cfg.schedule_kind, cfg.r, cfg.sim.horizon, cfg.seed);

    const RunResult clean = run_closed_loop(sc.model, sc.ref, sc.env, sched, cfg.sim);
    REQUIRE(clean.status == RunStatus::Ok);
    CHECK(check_lyapunov_decay(clean.traj, sc.env, cfg.sim.t0).violations == 0);

    SimSetup faulted = cfg.sim;
    faulted.fault_xi_offset = 1.0;
    const RunResult bad = run_closed_loop(sc.model, sc.ref, sc.env, sched, faulted);
    REQUIRE(bad.status == RunStatus::Ok);
    CHECK(check_lyapunov_decay(bad.traj, sc.env, cfg.sim.t0).violations >= 1);
}

TEST_CASE("violent faults abort with a constraint violation") {
    ScenarioConfig cfg = short_cfg();
    cfg.sim.fault_xi_offset = 80.0;
    const RunResult rr = run_of(cfg);
    CHECK(rr.status == RunStatus::ConstraintViolation);
    CHECK_FALSE(rr.message.empty());
}

TEST_CASE("skipping the delay compensation costs tracking accuracy at large delays") {
    ScenarioConfig cfg;
    cfg.tau = 0.4;
    cfg.r = 0.05;
    cfg.n_cap = 2500;
    cfg.sim.horizon = 10.0;
    cfg.sim.record_dt = 5e-3;
    cfg.sim.q0 = 0.8;
    cfg.sim.qdot0 = 0.5;
    Scenario sc = build_scenario(cfg);
    const SamplingSchedule sched =
        make_schedule(cfg.schedule_kind, cfg.r, cfg.sim.horizon, cfg.seed);
    const RunResult comp = run_closed_loop(sc.model, sc.ref, sc.env, sched, cfg.sim);
    SimSetup ablated = cfg.sim;
    ablated.disable_prediction = true;
    const RunResult raw = run_closed_loop(sc.model, sc.ref, sc.env, sched, ablated);
    REQUIRE(comp.status == RunStatus::Ok);
    // the uncompensated loop may or may not survive; if it does it tracks worse
    if (raw.status == RunStatus::Ok) {
        CHECK(comp.terminal_metric < raw.terminal_metric);
    }
    CHECK(comp.terminal_metric < 1e-3);
}

TEST_CASE("accuracy certificate on a trivial and a scaled instance") {
    auto model = std::make_shared<const PlantModel>(1.0, 2e-4, 0.5, 9.81, 0.001, 1.0,
                                                    1.0, 0.001, 1.0, 0.001, 0.25);
    auto ref = std::make_shared<const ReferenceTrajectory>(
        build_reference(ReferenceSpec::constant(0.0), model, 0.05));
    const EnvelopeSet env = build_envelopes(model, ref, 0.5, 0.05, 0.05, 0.05);

    PredictionInstance trivial;
    trivial.x0 = {0.0, 0.0};
    trivial.u = [](double) { return 0.0; };
    trivial.u_sup = 0.0;
    trivial.n = 8;
    const BoundCheck t = check_accuracy_bound(env, trivial);
    CHECK(t.measured_error <= 1e-13);
    CHECK(t.error_ok);
    CHECK(t.iterates_ok);

    PredictionInstance inst;
    inst.x0 = {0.3, -0.2};
    inst.u = [](double s) { return 0.2 * std::cos(2.0 * s); };
    inst.u_sup = 0.2;
    inst.n = 64;
    const BoundCheck b1 = check_accuracy_bound(env, inst);
    inst.n = 128;
    const BoundCheck b2 = check_accuracy_bound(env, inst);
    CHECK(b1.error_ok);
    CHECK(b2.error_ok);
    // the first-order bound halves exactly when the step count doubles
    CHECK(b1.bound_log10 - b2.bound_log10 ==
          doctest::Approx(std::log10(2.0)).epsilon(1e-9));
}
