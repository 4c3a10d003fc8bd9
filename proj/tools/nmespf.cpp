#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "nmespf/config.hpp"
#include "nmespf/predictor.hpp"
#include "nmespf/rk4.hpp"

namespace {

using namespace nmespf;

int status_code(RunStatus s) { return static_cast<int>(s); }

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    std::string mode;
};

RunOverrides overrides_of(const CommonArgs& a) {
    RunOverrides ovr;
    if (!a.out_dir.empty()) ovr.out_dir = a.out_dir;
    if (a.seed >= 0) ovr.seed = static_cast<std::uint64_t>(a.seed);
    if (a.mode == "practical") ovr.mode = StepMode::Practical;
    if (a.mode == "certified") ovr.mode = StepMode::Certified;
    return ovr;
}

ScenarioConfig load_or_default(const std::string& path) {
    if (path.empty()) return ScenarioConfig{};
    return load_config(path);
}

int cmd_run(const CommonArgs& args) {
    const ScenarioConfig cfg = load_or_default(args.config_path);
    const ScenarioOutcome out = run_scenario(cfg, overrides_of(args));
    if (out.status == RunStatus::Ok) {
        std::cout << out.summary;
    } else {
        std::cerr << "error: " << out.message << "\n";
    }
    return status_code(out.status);
}

int cmd_validate(const CommonArgs& args, int samples) {
    ScenarioConfig cfg = load_or_default(args.config_path);
    if (samples > 0) cfg.validation_samples = samples;
    const RunOverrides ovr = overrides_of(args);
    if (ovr.mode) cfg.mode = *ovr.mode;
    const Scenario sc = build_scenario(cfg);
    const ValidationReport rep = sc.env.validate(cfg.validation_samples,
                                                 cfg.validation_seed);
    std::cout << rep.text();
    std::cout << "decay_rate=" << format_double(sc.env.decay_rate()) << "\n";
    if (!args.out_dir.empty()) {
        std::filesystem::create_directories(args.out_dir);
        std::ofstream out(args.out_dir + "/validation.csv", std::ios::binary);
        out << rep.csv();
    }
    return rep.ok() ? 0 : status_code(RunStatus::EnvelopeFailure);
}

int cmd_predict_demo(const CommonArgs& args, double x1, double x2, double u0) {
    ScenarioConfig cfg = load_or_default(args.config_path);
    const RunOverrides ovr = overrides_of(args);
    if (ovr.mode) cfg.mode = *ovr.mode;
    const Scenario sc = build_scenario(cfg);
    const double tau = sc.env.tau();
    const double t0 = cfg.sim.t0;
    const Vec2 x0{x1, x2};
    auto u = [u0, t0](double s) { return u0 * std::cos(2.0 * (s - t0)); };

    InputHistory hist;
    hist.add(std::make_unique<CallableSegment>(
        t0 - tau, t0,
        [&sc, u, tau](double s) { return sc.ref->vd(s) + u(s + tau); }));

    const PredictionResult pr = predict(sc.env, t0, x0, hist);
    const Vec2 truth = rk4_truth(
        [&](double t, const Vec2& x, bool) {
            return error_rhs(*sc.model, *sc.ref, t, x, u(t));
        },
        t0, t0 + tau, x0, {}, 1e-12);
    const double err = (pr.x_pred - truth).norm();

    const double s = pr.s_input;
    const PosVal A = sc.env.euler_rate(s);
    const PosVal B = sc.env.euler_curvature(s);
    const double tA = (A.lg < 300.0) ? tau * A.value()
                                     : std::numeric_limits<double>::infinity();
    const PosVal egrow = std::isfinite(tA)
                             ? PosVal::expm1_of(tA)
                             : PosVal::exp_of(std::numeric_limits<double>::infinity());
    const PosVal bound =
        pv(tau) * B * egrow / (pv(2.0 * static_cast<double>(pr.n_used)) * A);

    std::cout << "s_input=" << format_double(s) << "\n"
              << "N_used=" << pr.n_used << (pr.certified ? " (certified)" : " (capped)")
              << "\n"
              << "x_pred=(" << format_double(pr.x_pred.x1) << ","
              << format_double(pr.x_pred.x2) << ")\n"
              << "truth=(" << format_double(truth.x1) << ","
              << format_double(truth.x2) << ")\n"
              << "error=" << format_double(err) << "\n"
              << "first_order_bound=" << bound.str() << "\n"
              << "accuracy_target=" << sc.env.prediction_accuracy(s).str() << "\n";
    const bool ok = err == 0.0 || std::log10(err) <= bound.lg;
    std::cout << "bound_holds=" << (ok ? 1 : 0) << "\n";
    return ok ? 0 : 1;
}

struct SweepJob {
    std::string name;
    ScenarioConfig cfg;
    ScenarioOutcome outcome;
};

int cmd_sweep(const CommonArgs& args, int seeds, const std::string& grid,
              double q0_max, double qdot0_max, int jobs) {
    const ScenarioConfig base = load_or_default(args.config_path);
    const std::string out_root = args.out_dir.empty() ? base.out_dir : args.out_dir;

    std::vector<SweepJob> work;
    if (seeds > 0) {
        for (int i = 0; i < seeds; ++i) {
            SweepJob j;
            j.name = "seed_" + std::to_string(base.seed + i);
            j.cfg = base;
            j.cfg.schedule_kind = SamplingSchedule::Kind::Jittered;
            j.cfg.seed = base.seed + i;
            j.cfg.out_dir = out_root + "/" + j.name;
            work.push_back(std::move(j));
        }
    } else {
        int nq = 3, nv = 3;
        if (!grid.empty()) {
            const auto x = grid.find('x');
            if (x == std::string::npos) {
                std::cerr << "error: --grid expects KxM\n";
                return 2;
            }
            nq = std::stoi(grid.substr(0, x));
            nv = std::stoi(grid.substr(x + 1));
        }
        for (int i = 0; i < nq; ++i) {
            for (int j = 0; j < nv; ++j) {
                SweepJob job;
                job.name = "ic_" + std::to_string(i) + "_" + std::to_string(j);
                job.cfg = base;
                job.cfg.sim.q0 = (nq == 1) ? 0.0 : -q0_max + 2.0 * q0_max * i / (nq - 1);
                job.cfg.sim.qdot0 =
                    (nv == 1) ? 0.0 : -qdot0_max + 2.0 * qdot0_max * j / (nv - 1);
                job.cfg.out_dir = out_root + "/" + job.name;
                work.push_back(std::move(job));
            }
        }
    }

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= work.size()) return;
            try {
                work[i].outcome = run_scenario(work[i].cfg, {});
            } catch (const std::exception& ex) {
                work[i].outcome.status = RunStatus::ConfigError;
                work[i].outcome.message = ex.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    int converged = 0;
    std::ostringstream agg;
    agg << "name,status,message\n";
    for (const auto& j : work) {
        const bool ok = j.outcome.status == RunStatus::Ok;
        converged += ok ? 1 : 0;
        agg << j.name << ',' << status_code(j.outcome.status) << ",\""
            << j.outcome.message << "\"\n";
    }
    std::filesystem::create_directories(out_root);
    {
        std::ofstream out(out_root + "/sweep_summary.csv", std::ios::binary);
        out << agg.str();
    }
    std::cout << "scenarios=" << work.size() << " converged=" << converged << "\n";
    return converged == static_cast<int>(work.size())
               ? 0
               : status_code(RunStatus::ConstraintViolation);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictor-feedback tracking toolkit for input-delayed joint models"};
    app.require_subcommand(1);

    CommonArgs args;
    int samples = 0;
    double x1 = 0.3, x2 = -0.2, u0 = 0.2;
    int seeds = 0, jobs = static_cast<int>(std::thread::hardware_concurrency());
    std::string grid;
    double q0_max = 1.0, qdot0_max = 1.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "scenario config file");
        cmd->add_option("--out", args.out_dir, "output directory override");
        cmd->add_option("--seed", args.seed, "schedule seed override");
        cmd->add_option("--mode", args.mode, "step-count mode override")
            ->check(CLI::IsMember({"practical", "certified"}));
    };

    CLI::App* run = app.add_subcommand("run", "run one closed-loop scenario");
    add_common(run);

    CLI::App* val = app.add_subcommand("validate-envelopes",
                                       "sampled verification of the envelope inequalities");
    add_common(val);
    val->add_option("--samples", samples, "samples per inequality");

    CLI::App* dem = app.add_subcommand("predict-demo",
                                       "one delay-ahead prediction with its error bound");
    add_common(dem);
    dem->add_option("--x1", x1, "initial error, first component");
    dem->add_option("--x2", x2, "initial error, second component");
    dem->add_option("--u", u0, "input error amplitude");

    CLI::App* swp = app.add_subcommand("sweep",
                                       "schedule-seed or initial-condition sweep");
    add_common(swp);
    swp->add_option("--seeds", seeds, "number of jittered schedule seeds");
    swp->add_option("--grid", grid, "initial-condition grid KxM");
    swp->add_option("--q0-max", q0_max, "grid half-width in q0");
    swp->add_option("--qdot0-max", qdot0_max, "grid half-width in qdot0");
    swp->add_option("--jobs", jobs, "worker pool size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(args);
        if (val->parsed()) return cmd_validate(args, samples);
        if (dem->parsed()) return cmd_predict_demo(args, x1, x2, u0);
        if (swp->parsed()) return cmd_sweep(args, seeds, grid, q0_max, qdot0_max, jobs);
    } catch (const nmespf::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const nmespf::EnvelopeError& ex) {
        std::cerr << "envelope error: " << ex.what() << "\n";
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 4;
    }
    return 0;
}
