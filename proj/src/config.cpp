#include "nmespf/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace nmespf {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& path, const std::string& raw) {
    const std::string s = trim(raw);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw ConfigError(path + ": not a number: '" + raw + "'");
    }
    return v;
}

long long parse_int(const std::string& path, const std::string& raw) {
    const double v = parse_double(path, raw);
    if (v != std::floor(v)) throw ConfigError(path + ": expected an integer");
    return static_cast<long long>(v);
}

std::vector<double> parse_list(const std::string& path, const std::string& raw) {
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(path, item));
    if (out.empty()) throw ConfigError(path + ": empty list");
    return out;
}

void require_positive(const std::string& path, double v) {
    if (!(v > 0.0)) throw ConfigError(path + ": must be positive (got " +
                                      format_double(v) + ")");
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
    ScenarioConfig cfg;
    std::map<std::string, std::map<std::string, std::string>> kv;
    std::string section = "";
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                              "' outside any section");
        }
        if (!kv[section].emplace(key, value).second) {
            throw ConfigError(origin + ": duplicate key [" + section + "]." + key);
        }
    }

    auto take = [&](const std::string& sec, const std::string& key)
        -> std::optional<std::string> {
        auto s = kv.find(sec);
        if (s == kv.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        std::string v = k->second;
        s->second.erase(k);
        return v;
    };
    auto num = [&](const std::string& sec, const std::string& key, double* dst) {
        if (auto v = take(sec, key)) *dst = parse_double("[" + sec + "]." + key, *v);
    };

    num("plant", "inertia", &cfg.inertia);
    num("plant", "mass", &cfg.mass);
    num("plant", "length", &cfg.length);
    num("plant", "gravity", &cfg.gravity);
    num("plant", "k1", &cfg.k1);
    num("plant", "k2", &cfg.k2);
    num("plant", "k3", &cfg.k3);
    num("plant", "b1", &cfg.b1);
    num("plant", "b2", &cfg.b2);
    num("plant", "b3", &cfg.b3);
    num("plant", "moment_gain", &cfg.moment_gain);

    if (auto kind = take("reference", "kind")) {
        ReferenceSpec spec;
        if (*kind == "constant") {
            spec = ReferenceSpec::constant(0.0);
            if (auto v = take("reference", "value"))
                spec.offset = parse_double("[reference].value", *v);
        } else if (*kind == "sinusoid") {
            double a = 0.5, w = 1.0, off = 0.0;
            if (auto v = take("reference", "amplitude"))
                a = parse_double("[reference].amplitude", *v);
            if (auto v = take("reference", "omega"))
                w = parse_double("[reference].omega", *v);
            if (auto v = take("reference", "offset"))
                off = parse_double("[reference].offset", *v);
            spec = ReferenceSpec::sinusoid(a, w, off);
        } else if (*kind == "sum_of_sinusoids") {
            spec.kind = ReferenceSpec::Kind::SumOfSinusoids;
            auto amps = take("reference", "amplitudes");
            auto oms = take("reference", "omegas");
            if (!amps || !oms) {
                throw ConfigError("[reference]: sum_of_sinusoids needs amplitudes and omegas");
            }
            const auto av = parse_list("[reference].amplitudes", *amps);
            const auto ov = parse_list("[reference].omegas", *oms);
            std::vector<double> ph(av.size(), 0.0);
            if (auto v = take("reference", "phases"))
                ph = parse_list("[reference].phases", *v);
            if (av.size() != ov.size() || av.size() != ph.size()) {
                throw ConfigError("[reference]: amplitudes/omegas/phases length mismatch");
            }
            for (std::size_t i = 0; i < av.size(); ++i)
                spec.terms.push_back({av[i], ov[i], ph[i]});
            if (auto v = take("reference", "offset"))
                spec.offset = parse_double("[reference].offset", *v);
        } else {
            throw ConfigError("[reference].kind: unknown kind '" + *kind +
                              "' (constant | sinusoid | sum_of_sinusoids)");
        }
        cfg.reference = spec;
    } else {
        // allow overriding the default sinusoid's parameters directly
        if (auto v = take("reference", "amplitude"))
            cfg.reference.terms[0].amplitude = parse_double("[reference].amplitude", *v);
        if (auto v = take("reference", "omega"))
            cfg.reference.terms[0].omega = parse_double("[reference].omega", *v);
        if (auto v = take("reference", "offset"))
            cfg.reference.offset = parse_double("[reference].offset", *v);
    }

    num("controller", "mu", &cfg.mu);
    num("controller", "eps", &cfg.eps);
    if (auto v = take("controller", "mode")) {
        if (*v == "practical") cfg.mode = StepMode::Practical;
        else if (*v == "certified") cfg.mode = StepMode::Certified;
        else throw ConfigError("[controller].mode: 'practical' or 'certified', got '" + *v + "'");
    }
    if (auto v = take("controller", "n_cap")) {
        cfg.n_cap = parse_int("[controller].n_cap", *v);
        if (cfg.n_cap < 1) throw ConfigError("[controller].n_cap: must be >= 1");
    }

    num("delay", "tau", &cfg.tau);

    if (auto v = take("schedule", "kind")) {
        if (*v == "uniform") cfg.schedule_kind = SamplingSchedule::Kind::Uniform;
        else if (*v == "jittered") cfg.schedule_kind = SamplingSchedule::Kind::Jittered;
        else throw ConfigError("[schedule].kind: 'uniform' or 'jittered', got '" + *v + "'");
    }
    num("schedule", "r", &cfg.r);
    if (auto v = take("schedule", "seed")) {
        cfg.seed = static_cast<std::uint64_t>(parse_int("[schedule].seed", *v));
    }

    num("sim", "t0", &cfg.sim.t0);
    num("sim", "horizon", &cfg.sim.horizon);
    num("sim", "h_plant", &cfg.sim.h_plant);
    num("sim", "record_dt", &cfg.sim.record_dt);
    num("sim", "q0", &cfg.sim.q0);
    num("sim", "qdot0", &cfg.sim.qdot0);
    if (auto v = take("sim", "history")) {
        if (*v == "zero") cfg.sim.history = HistoryKind::Zero;
        else if (*v == "vd") cfg.sim.history = HistoryKind::OnReference;
        else if (*v == "constant") cfg.sim.history = HistoryKind::Constant;
        else throw ConfigError("[sim].history: 'zero', 'vd' or 'constant', got '" + *v + "'");
    }
    num("sim", "history_value", &cfg.sim.history_value);
    if (auto v = take("sim", "disable_prediction")) {
        cfg.sim.disable_prediction = parse_int("[sim].disable_prediction", *v) != 0;
    }
    num("sim", "fault_xi_offset", &cfg.sim.fault_xi_offset);

    if (auto v = take("validation", "n_samples")) {
        cfg.validation_samples = static_cast<int>(parse_int("[validation].n_samples", *v));
    }
    if (auto v = take("validation", "seed")) {
        cfg.validation_seed =
            static_cast<std::uint64_t>(parse_int("[validation].seed", *v));
    }

    if (auto v = take("output", "dir")) cfg.out_dir = *v;

    for (const auto& [sec, keys] : kv) {
        static const char* known[] = {"plant", "reference", "controller", "delay",
                                      "schedule", "sim", "validation", "output"};
        bool sec_known = false;
        for (const char* k : known) sec_known |= (sec == k);
        if (!sec_known) throw ConfigError(origin + ": unknown section [" + sec + "]");
        if (!keys.empty()) {
            throw ConfigError(origin + ": unknown key [" + sec + "]." +
                              keys.begin()->first);
        }
    }

    // validation of ranges
    require_positive("[delay].tau", cfg.tau);
    require_positive("[schedule].r", cfg.r);
    require_positive("[controller].mu", cfg.mu);
    require_positive("[controller].eps", cfg.eps);
    require_positive("[sim].horizon", cfg.sim.horizon);
    require_positive("[sim].h_plant", cfg.sim.h_plant);
    require_positive("[sim].record_dt", cfg.sim.record_dt);
    if (!(std::fabs(cfg.sim.q0) < kHalfPi)) {
        throw ConfigError("[sim].q0: " + format_double(cfg.sim.q0) +
                          " violates the pi/2 angle constraint");
    }
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

Scenario build_scenario(const ScenarioConfig& cfg) {
    auto model = std::make_shared<const PlantModel>(
        cfg.inertia, cfg.mass, cfg.length, cfg.gravity, cfg.k1, cfg.k2, cfg.k3,
        cfg.b1, cfg.b2, cfg.b3, cfg.moment_gain);
    auto ref = std::make_shared<const ReferenceTrajectory>(
        build_reference(cfg.reference, model, cfg.tau));
    EnvelopeOptions opts;
    opts.mode = cfg.mode;
    opts.step_cap = cfg.n_cap;
    EnvelopeSet env =
        build_envelopes(model, ref, cfg.mu, cfg.eps, cfg.r, cfg.tau, opts);
    return {model, ref, std::move(env)};
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,q,qdot,q_d,qdot_d,v,v_d,x1,x2,err_metric,V\n";
    for (const auto& r : traj.rows) {
        out << format_double(r.t) << ',' << format_double(r.q) << ','
            << format_double(r.qdot) << ',' << format_double(r.q_d) << ','
            << format_double(r.qdot_d) << ',' << format_double(r.v) << ','
            << format_double(r.v_d) << ',' << format_double(r.x1) << ','
            << format_double(r.x2) << ',' << format_double(r.err_metric) << ','
            << format_double(r.lyap) << '\n';
    }
}

void write_samples_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t_i,N_i,s_input,xi1,xi2,certified\n";
    for (const auto& s : traj.samples) {
        out << format_double(s.t) << ',' << s.n_steps << ','
            << format_double(s.s_input) << ',' << format_double(s.xi1) << ','
            << format_double(s.xi2) << ',' << (s.certified ? 1 : 0) << '\n';
    }
}

ScenarioOutcome run_scenario(const ScenarioConfig& cfg_in, const RunOverrides& ovr) {
    ScenarioConfig cfg = cfg_in;
    if (ovr.seed) cfg.seed = *ovr.seed;
    if (ovr.mode) cfg.mode = *ovr.mode;
    if (ovr.out_dir) cfg.out_dir = *ovr.out_dir;

    ScenarioOutcome out;
    std::filesystem::create_directories(cfg.out_dir);

    Scenario sc = [&] {
        try {
            return build_scenario(cfg);
        } catch (const EnvelopeError&) {
            throw;
        } catch (const ConfigError&) {
            throw;
        }
    }();

    const ValidationReport vrep = sc.env.validate(cfg.validation_samples,
                                                  cfg.validation_seed);
    {
        std::ofstream vout(cfg.out_dir + "/validation.csv", std::ios::binary);
        vout << vrep.csv();
    }
    if (!vrep.ok()) {
        out.status = RunStatus::EnvelopeFailure;
        for (const auto& e : vrep.entries) {
            if (e.violations > 0) {
                out.message = "envelope validation failed: " + e.id + " at " + e.witness;
                break;
            }
        }
        return out;
    }

    const SamplingSchedule sched =
        make_schedule(cfg.schedule_kind, cfg.r, cfg.sim.horizon, cfg.seed);
    const RunResult run = run_closed_loop(sc.model, sc.ref, sc.env, sched, cfg.sim);
    if (run.status != RunStatus::Ok) {
        out.status = run.status;
        out.message = run.message;
        return out;
    }

    write_trajectory_csv(cfg.out_dir + "/trajectory.csv", run.traj);
    write_samples_csv(cfg.out_dir + "/samples.csv", run.traj);

    std::vector<double> ts, ms;
    for (const auto& r : run.traj.rows) {
        ts.push_back(r.t);
        ms.push_back(r.err_metric);
    }
    const double window =
        cfg.sim.t0 + 2.0 * cfg.tau + 2.0 * cfg.r;
    double omega_hat = 0.0;
    try {
        omega_hat = fit_decay_rate(ts, ms, window);
    } catch (const std::exception&) {
        omega_hat = 0.0;
    }
    const DecayCheck dec = check_lyapunov_decay(run.traj, sc.env, cfg.sim.t0);

    long long n_max = 0;
    bool all_certified = true;
    for (const auto& s : run.traj.samples) {
        n_max = std::max(n_max, s.n_steps);
        all_certified = all_certified && s.certified;
    }

    std::ostringstream sum;
    sum << "status=ok\n";
    sum << "decay_rate_certified=" << format_double(sc.env.decay_rate()) << "\n";
    sum << "decay_rate_fitted=" << format_double(omega_hat) << "\n";
    sum << "terminal_metric=" << format_double(run.terminal_metric) << "\n";
    sum << "lyapunov_violations=" << dec.violations << "\n";
    sum << "lyapunov_worst_margin=" << format_double(dec.worst_margin) << "\n";
    sum << "constraint=respected\n";
    sum << "samples=" << run.traj.samples.size() << "\n";
    sum << "max_prediction_steps=" << n_max << "\n";
    sum << "all_predictions_certified=" << (all_certified ? 1 : 0) << "\n";
    out.summary = sum.str();
    {
        std::ofstream sout(cfg.out_dir + "/summary.txt", std::ios::binary);
        sout << out.summary;
    }
    return out;
}

}  // namespace nmespf
