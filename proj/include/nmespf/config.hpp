#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nmespf/envelopes.hpp"
#include "nmespf/simulator.hpp"

namespace nmespf {

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Scenario file: INI-style sections, strict (unknown sections or keys are
// rejected so typos in physical parameters cannot pass silently). Every key
// has a documented default; an empty file is the default scenario.
struct ScenarioConfig {
    // [plant]
    double inertia = 1.0;
    double mass = 0.01;
    double length = 0.5;
    double gravity = 9.81;
    double k1 = 0.02, k2 = 1.0, k3 = 1.0;
    double b1 = 0.02, b2 = 1.0, b3 = 0.02;
    double moment_gain = 0.25;

    // [reference]
    ReferenceSpec reference = ReferenceSpec::sinusoid(0.5, 1.0, 0.0);

    // [controller]
    double mu = 1.0;
    double eps = 4.0;
    StepMode mode = StepMode::Practical;
    long long n_cap = 60000;

    // [delay]
    double tau = 0.05;

    // [schedule]
    SamplingSchedule::Kind schedule_kind = SamplingSchedule::Kind::Uniform;
    double r = 0.05;
    std::uint64_t seed = 1;

    // [sim]
    SimSetup sim;

    // [validation]
    int validation_samples = 10000;
    std::uint64_t validation_seed = 2026;

    // [output]
    std::string out_dir = "out";
};

ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin);

struct Scenario {
    std::shared_ptr<const PlantModel> model;
    std::shared_ptr<const ReferenceTrajectory> ref;
    EnvelopeSet env;
};

Scenario build_scenario(const ScenarioConfig& cfg);

struct ScenarioOutcome {
    RunStatus status = RunStatus::Ok;
    std::string message;
    std::string summary;
};

struct RunOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<StepMode> mode;
};

// Build, validate the envelope inequalities, run the closed loop, and emit
// trajectory.csv, samples.csv, validation.csv and summary.txt into the
// output directory. Every number in the summary is taken from the logged
// records.
ScenarioOutcome run_scenario(const ScenarioConfig& cfg, const RunOverrides& ovr = {});

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
void write_samples_csv(const std::string& path, const Trajectory& traj);

}  // namespace nmespf
