#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nmespf/config.hpp"

using namespace nmespf;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("an empty file is the documented default scenario") {
    const ScenarioConfig cfg = parse_config_text("", "test");
    CHECK(cfg.tau == 0.05);
    CHECK(cfg.r == 0.05);
    CHECK(cfg.mu == 1.0);
    CHECK(cfg.mode == StepMode::Practical);
    CHECK(cfg.reference.terms.size() == 1);
    CHECK(cfg.reference.terms[0].amplitude == 0.5);
}

TEST_CASE("a minimal file overrides only what it names") {
    const ScenarioConfig cfg = parse_config_text(
        "[delay]\ntau = 0.1\n[controller]\nmu = 0.7\n", "test");
    CHECK(cfg.tau == 0.1);
    CHECK(cfg.mu == 0.7);
    CHECK(cfg.r == 0.05);  // untouched default
}

TEST_CASE("negative delay is rejected by key path") {
    try {
        parse_config_text("[delay]\ntau = -0.1\n", "test");
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("[delay].tau") != std::string::npos);
    }
}

TEST_CASE("initial angles outside the constraint are rejected with the reason") {
    try {
        parse_config_text("[sim]\nq0 = 1.6\n", "test");
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[sim].q0") != std::string::npos);
        CHECK(msg.find("pi/2") != std::string::npos);
    }
}

TEST_CASE("unknown keys and sections are hard errors") {
    CHECK_THROWS_AS(parse_config_text("[sim]\nqq0 = 0.3\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[simulation]\nq0 = 0.3\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[delay]\ntau = 0.05\ntau = 0.06\n", "test"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("tau = 0.05\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[delay]\ntau 0.05\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[delay]\ntau = abc\n", "test"), ConfigError);
}

TEST_CASE("an over-amplitude reference is rejected at build") {
    const ScenarioConfig cfg = parse_config_text(
        "[reference]\nkind = sinusoid\namplitude = 1.6\n", "test");
    CHECK_THROWS_AS(build_scenario(cfg), std::invalid_argument);
}

TEST_CASE("sum-of-sinusoids parsing") {
    const ScenarioConfig cfg = parse_config_text(
        "[reference]\nkind = sum_of_sinusoids\namplitudes = 0.3, 0.1\n"
        "omegas = 1.0, 2.5\nphases = 0, 0.7\noffset = 0.05\n",
        "test");
    REQUIRE(cfg.reference.terms.size() == 2);
    CHECK(cfg.reference.terms[1].omega == 2.5);
    CHECK(cfg.reference.offset == 0.05);
    CHECK_THROWS_AS(parse_config_text("[reference]\nkind = sum_of_sinusoids\n"
                                      "amplitudes = 0.3\nomegas = 1.0, 2.0\n",
                                      "test"),
                    ConfigError);
}

TEST_CASE("modes and caps") {
    CHECK(parse_config_text("[controller]\nmode = certified\n", "test").mode ==
          StepMode::Certified);
    CHECK_THROWS_AS(parse_config_text("[controller]\nmode = turbo\n", "test"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("[controller]\nn_cap = 0\n", "test"),
                    ConfigError);
}

TEST_CASE("comments and blank lines are tolerated") {
    const ScenarioConfig cfg = parse_config_text(
        "# scenario\n\n[delay]\ntau = 0.07 ; inline\n", "test");
    CHECK(cfg.tau == 0.07);
}

TEST_CASE("infeasible envelope construction surfaces as an envelope error") {
    ScenarioConfig cfg;
    cfg.k3 = 1e5;
    cfg.eps = 50.0;
    cfg.reference = ReferenceSpec::constant(0.0);
    CHECK_THROWS_AS(build_scenario(cfg), EnvelopeError);
}

TEST_CASE("identical configs and seeds produce byte-identical outputs") {
    ScenarioConfig cfg;
    cfg.n_cap = 800;
    cfg.schedule_kind = SamplingSchedule::Kind::Jittered;
    cfg.seed = 3;
    cfg.sim.horizon = 1.5;
    cfg.sim.record_dt = 0.01;
    cfg.sim.q0 = 0.4;
    cfg.validation_samples = 500;

    const std::string dir_a = "test_out/det_a";
    const std::string dir_b = "test_out/det_b";
    RunOverrides a, b;
    a.out_dir = dir_a;
    b.out_dir = dir_b;
    const ScenarioOutcome ra = run_scenario(cfg, a);
    const ScenarioOutcome rb = run_scenario(cfg, b);
    REQUIRE(ra.status == RunStatus::Ok);
    REQUIRE(rb.status == RunStatus::Ok);
    CHECK(slurp(dir_a + "/trajectory.csv") == slurp(dir_b + "/trajectory.csv"));
    CHECK(slurp(dir_a + "/samples.csv") == slurp(dir_b + "/samples.csv"));
    CHECK(slurp(dir_a + "/summary.txt") == slurp(dir_b + "/summary.txt"));
    CHECK(slurp(dir_a + "/validation.csv") == slurp(dir_b + "/validation.csv"));
    std::filesystem::remove_all("test_out");
}

TEST_CASE("scenario outcome carries the fitted decay rate") {
    ScenarioConfig cfg;
    cfg.n_cap = 800;
    cfg.sim.horizon = 1.0;
    cfg.sim.record_dt = 0.01;
    cfg.sim.q0 = 0.0;
    cfg.sim.qdot0 = 0.5;
    cfg.sim.history = HistoryKind::OnReference;
    cfg.validation_samples = 300;
    RunOverrides ovr;
    ovr.out_dir = "test_out/onref";
    const ScenarioOutcome out = run_scenario(cfg, ovr);
    REQUIRE(out.status == RunStatus::Ok);
    CHECK(out.summary.find("terminal_metric=") != std::string::npos);
    CHECK(out.summary.find("decay_rate_certified=") != std::string::npos);
    std::filesystem::remove_all("test_out");
}
