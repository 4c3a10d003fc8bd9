#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmespf/plant.hpp"

using namespace nmespf;

namespace {

PlantModel ones() {
    return PlantModel(1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1.0);
}

PlantModel desk() {
    return PlantModel(1.0, 0.01, 0.5, 9.81, 0.02, 1.0, 1.0, 0.02, 1.0, 0.02, 0.25);
}

}  // namespace

TEST_CASE("all terms vanish at the origin") {
    const PlantModel m = desk();
    const PlantTerms t = m.terms(0.0, 0.0);
    CHECK(t.potential == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(t.potential_slope == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(t.damping == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(t.input_gain == doctest::Approx(0.25));
}

TEST_CASE("potential matches its closed form at pi/4 with unit parameters") {
    const PlantModel m = ones();
    const double q = M_PI / 4.0;
    const double expected = (1.0 - std::cos(q)) +
                            std::exp(-q) * (std::exp(q) - 1.0 - q) -
                            std::log(std::cos(q));
    CHECK(m.potential(q) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("potential slope matches a centered difference of the potential") {
    const PlantModel m = desk();
    const double h = 1e-6;
    for (double q : {-1.2, -0.7, -0.2, 0.0, 0.3, 0.9, 1.4}) {
        const double fd = (m.potential(q + h) - m.potential(q - h)) / (2.0 * h);
        CHECK(m.potential_slope(q) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("potential curvature matches a centered difference of the slope") {
    const PlantModel m = desk();
    const double h = 1e-6;
    for (double q : {-1.1, -0.4, 0.2, 0.8, 1.3}) {
        const double fd = (m.potential_slope(q + h) - m.potential_slope(q - h)) / (2.0 * h);
        CHECK(m.potential_curv(q) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("equilibrium and pure input response") {
    const PlantModel m = desk();
    const Vec2 eq = m.rhs({0.0, 0.0}, 0.0);
    CHECK(eq.x1 == 0.0);
    CHECK(eq.x2 == 0.0);
    const Vec2 pushed = m.rhs({0.0, 0.0}, 1.0);
    CHECK(pushed.x2 == doctest::Approx(m.input_gain(0.0, 0.0)));
}

TEST_CASE("angle domain is enforced") {
    const PlantModel m = desk();
    CHECK_THROWS_AS(m.potential(kHalfPi), std::domain_error);
    CHECK_THROWS_AS(m.rhs({1.5708, 0.0}, 0.0), std::domain_error);
    CHECK_THROWS_AS(m.rhs({-2.0, 0.0}, 0.0), std::domain_error);
    CHECK_NOTHROW(m.rhs({1.5707, 0.0}, 0.0));
}

TEST_CASE("parameters must be positive") {
    CHECK_THROWS_AS(PlantModel(0.0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(PlantModel(1, 1, 1, 1, -1, 1, 1, 1, 1, 1, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(PlantModel(1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0.0),
                    std::invalid_argument);
}

TEST_CASE("damping dissipates in both directions") {
    const PlantModel m = desk();
    for (double v : {-8.0, -1.0, -1e-3, 0.0, 1e-3, 2.0, 10.0}) {
        CHECK(v * m.damping(v) >= 0.0);
    }
}

TEST_CASE("sampled bounds cover a state-dependent gain") {
    const PlantModel m(1.0, 0.01, 0.5, 9.81, 0.02, 1.0, 1.0, 0.02, 1.0, 0.02,
                       [](double q, double qd) {
                           return 0.3 + 0.1 * std::cos(q) + 0.02 * std::tanh(qd);
                       });
    CHECK(m.gain_sup() >= 0.42);
    CHECK(m.gain_inf() <= 0.28);
    CHECK(m.gain_inf() > 0.0);
    for (double q : {-1.0, 0.0, 1.0}) {
        for (double qd : {-3.0, 0.0, 3.0}) {
            const double g = m.input_gain(q, qd);
            CHECK(g <= m.gain_sup());
            CHECK(g >= m.gain_inf());
        }
    }
}
