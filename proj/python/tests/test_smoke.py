import math

import pytest

import nmespf

GENTLE = """
[plant]
mass = 2e-4
length = 0.5
k1 = 0.001
b1 = 0.001
b3 = 0.001
[reference]
kind = constant
value = 0.0
[controller]
mu = 0.5
eps = 0.05
mode = certified
[delay]
tau = 0.01
[schedule]
r = 0.01
"""


def test_default_scenario_constants():
    sc = nmespf.Scenario()
    c = sc.constants()
    assert c["mu"] == 1.0
    assert c["tau"] == 0.05
    assert abs(c["lyap_condition"] - 6.854102) < 1e-5
    assert 0.0 < c["decay_rate"] < c["mu"] / 2.0


def test_plant_terms_at_origin():
    sc = nmespf.Scenario()
    t = sc.plant_terms(0.0, 0.0)
    assert t["potential"] == pytest.approx(0.0, abs=1e-15)
    assert t["potential_slope"] == pytest.approx(0.0, abs=1e-15)
    assert t["damping"] == pytest.approx(0.0, abs=1e-15)
    assert t["input_gain"] == pytest.approx(0.25)


def test_transform_round_trip():
    sc = nmespf.Scenario()
    q, qdot = sc.from_error(1.3, -0.7, 0.4)
    assert abs(q) < math.pi / 2
    x1, x2 = sc.to_error(q, qdot, 0.4)
    assert x1 == pytest.approx(1.3, abs=1e-12)
    assert x2 == pytest.approx(-0.7, abs=1e-12)


def test_error_field_vanishes_on_reference():
    sc = nmespf.Scenario()
    for t in (0.0, 1.1, 4.0):
        f1, f2 = sc.error_rhs(t, 0.0, 0.0, 0.0)
        assert abs(f1) < 1e-12
        assert abs(f2) < 1e-12


def test_certified_prediction_meets_target():
    sc = nmespf.Scenario(GENTLE)
    out = sc.predict(0.2, -0.1, u_amp=0.1)
    assert out["certified"]
    assert out["n_used"] >= 1
    assert out["accuracy_target"] > 0.0


def test_prediction_on_reference_is_zero():
    sc = nmespf.Scenario(GENTLE)
    out = sc.predict(0.0, 0.0, u_amp=0.0)
    assert out["n_used"] == 1
    assert abs(out["x_pred"][0]) < 1e-12
    assert abs(out["x_pred"][1]) < 1e-12


def test_closed_loop_run_converges():
    sc = nmespf.Scenario("[controller]\nn_cap = 800\n")
    out = sc.run(q0=0.4, qdot0=-0.3, horizon=3.0)
    assert out["status"] == 0
    assert out["terminal_metric"] < out["err_metric"][0]
    assert out["lyapunov_violations"] == 0
    assert max(abs(q) for q in out["q"]) < math.pi / 2


def test_strict_config_rejects_unknown_keys():
    with pytest.raises(nmespf.ConfigError):
        nmespf.Scenario("[sim]\nqq0 = 1\n")


def test_fit_decay_rate_on_synthetic_series():
    t = [0.01 * i for i in range(500)]
    y = [2.0 * math.exp(-1.5 * ti) for ti in t]
    assert nmespf.fit_decay_rate(t, y, 0.0) == pytest.approx(1.5, abs=1e-6)
