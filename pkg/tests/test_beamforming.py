import numpy as np
import pytest

from cmcc.beamforming import (
    array_covariance,
    beamforming_constraints,
    beampattern,
    make_problem,
    output_power,
    steering,
)
from cmcc.config import parse_config
from cmcc.errors import ConfigurationError
from cmcc.experiments import run_beamforming

BEAM = {"look_deg": 0.0, "interferer_deg": [-25.0, 30.0, 60.0], "snr_db": 0.0, "inr_db": 10.0,
        "sensor_noise": 1.0, "look_constraint": True}  # fmt: skip


def test_steering_broadside_and_shape():
    np.testing.assert_allclose(steering(0.0, 7), np.ones(7))
    assert steering([0, 10, 20], 5).shape == (3, 5)


def test_covariance_matches_snapshots():
    rng = np.random.default_rng(0)
    from cmcc.noise import GaussianNoise

    p = make_problem(7, BEAM, GaussianNoise(1.0))
    X, _ = p.generate(rng, rng, 200_000)
    emp = X.T @ X / len(X)
    assert np.max(np.abs(emp - p.R)) < 0.15
    np.testing.assert_allclose(p.R, array_covariance(7, p.doas_deg, p.powers, 1.0))


def test_constraints():
    cs = beamforming_constraints(7)
    assert cs.K == 4
    W = cs.Q + cs.P @ np.random.default_rng(1).standard_normal(7)
    np.testing.assert_allclose(W, W[::-1], atol=1e-12)
    assert np.isclose(steering(0, 7) @ W, 1.0)
    pure = beamforming_constraints(7, look_constraint=False)
    assert pure.K == 3 and np.allclose(pure.Q, 0)


def test_pattern_normalization_and_degenerate():
    a = steering(0.0, 7)
    bp = beampattern(a / (a @ a), [-30, 0, 30])
    assert bp.at(0.0) == pytest.approx(0.0, abs=1e-12) and not bp.degenerate
    assert beampattern(np.zeros(7)).degenerate
    with pytest.raises(ConfigurationError):
        beampattern(a, [100.0])


def test_optimum_places_nulls():
    from cmcc.noise import GaussianNoise

    p = make_problem(7, BEAM, GaussianNoise(1.0))
    bp = beampattern(p.W_ref)
    for ang in (-25, 30, 60):
        assert bp.at(ang) < -15
    assert output_power(p.W_ref, p.R) <= output_power(p.cs.Q, p.R)


def _cfg(**over):
    d = {"scenario": "beamforming", "M": 7, "K": 3, "noise": {"type": "gaussian", "variance": 0.0},
         "algos": [{"name": "CMCC", "eta": 0.001, "sigma": 20.0}, {"name": "CLMS", "eta": 0.001}],
         "runs": 3, "iterations": 100, "steady_window": 20, "beamforming": dict(BEAM)}  # fmt: skip
    d.update(over)
    return parse_config(d, seed_env=False)


def test_quiescent_without_excitation():
    beam = dict(BEAM, interferer_deg=[], snr_db=-np.inf, sensor_noise=0.0, look_constraint=False)
    res = run_beamforming(_cfg(beamforming=beam))
    for a in res.algos.values():
        np.testing.assert_array_equal(a.final_W, 0.0)
        assert a.diverged_runs == 0
    assert res.extras["beampattern"]["CMCC"].degenerate


def test_quiescent_with_look_constraint():
    beam = dict(BEAM, interferer_deg=[], snr_db=-np.inf, sensor_noise=0.0)
    res = run_beamforming(_cfg(beamforming=beam))
    cs = beamforming_constraints(7)
    np.testing.assert_allclose(res.algos["CMCC"].final_W, cs.Q)


def test_even_array_rejected():
    with pytest.raises(ConfigurationError):
        _cfg(M=6)


def test_run_reports_patterns_and_power():
    res = run_beamforming(_cfg(noise={"type": "alpha-stable", "alpha": 1.2, "beta": 0, "gamma": 1.6, "delta": 0}))
    assert set(res.extras["beampattern"]) == {"CMCC", "CLMS", "optimal"}
    assert res.extras["output_power"]["optimal"] > 0
    assert "sensor noise" in res.extras["conventions"]
