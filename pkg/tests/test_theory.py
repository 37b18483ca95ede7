import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcc.constraints import build_constraints, random_constraints
from cmcc.errors import ConfigurationError, InfiniteMomentError, InstabilityError
from cmcc.noise import BinaryNoise, CauchyNoise, GaussianNoise, LaplaceNoise, MixedGaussianNoise, Moment, noise_moment
from cmcc.theory import (
    TheoryInputs,
    f_matrix,
    limiting_gains,
    optimal_weights,
    stability_bound,
    steady_state_msd,
    unvec,
    upsilon,
    vec,
)

from conftest import W_STAR, random_spd


def _kkt_oracle(R, C, f, W_star):
    M, K = C.shape
    A = np.block([[2 * R, C], [C.T, np.zeros((K, K))]])
    b = np.concatenate([2 * R @ W_star, f])
    return np.linalg.solve(A, b)[:M]


def _u_direct(R, P, T, eta, Eg, Eg2):
    M = R.shape[0]
    B = (np.eye(M) - eta * Eg * R) @ P
    Y = P @ R @ P
    RPTPR = R @ P @ T @ P @ R
    return B @ T @ B.T + eta**2 * Eg2 * np.trace(T @ Y) * R + 2 * eta**2 * Eg2 * RPTPR - eta**2 * Eg**2 * RPTPR


def test_consistent_constraints_give_zero_misadjustment(rng):
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR)
    W_opt, eps = optimal_weights(R, cs, W_STAR)
    np.testing.assert_allclose(W_opt, W_STAR, atol=1e-12)
    np.testing.assert_allclose(eps, 0, atol=1e-12)


def test_identity_covariance_is_euclidean_projection(rng):
    cs = random_constraints(7, 3, rng, W_true=W_STAR, offset=0.5)
    W_opt, _ = optimal_weights(np.eye(7), cs, W_STAR)
    np.testing.assert_allclose(W_opt, cs.P @ W_STAR + cs.Q, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimal_weights_match_kkt(seed):
    rng = np.random.default_rng(seed)
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR, offset=np.ones(3))
    W_opt, eps = optimal_weights(R, cs, W_STAR)
    np.testing.assert_allclose(W_opt, _kkt_oracle(R, cs.C, cs.f, W_STAR), atol=1e-8)
    np.testing.assert_allclose(cs.C.T @ W_opt, cs.f, atol=1e-8)
    np.testing.assert_allclose(cs.P @ R @ eps, 0, atol=1e-8)


def test_stability_bound_identity():
    cs = random_constraints(7, 3, np.random.default_rng(0))
    assert np.isclose(stability_bound(np.eye(7), cs), 1 / 3)


def test_stability_bound_homogeneous(rng):
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng)
    assert np.isclose(stability_bound(3.5 * R, cs), stability_bound(R, cs) / 3.5)


def test_stability_bound_range_for_paper_setup():
    vals = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        vals.append(stability_bound(random_spd(7, rng, 7), random_constraints(7, 3, rng)))
    assert 0.2 <= min(vals) and max(vals) <= 0.4


def test_f_matrix_eta_zero():
    rng = np.random.default_rng(4)
    R = random_spd(5, rng, 5)
    cs = random_constraints(5, 2, rng)
    np.testing.assert_allclose(f_matrix(R, cs, 0.0, 0.7, 0.5), np.kron(cs.P, cs.P), atol=1e-15)


def test_f_matrix_basis_oracle_2x2():
    cs = build_constraints([[1.0], [0.0]], [0.0])
    R = np.eye(2)
    eta, Eg, Eg2 = 0.3, 0.8, 0.6
    F = f_matrix(R, cs, eta, Eg, Eg2)
    F_oracle = np.zeros((4, 4))
    for j in range(4):
        T = unvec(np.eye(4)[j], 2)
        F_oracle[:, j] = vec(_u_direct(R, cs.P, T, eta, Eg, Eg2))
    # symmetric T span the relevant subspace; off-diagonal basis elements are checked pairwise
    for T in (np.diag([1.0, 0]), np.diag([0, 1.0]), np.array([[0, 1.0], [1.0, 0]])):
        np.testing.assert_allclose(F @ vec(T), F_oracle @ vec(T), atol=1e-12)
    np.testing.assert_allclose(F, F_oracle, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_f_matrix_matches_direct_recursion(seed):
    rng = np.random.default_rng(seed)
    M = 6
    R = random_spd(M, rng, M)
    cs = random_constraints(M, 2, rng)
    eta = rng.uniform(0, 0.3)
    Eg2, Eg = np.sort(rng.uniform(0.05, 1, 2))
    G = rng.standard_normal((M, M))
    T = G @ G.T
    F = f_matrix(R, cs, eta, Eg, Eg2)
    np.testing.assert_allclose(unvec(F @ vec(T), M), _u_direct(R, cs.P, T, eta, Eg, Eg2), atol=1e-10)


def test_spectral_radius_below_one_inside_bound():
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        R = random_spd(7, rng, 7)
        cs = random_constraints(7, 3, rng)
        eta = rng.uniform(0.01, 0.999) * stability_bound(R, cs)
        Eg2, Eg = np.sort(rng.uniform(0.05, 1, 2))
        assert np.max(np.abs(np.linalg.eigvals(f_matrix(R, cs, eta, Eg, Eg2)))) < 1


def test_isserlis_fourth_moment():
    rng = np.random.default_rng(77)
    M = 5
    R = random_spd(M, rng, M)
    cs = random_constraints(M, 2, rng)
    P = cs.P
    n = 1_000_000
    X = rng.standard_normal((n, M)) @ np.linalg.cholesky(R).T
    q = np.einsum("ni,ij,nj->n", X, P, X)
    samples = q[:, None, None] * X[:, :, None] * X[:, None, :]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0) / np.sqrt(n)
    expected = np.trace(upsilon(R, cs)) * R + 2 * R @ P @ R
    assert np.all(np.abs(mean - expected) <= 3 * se + 1e-12)


def test_gaussian_gain_examples(rng):
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR)
    Eg, Eg2 = limiting_gains(TheoryInputs(R, cs, W_STAR, 0.01, 1.0, GaussianNoise(0.0)), np.zeros(7))
    assert Eg == 1.0 and Eg2 == 1.0
    Eg, Eg2 = limiting_gains(TheoryInputs(R, cs, W_STAR, 0.01, 1.0, GaussianNoise(1.0)), np.zeros(7))
    assert np.isclose(Eg, 1 / np.sqrt(2)) and np.isclose(Eg2, 1 / np.sqrt(3))


def test_binary_gains_match_sampling(rng):
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR)
    Eg, Eg2 = limiting_gains(TheoryInputs(R, cs, W_STAR, 0.01, 2.0, BinaryNoise()), np.zeros(7))
    assert np.isclose(Eg, np.exp(-1 / 8)) and np.isclose(Eg2, np.exp(-1 / 4))
    v = np.where(rng.random(10_000_000) < 0.5, -1.0, 1.0)
    g = np.exp(-v * v / 8)
    assert abs(g.mean() - Eg) <= 3 * g.std() / np.sqrt(v.size) + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_gain_ordering(seed):
    rng = np.random.default_rng(seed)
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR, offset=0.2)
    for noise in (GaussianNoise(0.5), LaplaceNoise(0.5), MixedGaussianNoise(), BinaryNoise()):
        p = steady_state_msd(TheoryInputs(R, cs, W_STAR, 0.01, 2.0, noise))
        assert 0 < p.Eg2 <= p.Eg <= 1
        assert p.S >= 0 and p.eta_max > 0
        np.testing.assert_allclose(cs.C.T @ p.W_opt, cs.f, atol=1e-8)


def test_noiseless_consistent_gives_zero(rng):
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR)
    p = steady_state_msd(TheoryInputs(R, cs, W_STAR, 0.05, 2.0, GaussianNoise(0.0)))
    assert p.S == 0.0 and p.S_db == -np.inf


def test_monotone_in_eta_and_variance(rng):
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR, offset=0.1)
    eta_max = stability_bound(R, cs)
    etas = np.linspace(0.01, 0.5, 12) * eta_max
    S = [steady_state_msd(TheoryInputs(R, cs, W_STAR, e, 8.0, GaussianNoise(0.81))).S for e in etas]
    assert np.all(np.diff(S) >= 0)
    S = [steady_state_msd(TheoryInputs(R, cs, W_STAR, 0.01, 8.0, GaussianNoise(v))).S for v in np.linspace(0.1, 2, 8)]
    assert np.all(np.diff(S) >= 0)


@pytest.mark.parametrize("seed", range(5))
def test_taylor_agrees_with_gaussian_path(seed):
    rng = np.random.default_rng(seed)
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR, offset=0.1)
    var = 0.5
    exact = steady_state_msd(TheoryInputs(R, cs, W_STAR, 0.01, 2.0, GaussianNoise(var)))
    ew = exact.eps_w @ R @ exact.eps_w
    assert 2.0 >= 2 * np.sqrt(var) and ew <= var
    noise = GaussianNoise(var)
    Eg = noise_moment(noise, Moment.GAIN, 2.0) + 0.5 * ew * noise_moment(noise, Moment.GAIN_CURV, 2.0)
    Eg2 = noise_moment(noise, Moment.GAIN_SQ, 2.0) + ew * noise_moment(noise, Moment.GAIN_SQ_CURV, 2.0)
    assert abs(Eg / exact.Eg - 1) < 0.05 and abs(Eg2 / exact.Eg2 - 1) < 0.05


def test_instability_and_inapplicability(rng):
    R = random_spd(7, rng, 7)
    cs = random_constraints(7, 3, rng, W_true=W_STAR)
    eta_max = stability_bound(R, cs)
    for eta in (0.0, eta_max, 2 * eta_max):
        with pytest.raises(InstabilityError):
            steady_state_msd(TheoryInputs(R, cs, W_STAR, eta, 2.0, GaussianNoise(1.0)))
    with pytest.raises(InfiniteMomentError):
        steady_state_msd(TheoryInputs(R, cs, W_STAR, 0.01, 2.0, CauchyNoise()))


def test_input_validation(rng):
    cs = random_constraints(7, 3, rng)
    with pytest.raises(ConfigurationError):
        TheoryInputs(-np.eye(7), cs, W_STAR, 0.01, 1.0, GaussianNoise())
    with pytest.raises(ConfigurationError):
        TheoryInputs(np.triu(np.ones((7, 7))), cs, W_STAR, 0.01, 1.0, GaussianNoise())
    with pytest.raises(ConfigurationError):
        f_matrix(np.eye(7), cs, 0.1, 1.5, 0.5)
