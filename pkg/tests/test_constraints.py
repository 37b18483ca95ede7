import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcc.constraints import (
    build_constraints,
    check_feasible,
    linear_phase_matrix,
    random_constraints,
)
from cmcc.errors import ConstraintRankError, DimensionError

dims = st.integers(2, 10).flatmap(lambda M: st.tuples(st.just(M), st.integers(1, M - 1)))


@settings(max_examples=60, deadline=None)
@given(dims, st.integers(0, 2**32 - 1))
def test_projector_is_orthogonal_and_idempotent(mk, seed):
    M, K = mk
    rng = np.random.default_rng(seed)
    cs = build_constraints(rng.standard_normal((M, K)), rng.standard_normal(K))
    assert np.allclose(cs.P @ cs.P, cs.P, atol=1e-10)
    assert np.allclose(cs.P, cs.P.T, atol=1e-12)
    assert np.allclose(cs.C.T @ cs.P, 0, atol=1e-10)
    assert np.allclose(cs.C.T @ cs.Q, cs.f, atol=1e-9)
    assert np.allclose(cs.P @ cs.Q, 0, atol=1e-9)
    assert np.isclose(np.trace(cs.P), M - K, atol=1e-9)


def test_feasible_points_are_affine_image(rng):
    cs = random_constraints(7, 3, rng, W_true=rng.standard_normal(7))
    for _ in range(20):
        W = cs.Q + cs.P @ rng.standard_normal(7)
        assert check_feasible(W, cs, 1e-10)


def test_single_column_vector_accepted():
    cs = build_constraints([1.0, 0.0], [2.0])
    assert cs.K == 1
    np.testing.assert_allclose(cs.Q, [2.0, 0.0])
    np.testing.assert_allclose(cs.P, [[0, 0], [0, 1]])


def test_arrays_are_read_only(rng):
    cs = random_constraints(5, 2, rng)
    with pytest.raises(ValueError):
        cs.P[0, 0] = 1.0


@pytest.mark.parametrize(
    "C, f",
    [
        (np.ones((3, 3)), np.ones(3)),  # K == M
        (np.ones((3, 2)), np.ones(3)),  # f length
        (np.ones((1, 1)), np.ones(1)),  # M < 2
        (np.array([[1.0, np.nan], [0, 1], [0, 0]]), np.zeros(2)),
    ],
)
def test_dimension_errors(C, f):
    with pytest.raises(DimensionError):
        build_constraints(C, f)


def test_rank_deficient_rejected():
    C = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0], [1.0, 2.0]])
    with pytest.raises(ConstraintRankError):
        build_constraints(C, [0.0, 0.0])


def test_check_feasible_tolerance(rng):
    cs = random_constraints(6, 2, rng, offset=1.0)
    W = cs.Q + np.full(6, 0.0)
    assert check_feasible(W, cs, 1e-12)
    W2 = W + 1e-3 * cs.C[:, 0]
    assert not check_feasible(W2, cs, 1e-6)
    with pytest.raises(ValueError):
        check_feasible(W, cs, 0.0)


def test_linear_phase_matrix_forces_symmetry():
    C = linear_phase_matrix(7)
    assert C.shape == (7, 3)
    cs = build_constraints(C, np.zeros(3))
    W = cs.P @ np.arange(7.0)
    np.testing.assert_allclose(W, W[::-1], atol=1e-12)
    with pytest.raises(DimensionError):
        linear_phase_matrix(6)
