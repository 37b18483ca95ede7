"""Linear-constraint geometry shared by all constrained filters.

A constraint ``C^T W = f`` with ``C`` of shape ``(M, K)`` is represented by a
:class:`ConstraintSet` that caches the projector ``P`` onto the null space of
``C^T`` and the minimum-norm feasible point ``Q``. Every feasible weight vector
can be written ``Q + P z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ConstraintRankError, DimensionError

#: Largest accepted condition number of ``C^T C``.
MAX_GRAM_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Immutable constraint ``C^T W = f`` with cached ``P`` and ``Q``.

    Build instances with :func:`build_constraints`; the constructor does not
    validate its arguments.

    Attributes
    ----------
    C : ndarray, shape (M, K)
        Constraint matrix with full column rank.
    f : ndarray, shape (K,)
        Constraint values.
    P : ndarray, shape (M, M)
        ``I - C (C^T C)^{-1} C^T``, symmetric and idempotent.
    Q : ndarray, shape (M,)
        ``C (C^T C)^{-1} f``.
    """

    C: np.ndarray
    f: np.ndarray
    P: np.ndarray
    Q: np.ndarray

    @property
    def M(self) -> int:
        return self.C.shape[0]

    @property
    def K(self) -> int:
        return self.C.shape[1]

    def residual(self, W: np.ndarray) -> np.ndarray:
        """``C^T W - f`` for a weight vector or a batch of them (last axis M)."""
        W = np.asarray(W, dtype=float)
        if W.shape[-1] != self.M:
            raise DimensionError(f"weights have length {W.shape[-1]}, constraints expect {self.M}")
        return W @ self.C - self.f


def build_constraints(C, f) -> ConstraintSet:
    """Validate ``(C, f)`` and precompute the projector and offset.

    Parameters
    ----------
    C : array_like, shape (M, K)
        Constraint matrix, ``1 <= K < M``. A 1-D array is treated as a single
        column.
    f : array_like, shape (K,)
        Constraint values.

    Raises
    ------
    DimensionError
        If the shapes of ``C`` and ``f`` disagree or ``K`` is out of range.
    ConstraintRankError
        If ``C^T C`` is singular or its condition number exceeds
        :data:`MAX_GRAM_CONDITION`.
    """
    C = np.array(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    f = np.atleast_1d(np.array(f, dtype=float))
    if C.ndim != 2 or f.ndim != 1:
        raise DimensionError("C must be a matrix and f a vector")
    M, K = C.shape
    if M < 2 or not 1 <= K < M:
        raise DimensionError(f"need M >= 2 and 1 <= K < M, got M={M}, K={K}")
    if f.shape[0] != K:
        raise DimensionError(f"f has length {f.shape[0]} but C has {K} columns")
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(f))):
        raise DimensionError("C and f must be finite")

    gram = C.T @ C
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_GRAM_CONDITION:
        raise ConstraintRankError(f"C^T C is ill-conditioned (cond={cond:.3g}); C must have full column rank")
    try:
        factor = la.cho_factor(gram)
    except la.LinAlgError as exc:
        raise ConstraintRankError("C^T C is not positive definite") from exc

    P = np.eye(M) - C @ la.cho_solve(factor, C.T)
    P = 0.5 * (P + P.T)
    Q = C @ la.cho_solve(factor, f)
    for arr in (C, f, P, Q):
        arr.setflags(write=False)
    return ConstraintSet(C=C, f=f, P=P, Q=Q)


def check_feasible(W, cs: ConstraintSet, tol: float) -> bool:
    """Return True iff ``max |C^T W - f| <= tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    W = np.asarray(W, dtype=float)
    if W.ndim != 1:
        raise DimensionError("check_feasible expects a single weight vector")
    return bool(np.max(np.abs(cs.residual(W))) <= tol)


def random_constraints(M: int, K: int, rng: np.random.Generator, W_true=None, offset=0.0) -> ConstraintSet:
    """Gaussian constraint matrix with ``f = C^T W_true + offset``.

    With ``W_true=None`` the constraint values are just ``offset``.
    """
    C = rng.standard_normal((M, K))
    base = np.zeros(K) if W_true is None else C.T @ np.asarray(W_true, dtype=float)
    return build_constraints(C, base + np.broadcast_to(np.asarray(offset, dtype=float), (K,)))


def linear_phase_matrix(M: int) -> np.ndarray:
    """``[I; 0; -J]`` of shape ``(M, (M-1)/2)`` for odd ``M``.

    ``C^T W = 0`` forces ``w_k = w_{M-1-k}``, i.e. a symmetric (linear-phase)
    weight vector.
    """
    if M < 3 or M % 2 == 0:
        raise DimensionError("linear-phase constraints need an odd M >= 3")
    h = (M - 1) // 2
    C = np.zeros((M, h))
    C[np.arange(h), np.arange(h)] = 1.0
    C[M - 1 - np.arange(h), np.arange(h)] = -1.0
    return C
