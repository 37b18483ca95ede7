"""Online weight-update engines: CMCC, CLMS, CAP and CRLS.

All four share one calling convention::

    state = init_filter(cs, "CMCC", hp)
    state, e = cmcc_step(state, x, d, hp)

Weights may carry leading batch axes: with ``batch=(B,)`` the state holds
``B`` independent filters, ``x`` has shape ``(B, M)`` and ``d`` shape ``(B,)``.
The Monte-Carlo harness uses this to advance every repetition in one step.

A filter whose update produces a non-finite weight is frozen at its last
finite value and flagged in ``state.diverged``; it is never updated again.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import ConstraintSet
from .errors import ConfigurationError, DimensionError, InputError

ALGORITHMS = ("CMCC", "CLMS", "CAP", "CRLS")


@dataclass(frozen=True)
class HyperParams:
    """Algorithm hyper-parameters.

    Parameters
    ----------
    eta : float
        Step size (CMCC, CLMS, CAP). Zero freezes the filter.
    sigma : float
        Gaussian kernel bandwidth (CMCC only).
    L : int
        Sliding-window length (CAP only).
    lambda_ff : float
        Forgetting factor in (0, 1] (CRLS only).
    delta : float
        CRLS regularizer; the inverse correlation starts at ``I / delta``.
    eps_ap : float
        Diagonal loading of the CAP window Gram matrix.
    """

    eta: float = 0.01
    sigma: float = 1.0
    L: int = 4
    lambda_ff: float = 0.998
    delta: float = 1e-2
    eps_ap: float = 1e-6

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ConfigurationError(f"eta must be >= 0, got {self.eta}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigurationError(f"sigma must be > 0, got {self.sigma}")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigurationError(f"L must be a positive integer, got {self.L}")
        if not 0 < self.lambda_ff <= 1:
            raise ConfigurationError(f"lambda_ff must lie in (0, 1], got {self.lambda_ff}")
        if not self.delta > 0:
            raise ConfigurationError("delta must be > 0")
        if not self.eps_ap > 0:
            raise ConfigurationError("eps_ap must be > 0")

    def with_(self, **changes) -> "HyperParams":
        return replace(self, **changes)


@dataclass
class APWindow:
    """Sliding window for CAP: newest regressor first."""

    A: np.ndarray  # (..., L, M)
    D: np.ndarray  # (..., L)
    count: int = 0


@dataclass
class RLSCarry:
    """Inverse weighted correlation and unconstrained estimate for CRLS."""

    Phi_inv: np.ndarray  # (..., M, M)
    W_ls: np.ndarray  # (..., M)


@dataclass
class FilterState:
    """Weights ``W(n)`` plus algorithm-specific carry.

    Attributes
    ----------
    W : ndarray, shape (..., M)
        Current weights.
    algo : str
        One of :data:`ALGORITHMS`.
    cs : ConstraintSet
        Constraint shared with the caller (never copied).
    carry : APWindow, RLSCarry or None
    n : int
        Number of steps taken.
    diverged : ndarray of bool, shape (...)
        Filters frozen after a non-finite update.
    diverged_at : ndarray of int, shape (...)
        Iteration at which each filter froze, -1 if it did not.
    """

    W: np.ndarray
    algo: str
    cs: ConstraintSet
    carry: APWindow | RLSCarry | None = None
    n: int = 0
    diverged: np.ndarray = field(default=None)
    diverged_at: np.ndarray = field(default=None)

    @property
    def batch_shape(self) -> tuple:
        return self.W.shape[:-1]


def init_filter(cs: ConstraintSet, algo: str, hp: HyperParams, batch: tuple | int = ()) -> FilterState:
    """Start a filter (or a batch of filters) at ``W(0) = Q``."""
    algo = algo.upper()
    if algo not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    if not isinstance(hp, HyperParams):
        raise ConfigurationError("hp must be a HyperParams instance")
    if algo == "CMCC" and hp.eta > 0 and hp.sigma <= 0:
        raise ConfigurationError("CMCC needs sigma > 0")
    batch = (batch,) if isinstance(batch, int) else tuple(batch)
    M = cs.M
    W = np.broadcast_to(cs.Q, batch + (M,)).copy()
    carry = None
    if algo == "CAP":
        carry = APWindow(A=np.zeros(batch + (hp.L, M)), D=np.zeros(batch + (hp.L,)))
    elif algo == "CRLS":
        carry = RLSCarry(Phi_inv=np.broadcast_to(np.eye(M) / hp.delta, batch + (M, M)).copy(), W_ls=W.copy())
    return FilterState(
        W=W,
        algo=algo,
        cs=cs,
        carry=carry,
        diverged=np.zeros(batch, dtype=bool),
        diverged_at=np.full(batch, -1, dtype=int),
    )


def gaussian_gain(e, sigma: float):
    """Correntropy weighting ``exp(-e^2 / (2 sigma^2))``, in (0, 1]."""
    return np.exp(-np.square(e) / (2.0 * sigma * sigma))


def _check_inputs(state: FilterState, x, d, algo: str):
    if state.algo != algo:
        raise ConfigurationError(f"state was initialised for {state.algo}, not {algo}")
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if x.shape != state.W.shape or d.shape != state.batch_shape:
        raise DimensionError(f"x {x.shape} / d {d.shape} do not match weights {state.W.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(d))):
        raise InputError("non-finite input sample")
    return x, d


def _commit(state: FilterState, W_new: np.ndarray) -> None:
    """Accept the update for live, finite filters; freeze the rest."""
    live = ~state.diverged
    bad = live & ~np.all(np.isfinite(W_new), axis=-1)
    if np.any(bad):
        state.diverged = state.diverged | bad
        state.diverged_at = np.where(bad, state.n, state.diverged_at)
        _quiet_carry(state, bad)
    keep = (~state.diverged)[..., None]
    state.W = np.where(keep, W_new, state.W)


def _quiet_carry(state: FilterState, rows: np.ndarray) -> None:
    # frozen filters keep running on benign carry so batched solves stay regular
    carry = state.carry
    if isinstance(carry, APWindow):
        carry.A[rows] = 0.0
        carry.D[rows] = 0.0
    elif isinstance(carry, RLSCarry):
        carry.Phi_inv[rows] = np.eye(state.cs.M)
        carry.W_ls[rows] = state.W[rows]


def _apriori_error(W, x, d):
    return d - np.einsum("...m,...m->...", W, x)


def cmcc_step(state: FilterState, x, d, hp: HyperParams):
    """One CMCC update ``W <- P[W + eta g(e) e x] + Q``.

    The error ``e = d - W(n-1)^T x`` uses the weights before the update.
    Returns the (mutated) state and the a-priori error.
    """
    x, d = _check_inputs(state, x, d, "CMCC")
    with np.errstate(over="ignore", invalid="ignore"):
        e = _apriori_error(state.W, x, d)
        mu = hp.eta * gaussian_gain(e, hp.sigma) * e
        W_new = (state.W + mu[..., None] * x) @ state.cs.P + state.cs.Q
    state.n += 1
    _commit(state, W_new)
    return state, e


def clms_step(state: FilterState, x, d, hp: HyperParams):
    """One CLMS update ``W <- P[W + eta e x] + Q``."""
    x, d = _check_inputs(state, x, d, "CLMS")
    with np.errstate(over="ignore", invalid="ignore"):
        e = _apriori_error(state.W, x, d)
        W_new = (state.W + (hp.eta * e)[..., None] * x) @ state.cs.P + state.cs.Q
    state.n += 1
    _commit(state, W_new)
    return state, e


def cap_step(state: FilterState, x, d, hp: HyperParams):
    """Constrained affine projection over the last ``min(n, L)`` samples.

    ``W <- P[W + eta A (A^T A + eps I)^{-1} E] + Q`` where the columns of ``A``
    are the windowed regressors and ``E`` their errors under ``W(n-1)``.
    The returned error is the one for the newest sample.
    """
    x, d = _check_inputs(state, x, d, "CAP")
    win = state.carry
    L = win.A.shape[-2]
    win.A[..., 1:, :] = win.A[..., :-1, :].copy()
    win.D[..., 1:] = win.D[..., :-1].copy()
    win.A[..., 0, :] = x
    win.D[..., 0] = d
    win.count = min(win.count + 1, L)
    A = win.A[..., : win.count, :]
    with np.errstate(over="ignore", invalid="ignore"):
        E = win.D[..., : win.count] - np.einsum("...lm,...m->...l", A, state.W)
        gram = A @ np.swapaxes(A, -1, -2) + hp.eps_ap * np.eye(win.count)
        coef = np.linalg.solve(gram, E[..., None])[..., 0]
        W_new = (state.W + hp.eta * np.einsum("...lm,...l->...m", A, coef)) @ state.cs.P + state.cs.Q
    state.n += 1
    _commit(state, W_new)
    return state, E[..., 0]


def crls_step(state: FilterState, x, d, hp: HyperParams):
    """Constrained RLS with exponential forgetting.

    The unconstrained RLS estimate is updated with the matrix-inversion lemma
    and then projected onto ``C^T W = f`` in the metric of the inverse
    correlation::

        W = W_ls + Phi^{-1} C (C^T Phi^{-1} C)^{-1} (f - C^T W_ls)
    """
    x, d = _check_inputs(state, x, d, "CRLS")
    rc = state.carry
    lam = hp.lambda_ff
    C, f = state.cs.C, state.cs.f
    with np.errstate(over="ignore", invalid="ignore"):
        e = _apriori_error(state.W, x, d)
        Px = np.einsum("...ij,...j->...i", rc.Phi_inv, x)
        gain = Px / (lam + np.einsum("...i,...i->...", x, Px))[..., None]
        xi = _apriori_error(rc.W_ls, x, d)
        W_ls = rc.W_ls + gain * xi[..., None]
        Phi = (rc.Phi_inv - gain[..., :, None] * Px[..., None, :]) / lam
        Phi = 0.5 * (Phi + np.swapaxes(Phi, -1, -2))
        PhiC = Phi @ C
        S = np.swapaxes(C, 0, 1) @ PhiC
        r = f - W_ls @ C
        bad = ~np.all(np.isfinite(S), axis=(-2, -1))
        S = np.where(bad[..., None, None], np.eye(C.shape[1]), S)
        try:
            lagrange = np.linalg.solve(S, r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            lagrange = np.einsum("...ij,...j->...i", np.linalg.pinv(S), r)
        W_new = W_ls + np.einsum("...mk,...k->...m", PhiC, lagrange)
        W_new = np.where(bad[..., None], np.nan, W_new)
    rc.Phi_inv = Phi
    rc.W_ls = W_ls
    state.n += 1
    _commit(state, W_new)
    return state, e


STEP = {"CMCC": cmcc_step, "CLMS": clms_step, "CAP": cap_step, "CRLS": crls_step}


def step(state: FilterState, x, d, hp: HyperParams):
    """Dispatch to the step function of ``state.algo``."""
    return STEP[state.algo](state, x, d, hp)
