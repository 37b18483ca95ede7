"""Steady-state mean-square analysis of the CMCC filter.

Everything here is a pure function of an input covariance ``R``, a
constraint set, the true system ``W*``, the step size, the kernel bandwidth
and a noise model. The central object is the ``M^2 x M^2`` matrix ``F`` of the
weighted-energy recursion; the steady-state MSD follows from one dense solve
with ``I - F``.

``vec`` is column-major (Fortran order) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .constraints import ConstraintSet
from .errors import ConfigurationError, ConstraintRankError, DimensionError, InstabilityError
from .noise import GaussianNoise, Moment, NoiseModel, noise_moment

_SYM_TOL = 1e-10
_RESIDUAL_TOL = 1e-10


def vec(A: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(A).reshape(-1, order="F")


def unvec(v: np.ndarray, M: int) -> np.ndarray:
    """Inverse of :func:`vec` for an ``M x M`` matrix."""
    return np.asarray(v).reshape((M, M), order="F")


def check_covariance(R, M: int | None = None) -> np.ndarray:
    """Return ``R`` as a float array after checking it is symmetric positive definite."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DimensionError(f"R must be square, got shape {R.shape}")
    if M is not None and R.shape[0] != M:
        raise DimensionError(f"R is {R.shape[0]}x{R.shape[0]} but the constraints have M={M}")
    if not np.all(np.isfinite(R)):
        raise ConfigurationError("R must be finite")
    if np.max(np.abs(R - R.T)) > _SYM_TOL * max(1.0, np.max(np.abs(R))):
        raise ConfigurationError("R must be symmetric")
    if np.linalg.eigvalsh(R)[0] <= 0:
        raise ConfigurationError("R must be positive definite")
    return R


@dataclass(frozen=True)
class TheoryInputs:
    """Everything the steady-state predictor needs.

    Parameters
    ----------
    R : ndarray, shape (M, M)
        Input covariance.
    cs : ConstraintSet
    W_true : ndarray, shape (M,)
        Unknown system ``W*``.
    eta, sigma : float
        Step size and kernel bandwidth.
    noise : NoiseModel
    """

    R: np.ndarray
    cs: ConstraintSet
    W_true: np.ndarray
    eta: float
    sigma: float
    noise: NoiseModel

    def __post_init__(self):
        object.__setattr__(self, "R", check_covariance(self.R, self.cs.M))
        W = np.asarray(self.W_true, dtype=float)
        if W.shape != (self.cs.M,):
            raise DimensionError(f"W_true has shape {W.shape}, expected ({self.cs.M},)")
        object.__setattr__(self, "W_true", W)
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigurationError("sigma must be > 0")
        if not np.isfinite(self.eta):
            raise ConfigurationError("eta must be finite")


@dataclass(frozen=True)
class SteadyStatePrediction:
    """Output of :func:`steady_state_msd`.

    Attributes
    ----------
    W_opt, eps_w : ndarray, shape (M,)
        Constrained optimum and ``W* - W_opt``.
    Eg, Eg2 : float
        Limiting ``E[g(e)]`` and ``E[g^2(e)]``.
    eta_max : float
        Step-size bound from :func:`stability_bound`.
    S : float
        Predicted steady-state ``E||W(n) - W_opt||^2``.
    Upsilon : ndarray, shape (M, M)
        ``P R P``.
    F : ndarray, shape (M^2, M^2)
    path : str
        ``"gaussian"`` (closed-form gains) or ``"taylor"``.
    """

    W_opt: np.ndarray
    eps_w: np.ndarray
    Eg: float
    Eg2: float
    eta_max: float
    S: float
    Upsilon: np.ndarray
    F: np.ndarray
    path: str

    @property
    def S_db(self) -> float:
        return float(10 * np.log10(self.S)) if self.S > 0 else -np.inf


def optimal_weights(R, cs: ConstraintSet, W_true):
    """Minimizer of ``(W - W*)^T R (W - W*)`` subject to ``C^T W = f``.

    Returns
    -------
    W_opt, eps_w : ndarray
        ``W_opt = W* + R^{-1} C (C^T R^{-1} C)^{-1} (f - C^T W*)`` and
        ``eps_w = W* - W_opt``.
    """
    R = check_covariance(R, cs.M)
    W_true = np.asarray(W_true, dtype=float)
    Rc = la.cho_factor(R)
    RinvC = la.cho_solve(Rc, cs.C)
    G = cs.C.T @ RinvC
    if np.linalg.cond(G) > 1e12:
        raise ConstraintRankError("C^T R^{-1} C is singular")
    eps_w = RinvC @ np.linalg.solve(G, W_true @ cs.C - cs.f)
    return W_true - eps_w, eps_w


def upsilon(R, cs: ConstraintSet) -> np.ndarray:
    """``P R P`` symmetrized."""
    U = cs.P @ np.asarray(R, dtype=float) @ cs.P
    return 0.5 * (U + U.T)


def stability_bound(R, cs: ConstraintSet) -> float:
    """``2 / (2 lambda_max(Y) + tr Y)`` with ``Y = P R P``."""
    U = upsilon(check_covariance(R, cs.M), cs)
    lam = np.linalg.eigvalsh(U)
    return float(2.0 / (2.0 * lam[-1] + np.trace(U)))


def _misadjustment(R, eps_w) -> float:
    return float(eps_w @ R @ eps_w)


def limiting_gains(inputs: TheoryInputs, eps_w) -> tuple[float, float]:
    """Steady-state ``E[g(e)]`` and ``E[g^2(e)]`` under ``W(n) ~ W_opt``.

    Gaussian noise uses the exact Gaussian integrals; any other model uses a
    second-order expansion of ``g`` around the noise sample with the noise
    moments from :func:`~cmcc.noise.noise_moment`. Both values are clamped to
    ``(0, 1]``.

    Raises
    ------
    InfiniteMomentError
        On the expansion path when the noise has no finite variance.
    """
    sigma = inputs.sigma
    ew = _misadjustment(inputs.R, np.asarray(eps_w, dtype=float))
    noise = inputs.noise
    if isinstance(noise, GaussianNoise):
        s2 = sigma * sigma
        v = noise.variance
        Eg = sigma / np.sqrt(s2 + ew + v)
        Eg2 = sigma / np.sqrt(s2 + 2 * ew + 2 * v)
    else:
        # the expansion needs E[v^2] to be meaningful
        noise_moment(noise, Moment.POWER, sigma)
        Eg = noise_moment(noise, Moment.GAIN, sigma) + 0.5 * ew * noise_moment(noise, Moment.GAIN_CURV, sigma)
        Eg2 = noise_moment(noise, Moment.GAIN_SQ, sigma) + ew * noise_moment(noise, Moment.GAIN_SQ_CURV, sigma)
    tiny = np.finfo(float).tiny
    return float(np.clip(Eg, tiny, 1.0)), float(np.clip(Eg2, tiny, 1.0))


def f_matrix(R, cs: ConstraintSet, eta: float, Eg: float, Eg2: float) -> np.ndarray:
    """Matrix ``F`` with ``vec(U) = F vec(T)`` for the weighted-norm recursion.

    ``U = B T B^T + eta^2 Eg2 tr(T Y) R + (2 eta^2 Eg2 - eta^2 Eg^2) (RP) T (RP)^T``
    where ``B = (I - eta Eg R) P`` and ``Y = P R P``.
    """
    R = np.asarray(R, dtype=float)
    M = cs.M
    if R.shape != (M, M):
        raise DimensionError(f"R has shape {R.shape}, expected ({M}, {M})")
    if not (0 < Eg <= 1 and 0 < Eg2 <= 1):
        raise ConfigurationError(f"gains must lie in (0, 1], got Eg={Eg}, Eg2={Eg2}")
    P = cs.P
    B = (np.eye(M) - eta * Eg * R) @ P
    RP = R @ P
    return (
        np.kron(B, B)
        + (2 * eta**2 * Eg2 - eta**2 * Eg**2) * np.kron(RP, RP)
        + eta**2 * Eg2 * np.outer(vec(R), vec(upsilon(R, cs)))
    )


def steady_state_msd(inputs: TheoryInputs) -> SteadyStatePrediction:
    """Predicted steady-state MSD of CMCC.

    ``S = eta^2 (eps_w^T R eps_w + E[v^2]) vec(Y)^T (I - F)^{-1} vec(I) Eg2``.

    Raises
    ------
    InstabilityError
        If ``eta`` is outside ``(0, eta_max)`` or ``F`` has spectral radius >= 1.
    InfiniteMomentError
        If the noise has no finite variance.
    """
    R, cs = inputs.R, inputs.cs
    M = cs.M
    eta = inputs.eta
    eta_max = stability_bound(R, cs)
    if not 0 < eta < eta_max:
        raise InstabilityError(f"eta={eta:.6g} is outside the stable range (0, {eta_max:.6g})")
    W_opt, eps_w = optimal_weights(R, cs, inputs.W_true)
    power = noise_moment(inputs.noise, Moment.POWER, inputs.sigma)
    Eg, Eg2 = limiting_gains(inputs, eps_w)
    F = f_matrix(R, cs, eta, Eg, Eg2)
    rho = np.max(np.abs(np.linalg.eigvals(F)))
    if rho >= 1:
        raise InstabilityError(f"spectral radius of F is {rho:.6g} >= 1")
    A = np.eye(M * M) - F
    b = vec(np.eye(M))
    t = np.linalg.solve(A, b)
    if np.linalg.norm(A @ t - b) > _RESIDUAL_TOL * max(1.0, np.linalg.norm(t)):
        raise InstabilityError("I - F is numerically singular")
    Y = upsilon(R, cs)
    S = eta**2 * (_misadjustment(R, eps_w) + power) * float(vec(Y) @ t) * Eg2
    return SteadyStatePrediction(
        W_opt=W_opt,
        eps_w=eps_w,
        Eg=Eg,
        Eg2=Eg2,
        eta_max=eta_max,
        S=max(float(S), 0.0),
        Upsilon=Y,
        F=F,
        path="gaussian" if isinstance(inputs.noise, GaussianNoise) else "taylor",
    )
