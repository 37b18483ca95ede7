"""Uniform linear array with half-wavelength spacing, real narrowband model.

Element ``m`` of the steering vector for direction ``theta`` and carrier phase
``phi`` is ``cos((m - (M-1)/2) pi sin(theta) + phi)``. A source of power ``p``
contributes ``sqrt(2 p) a(theta, phi(n))`` to a snapshot, with ``phi(n)``
uniform on ``[0, 2 pi)`` and independent across sources and snapshots, so its
covariance is ``p cos((c_m - c_n) pi sin(theta))``. Sensor noise is white
Gaussian. Powers are set relative to the sensor noise: SNR for the look
direction, INR for each interferer.

The reference response ``d(n)`` is the disturbance ``v(n)`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import ConstraintSet, build_constraints, linear_phase_matrix
from .errors import ConfigurationError
from .noise import NoiseModel
from .theory import optimal_weights


def _centered(M: int) -> np.ndarray:
    return np.arange(M) - (M - 1) / 2


def steering(theta_deg, M: int, phase=0.0) -> np.ndarray:
    """Real steering vector(s); ``theta_deg`` may be an array (rows)."""
    u = np.pi * np.sin(np.deg2rad(np.asarray(theta_deg, dtype=float)))
    return np.cos(np.multiply.outer(u, _centered(M)) + np.asarray(phase)[..., None])


def beamforming_constraints(M: int, look_deg: float = 0.0, look_constraint: bool = True) -> ConstraintSet:
    """Linear-phase constraint ``[I; 0; -J]^T W = 0``.

    With ``look_constraint`` the unit-response condition ``a(look)^T W = 1``
    is appended as one more column.
    """
    C = linear_phase_matrix(M)
    f = np.zeros(C.shape[1])
    if look_constraint:
        C = np.column_stack([C, steering(look_deg, M)])
        f = np.append(f, 1.0)
    return build_constraints(C, f)


def array_covariance(M: int, doas_deg, powers, sensor_noise: float) -> np.ndarray:
    """Exact snapshot covariance for the source model above."""
    c = _centered(M)
    R = sensor_noise * np.eye(M)
    for th, p in zip(doas_deg, powers):
        u = np.pi * np.sin(np.deg2rad(th))
        R = R + p * np.cos(np.subtract.outer(c, c) * u)
    return R


@dataclass(frozen=True)
class BeamformingProblem:
    """Snapshot generator consumed by :func:`cmcc.simulation.simulate`."""

    M: int
    doas_deg: tuple
    powers: tuple
    sensor_noise: float
    cs: ConstraintSet
    noise: NoiseModel
    W_ref: np.ndarray

    @property
    def R(self) -> np.ndarray:
        return array_covariance(self.M, self.doas_deg, self.powers, self.sensor_noise)

    def generate(self, rng_x, rng_v, iterations: int):
        M = self.M
        X = np.sqrt(self.sensor_noise) * rng_x.standard_normal((iterations, M))
        for th, p in zip(self.doas_deg, self.powers):
            phi = rng_x.uniform(0.0, 2 * np.pi, iterations)
            X += np.sqrt(2 * p) * steering(th, M, phi)
        return X, self.noise.sample(rng_v, iterations)


def make_problem(M: int, beam: dict, noise: NoiseModel) -> BeamformingProblem:
    """Build the array scenario from the ``beamforming`` config block."""
    if M % 2 == 0 or M < 3:
        raise ConfigurationError("beamforming needs an odd number of sensors M >= 3")
    snr = 10 ** (beam["snr_db"] / 10) * beam["sensor_noise"]
    inr = 10 ** (beam["inr_db"] / 10) * beam["sensor_noise"]
    doas = (beam["look_deg"], *beam["interferer_deg"])
    powers = (snr, *([inr] * len(beam["interferer_deg"])))
    # silent sources are dropped so a source-free, noise-free array stays exactly zero
    keep = [i for i, p in enumerate(powers) if p > 0]
    doas = tuple(float(doas[i]) for i in keep)
    powers = tuple(float(powers[i]) for i in keep)
    cs = beamforming_constraints(M, beam["look_deg"], beam["look_constraint"])
    R = array_covariance(M, doas, powers, beam["sensor_noise"])
    if np.linalg.eigvalsh(R)[0] > 1e-12 * max(1.0, np.trace(R)):
        W_ref, _ = optimal_weights(R, cs, np.zeros(M))
    else:
        W_ref = cs.Q.copy()
    return BeamformingProblem(M, doas, powers, float(beam["sensor_noise"]), cs, noise, W_ref)


@dataclass(frozen=True)
class BeamPattern:
    """Gain in dB relative to the look direction; ``degenerate`` if that is zero."""

    angles_deg: np.ndarray
    gain_db: np.ndarray
    degenerate: bool

    def at(self, angle_deg: float) -> float:
        return float(np.interp(angle_deg, self.angles_deg, self.gain_db))


def beampattern(W, grid_deg=None, look_deg: float = 0.0) -> BeamPattern:
    """``20 log10 |a(theta)^T W|`` normalized to the look direction.

    When the look-direction response vanishes the raw (unnormalized) pattern
    is returned with ``degenerate=True``.
    """
    W = np.asarray(W, dtype=float)
    grid = np.linspace(-90, 90, 361) if grid_deg is None else np.asarray(grid_deg, dtype=float)
    if np.any(np.abs(grid) > 90):
        raise ConfigurationError("beampattern angles must lie in [-90, 90]")
    M = W.shape[0]
    resp = np.abs(steering(grid, M) @ W)
    ref = abs(float(steering(look_deg, M) @ W))
    degenerate = not ref > 1e-300 or not np.isfinite(ref)
    with np.errstate(divide="ignore"):
        gain = 20 * np.log10(resp) - (0.0 if degenerate else 20 * np.log10(ref))
    return BeamPattern(grid, gain, degenerate)


def output_power(W, R) -> float:
    """Array output power ``W^T R W``."""
    W = np.asarray(W, dtype=float)
    return float(W @ R @ W)
