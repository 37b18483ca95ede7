"""Disturbance models: samplers and the moments used by the steady-state theory.

Every model is an immutable dataclass with an output scale factor ``scale``
(the sample actually produced is ``scale * base_draw``). Models are created
either directly or from a JSON-style dict with :func:`noise_from_dict`::

    {"type": "mixed-gaussian", "lambda1": 0, "lambda2": 0,
     "var1": 0.01, "var2": 100, "theta": 0.05}
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, InfiniteMomentError

log = logging.getLogger(__name__)

#: Draw count for Monte-Carlo moments of alpha-stable noise.
ALPHA_STABLE_MOMENT_DRAWS = 1_000_000
_ALPHA_STABLE_MOMENT_SEED = 0x5EED


class Moment(str, Enum):
    """Noise expectations needed by the limiting-gain formulas."""

    GAIN = "gain"  #: E[exp(-v^2 / (2 sigma^2))]
    GAIN_SQ = "gain_sq"  #: E[exp(-v^2 / sigma^2)]
    GAIN_CURV = "gain_curv"  #: E[(v^2/sigma^4 - 1/sigma^2) exp(-v^2 / (2 sigma^2))]
    GAIN_SQ_CURV = "gain_sq_curv"  #: E[(2 v^2/sigma^4 - 1/sigma^2) exp(-v^2 / sigma^2)]
    POWER = "power"  #: E[v^2]


def moment_integrand(kind: Moment, sigma: float):
    """Function ``h`` such that the moment equals ``E[h(v)]``."""
    kind = Moment(kind)
    s2 = sigma * sigma
    s4 = s2 * s2
    if kind is Moment.GAIN:
        return lambda v: np.exp(-v * v / (2 * s2))
    if kind is Moment.GAIN_SQ:
        return lambda v: np.exp(-v * v / s2)
    if kind is Moment.GAIN_CURV:
        return lambda v: (v * v / s4 - 1 / s2) * np.exp(-v * v / (2 * s2))
    if kind is Moment.GAIN_SQ_CURV:
        return lambda v: (2 * v * v / s4 - 1 / s2) * np.exp(-v * v / s2)
    return lambda v: v * v


def _positive(name, value, allow_zero=False):
    ok = value >= 0 if allow_zero else value > 0
    if not (np.isfinite(value) and ok):
        raise ConfigurationError(f"{name} must be {'>= 0' if allow_zero else '> 0'}, got {value}")


class NoiseModel:
    """Common behaviour of the concrete noise dataclasses."""

    type_name: str = ""
    scale: float

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        """Draws multiplied by the output scale factor."""
        out = self.scale * self.draw(rng, 1 if size is None else size)
        return float(out[0]) if size is None else out

    @property
    def variance(self) -> float:
        """E[v^2] of the scaled output (``inf`` when it does not exist)."""
        raise NotImplementedError

    @property
    def is_gaussian(self) -> bool:
        return False

    def pdf(self, v):
        raise NotImplementedError

    def breakpoints(self) -> list:
        """Abscissae where the density is non-smooth or concentrated."""
        return [0.0]

    def with_variance(self, variance: float) -> "NoiseModel":
        """Copy rescaled so that ``E[v^2] == variance``."""
        base = self.variance
        if not np.isfinite(base):
            raise InfiniteMomentError(f"{self.type_name} noise has no finite variance to rescale")
        if base == 0:
            raise ConfigurationError("cannot rescale a zero-variance model")
        return replace(self, scale=self.scale * float(np.sqrt(variance / base)))

    def to_dict(self) -> dict:
        return {"type": self.type_name, **asdict(self)}


@dataclass(frozen=True)
class GaussianNoise(NoiseModel):
    """Zero-mean Gaussian; ``variance=0`` gives a noiseless channel."""

    variance_: float = 1.0
    scale: float = 1.0
    type_name = "gaussian"

    def __post_init__(self):
        _positive("variance", self.variance_, allow_zero=True)
        _positive("scale", self.scale)

    def draw(self, rng, size):
        return np.sqrt(self.variance_) * rng.standard_normal(size)

    @property
    def variance(self):
        return self.variance_ * self.scale**2

    @property
    def is_gaussian(self):
        return True

    def pdf(self, v):
        s2 = self.variance
        return np.exp(-v * v / (2 * s2)) / np.sqrt(2 * np.pi * s2)

    def to_dict(self):
        return {"type": self.type_name, "variance": self.variance_, "scale": self.scale}


@dataclass(frozen=True)
class BinaryNoise(NoiseModel):
    """Equiprobable +-1 before scaling."""

    scale: float = 1.0
    type_name = "binary"

    def __post_init__(self):
        _positive("scale", self.scale)

    def draw(self, rng, size):
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)

    @property
    def variance(self):
        return self.scale**2


@dataclass(frozen=True)
class LaplaceNoise(NoiseModel):
    """Density ``exp(-|v|/b) / (2b)``; variance ``2 b^2``."""

    b: float = 1.0
    scale: float = 1.0
    type_name = "laplace"

    def __post_init__(self):
        _positive("b", self.b)
        _positive("scale", self.scale)

    def draw(self, rng, size):
        return rng.laplace(0.0, self.b, size)

    @property
    def variance(self):
        return 2 * (self.b * self.scale) ** 2

    def pdf(self, v):
        b = self.b * self.scale
        return np.exp(-np.abs(v) / b) / (2 * b)


@dataclass(frozen=True)
class CauchyNoise(NoiseModel):
    """Cauchy with scale ``s``; no finite variance."""

    s: float = 1.0
    scale: float = 1.0
    type_name = "cauchy"

    def __post_init__(self):
        _positive("s", self.s)
        _positive("scale", self.scale)

    def draw(self, rng, size):
        return self.s * rng.standard_cauchy(size)

    @property
    def variance(self):
        return np.inf

    def pdf(self, v):
        s = self.s * self.scale
        return s / (np.pi * (s * s + v * v))


@dataclass(frozen=True)
class MixedGaussianNoise(NoiseModel):
    """``(1 - theta) N(lambda1, var1) + theta N(lambda2, var2)``."""

    lambda1: float = 0.0
    lambda2: float = 0.0
    var1: float = 0.01
    var2: float = 100.0
    theta: float = 0.05
    scale: float = 1.0
    type_name = "mixed-gaussian"

    def __post_init__(self):
        _positive("var1", self.var1)
        _positive("var2", self.var2)
        _positive("scale", self.scale)
        if not 0 <= self.theta <= 1:
            raise ConfigurationError(f"theta must lie in [0, 1], got {self.theta}")

    def draw(self, rng, size):
        z = rng.standard_normal(size)
        outlier = rng.random(size) < self.theta
        return np.where(
            outlier,
            self.lambda2 + np.sqrt(self.var2) * z,
            self.lambda1 + np.sqrt(self.var1) * z,
        )

    @property
    def variance(self):
        t = self.theta
        return self.scale**2 * ((1 - t) * (self.var1 + self.lambda1**2) + t * (self.var2 + self.lambda2**2))

    def pdf(self, v):
        c = self.scale
        out = 0.0
        for w, m, s2 in ((1 - self.theta, self.lambda1, self.var1), (self.theta, self.lambda2, self.var2)):
            m, s2 = c * m, c * c * s2
            out = out + w * np.exp(-((v - m) ** 2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
        return out

    def breakpoints(self):
        c = self.scale
        pts = []
        for m, s2 in ((self.lambda1, self.var1), (self.lambda2, self.var2)):
            sd = c * np.sqrt(s2)
            pts += [c * m - 4 * sd, c * m, c * m + 4 * sd]
        return sorted(set(pts))


@dataclass(frozen=True)
class AlphaStableNoise(NoiseModel):
    """Stable law with characteristic function

    ``exp{j delta t - gamma |t|^alpha [1 + j beta sgn(t) S(t, alpha)]}``,
    ``S = tan(alpha pi / 2)`` for ``alpha != 1`` and ``(2/pi) log|t|`` otherwise.
    ``gamma`` is the dispersion, so the scale parameter is ``gamma**(1/alpha)``.
    """

    alpha: float = 1.5
    beta: float = 0.0
    gamma: float = 1.0
    delta: float = 0.0
    scale: float = 1.0
    type_name = "alpha-stable"

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ConfigurationError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not -1 <= self.beta <= 1:
            raise ConfigurationError(f"beta must lie in [-1, 1], got {self.beta}")
        _positive("gamma", self.gamma)
        _positive("scale", self.scale)
        if not np.isfinite(self.delta):
            raise ConfigurationError("delta must be finite")

    def draw(self, rng, size):
        return stable_cms(self.alpha, self.beta, self.gamma, self.delta, rng, size)

    @property
    def variance(self):
        if self.alpha < 2:
            return np.inf
        return self.scale**2 * (2 * self.gamma + self.delta**2)

    def characteristic_function(self, t):
        """Characteristic function of the unscaled law."""
        t = np.asarray(t, dtype=float)
        a, b, g = self.alpha, self.beta, self.gamma
        absT = np.abs(t)
        if a == 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                S = np.where(absT > 0, 2 / np.pi * np.log(absT), 0.0)
        else:
            S = np.tan(a * np.pi / 2)
        return np.exp(1j * self.delta * t - g * absT**a * (1 + 1j * b * np.sign(t) * S))


def stable_cms(alpha, beta, gamma, delta, rng: np.random.Generator, size) -> np.ndarray:
    """Chambers-Mallows-Stuck draws for :class:`AlphaStableNoise` parameters.

    The skewness sign of the characteristic function above is opposite to the
    usual ``S_alpha(sigma, beta, mu)`` convention when ``alpha != 1`` and the
    same when ``alpha == 1``; ``beta`` is mapped accordingly.
    """
    V = rng.uniform(-np.pi / 2, np.pi / 2, size)
    W = rng.standard_exponential(size)
    if alpha == 1:
        s = gamma
        b = beta
        bV = np.pi / 2 + b * V
        X = 2 / np.pi * (bV * np.tan(V) - b * np.log((np.pi / 2) * W * np.cos(V) / bV))
        return s * X + 2 / np.pi * b * s * np.log(s) + delta
    s = gamma ** (1 / alpha)
    b = -beta
    zeta = b * np.tan(np.pi * alpha / 2)
    B = np.arctan(zeta) / alpha
    S = (1 + zeta * zeta) ** (1 / (2 * alpha))
    X = (
        S
        * np.sin(alpha * (V + B))
        / np.cos(V) ** (1 / alpha)
        * (np.cos(V - alpha * (V + B)) / W) ** ((1 - alpha) / alpha)
    )
    return s * X + delta


_TYPES = {
    cls.type_name: cls
    for cls in (GaussianNoise, BinaryNoise, LaplaceNoise, CauchyNoise, MixedGaussianNoise, AlphaStableNoise)
}


def noise_from_dict(spec: dict) -> NoiseModel:
    """Build a model from ``{"type": ..., **params}``."""
    spec = dict(spec)
    try:
        cls = _TYPES[spec.pop("type")]
    except KeyError as exc:
        raise ConfigurationError(f"unknown or missing noise type in {spec!r}; known: {sorted(_TYPES)}") from exc
    if cls is GaussianNoise and "variance" in spec:
        spec["variance_"] = spec.pop("variance")
    names = {f.name for f in fields(cls)}
    unknown = set(spec) - names
    if unknown:
        raise ConfigurationError(f"unknown {cls.type_name} parameters: {sorted(unknown)}")
    try:
        return cls(**{k: float(v) for k, v in spec.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad {cls.type_name} parameters: {exc}") from exc


def sample(model: NoiseModel, rng: np.random.Generator, size=None):
    """One draw (``size=None``) or an array of draws from ``model``."""
    return model.sample(rng, size)


def monte_carlo_moment(model: NoiseModel, kind: Moment, sigma: float, n: int, rng: np.random.Generator):
    """Sample mean and its standard error for ``E[h(v)]``."""
    h = moment_integrand(kind, sigma)
    vals = h(model.sample(rng, n))
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(n))


def _gaussian_moment(s2: float, kind: Moment, sigma: float) -> float:
    # E[exp(-a v^2)] = (1 + 2 a s2)^(-1/2), E[v^2 exp(-a v^2)] = s2 (1 + 2 a s2)^(-3/2)
    sg2 = sigma * sigma

    def e0(a):
        return (1 + 2 * a * s2) ** -0.5

    def e2(a):
        return s2 * (1 + 2 * a * s2) ** -1.5

    if kind is Moment.GAIN:
        return e0(1 / (2 * sg2))
    if kind is Moment.GAIN_SQ:
        return e0(1 / sg2)
    if kind is Moment.GAIN_CURV:
        a = 1 / (2 * sg2)
        return e2(a) / sg2**2 - e0(a) / sg2
    if kind is Moment.GAIN_SQ_CURV:
        a = 1 / sg2
        return 2 * e2(a) / sg2**2 - e0(a) / sg2
    return s2


def _quadrature(model: NoiseModel, h) -> float:
    # v = tan(t) maps the real line onto (-pi/2, pi/2)
    def integrand(t):
        v = np.tan(t)
        return h(v) * model.pdf(v) / np.cos(t) ** 2

    pts = sorted(set(np.arctan(model.breakpoints())))
    edges = [-np.pi / 2] + pts + [np.pi / 2]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=200)
            total += val
    return float(total)


def noise_moment(model: NoiseModel, kind: Moment | str, sigma: float) -> float:
    """Expectation of one of the :class:`Moment` functionals.

    Closed forms for Gaussian and binary noise, adaptive Gauss-Kronrod
    quadrature over the density for Laplace, Cauchy and mixed Gaussian, and a
    seeded Monte-Carlo average for alpha-stable noise.

    Raises
    ------
    InfiniteMomentError
        For ``Moment.POWER`` of Cauchy or ``alpha < 2`` stable noise.
    """
    kind = Moment(kind)
    if not sigma > 0:
        raise ConfigurationError("sigma must be > 0")
    if kind is Moment.POWER:
        var = model.variance
        if not np.isfinite(var):
            raise InfiniteMomentError(f"{model.type_name} noise has infinite second moment")
        return float(var)
    if isinstance(model, GaussianNoise):
        return float(_gaussian_moment(model.variance, kind, sigma))
    if isinstance(model, BinaryNoise):
        return float(moment_integrand(kind, sigma)(model.scale))
    if isinstance(model, AlphaStableNoise):
        rng = np.random.default_rng(_ALPHA_STABLE_MOMENT_SEED)
        value, se = monte_carlo_moment(model, kind, sigma, ALPHA_STABLE_MOMENT_DRAWS, rng)
        log.debug("alpha-stable %s moment %.6g +- %.2g (MC standard error)", kind.value, value, se)
        return value
    return _quadrature(model, moment_integrand(kind, sigma))
