"""Scenario configuration: JSON schema, validation and run-size profiles.

A scenario file looks like::

    {
      "name": "fig4a",
      "scenario": "sysid",
      "M": 7, "K": 3,
      "W_true": "paper-default",
      "noise": {"type": "mixed-gaussian", "var1": 0.01, "var2": 100, "theta": 0.05},
      "algos": [{"name": "CMCC", "eta": 0.012, "sigma": 2.0},
                {"name": "CLMS", "eta": "calibrate"}],
      "runs": 500, "iterations": 3000, "steady_window": 200,
      "master_seed": 2024
    }

Optional keys are documented on :class:`ScenarioConfig`. The environment
variable ``CMCC_MASTER_SEED`` overrides ``master_seed``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigurationError
from .filters import ALGORITHMS, HyperParams
from .noise import NoiseModel, noise_from_dict

SEED_ENV = "CMCC_MASTER_SEED"
SCENARIOS = ("sysid", "theory-validation", "beamforming")
CONSTRAINT_SOURCES = ("random-seeded", "explicit", "beamforming-linear-phase")
R_SOURCES = ("random-SPD-trace-M", "explicit", "identity")
SWEEP_AXES = ("sigma", "eta", "alpha", "gamma", "noise_variance")
PROFILES = {"paper": (1, 1), "fast": (10, 3)}  # (runs divisor, iterations divisor)

#: Unknown system used throughout the identification experiments.
PAPER_W_STAR = (0.332, -0.040, -0.094, 0.717, -0.652, -0.072, 0.580)


@dataclass(frozen=True)
class AlgoSpec:
    """One algorithm entry; ``calibrate`` marks ``"eta": "calibrate"``."""

    name: str
    hp: HyperParams
    calibrate: bool = False
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self.name)


@dataclass(frozen=True)
class SweepSpec:
    """Sweep axes.

    ``axes`` maps axis names to value lists combined as a cartesian product
    (first axis slowest). ``paired`` lists values that ride along with the
    single product axis, one per point (e.g. a step size per bandwidth).
    ``apply_to`` names the algorithm labels that ``eta``/``sigma`` act on.
    """

    axes: dict
    paired: dict = field(default_factory=dict)
    apply_to: tuple = ("CMCC",)

    def points(self) -> list[dict]:
        names = list(self.axes)
        grids = np.meshgrid(*[np.asarray(self.axes[k], dtype=float) for k in names], indexing="ij")
        flat = [g.ravel() for g in grids]
        pts = [{k: float(v[i]) for k, v in zip(names, flat)} for i in range(flat[0].size)]
        for k, vals in self.paired.items():
            for p, v in zip(pts, vals):
                p[k] = float(v)
        return pts


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario.

    Besides the fields in the module example, the optional keys are:

    ``constraint_source`` / ``C`` / ``f``
        ``"random-seeded"`` (default), ``"explicit"`` with ``C`` and ``f``,
        or ``"beamforming-linear-phase"``.
    ``offset``
        Added to ``f = C^T W*`` for random constraints (scalar or length K).
    ``R_source`` / ``R``
        ``"random-SPD-trace-M"`` (default), ``"identity"`` or ``"explicit"``.
    ``sweep``
        ``{"axes": {...}, "paired": {...}, "apply_to": [...]}``.
    ``divergence``
        ``"initial"``: a run diverged if its weights went non-finite or its
        tail-mean deviation is at least its initial deviation; a number uses
        that linear threshold instead; ``null`` counts non-finite runs only.
    ``calibration``
        ``{"reference": "CMCC", "drop_db": 10, "pilot_runs": 50}``.
    ``beamforming``
        ``{"look_deg": 0, "interferer_deg": [-25, 30, 60], "snr_db": 0,
        "inr_db": 10, "sensor_noise": 1.0, "look_constraint": true}``.
    ``chunk`` / ``workers``
        Runs per work unit and process count.
    """

    name: str
    scenario: str
    M: int
    K: int
    W_true: np.ndarray | None
    constraint_source: str
    C: np.ndarray | None
    f: np.ndarray | None
    offset: np.ndarray
    R_source: str
    R: np.ndarray | None
    noise: NoiseModel
    algos: tuple
    runs: int
    iterations: int
    steady_window: int
    master_seed: int
    sweep: SweepSpec | None = None
    divergence: Any = "initial"
    calibration: dict = field(default_factory=dict)
    beamforming: dict = field(default_factory=dict)
    chunk: int = 50
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the effective configuration."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def algo(self, label: str) -> AlgoSpec:
        for a in self.algos:
            if a.label == label:
                return a
        raise ConfigurationError(f"no algorithm labelled {label!r}")

    def with_(self, **changes) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        for k, v in changes.items():
            if k in ("runs", "iterations", "master_seed", "steady_window"):
                raw[k] = v
        return replace(self, raw=raw, **changes)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _int(d, key, default=None, minimum=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigurationError(f"missing required key {key!r}")
    if isinstance(v, bool) or not float(v).is_integer():
        raise ConfigurationError(f"{key} must be an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigurationError(f"{key} must be >= {minimum}, got {v}")
    return v


def _algo(entry: dict) -> AlgoSpec:
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigurationError(f"algorithm entry needs a 'name': {entry!r}")
    entry = dict(entry)
    name = str(entry.pop("name")).upper()
    if name not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    label = str(entry.pop("label", name))
    calibrate = entry.get("eta") == "calibrate"
    if calibrate:
        if name not in ("CLMS", "CAP", "CMCC"):
            raise ConfigurationError(f"{name} has no step size to calibrate")
        entry["eta"] = 0.0
    known = {"eta", "sigma", "L", "lambda_ff", "delta", "eps_ap"}
    unknown = set(entry) - known
    if unknown:
        raise ConfigurationError(f"unknown hyper-parameters for {name}: {sorted(unknown)}")
    try:
        hp = HyperParams(**{k: (int(v) if k == "L" else float(v)) for k, v in entry.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad hyper-parameters for {name}: {exc}") from exc
    return AlgoSpec(name=name, hp=hp, calibrate=calibrate, label=label)


def _sweep(d) -> SweepSpec | None:
    if d is None:
        return None
    if not isinstance(d, dict) or not d.get("axes"):
        raise ConfigurationError("sweep needs a non-empty 'axes' mapping")
    axes = {}
    for k, vals in d["axes"].items():
        if k not in SWEEP_AXES:
            raise ConfigurationError(f"unknown sweep axis {k!r}; expected one of {SWEEP_AXES}")
        vals = list(vals) if isinstance(vals, (list, tuple)) else [vals]
        if not vals:
            raise ConfigurationError(f"sweep axis {k!r} has no values")
        axes[k] = [float(v) for v in vals]
    paired = {}
    for k, vals in (d.get("paired") or {}).items():
        if k not in SWEEP_AXES:
            raise ConfigurationError(f"unknown paired axis {k!r}")
        paired[k] = [float(v) for v in vals]
    spec = SweepSpec(axes=axes, paired=paired, apply_to=tuple(d.get("apply_to", ("CMCC",))))
    n = len(spec.points())
    for k, vals in paired.items():
        if len(vals) != n:
            raise ConfigurationError(f"paired axis {k!r} has {len(vals)} values for {n} sweep points")
    return spec


def parse_config(d: dict, *, profile: str = "paper", seed_env: bool = True) -> ScenarioConfig:
    """Validate a scenario dict and apply the run-size profile.

    Raises
    ------
    ConfigurationError
        On any missing, unknown or inconsistent field.
    """
    if not isinstance(d, dict):
        raise ConfigurationError("configuration must be a JSON object")
    raw = copy.deepcopy(d)
    scenario = d.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigurationError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    M = _int(d, "M", 7, minimum=2)
    K = _int(d, "K", 3, minimum=1)

    W = d.get("W_true", "paper-default")
    if scenario == "beamforming":
        W = None
    elif W == "paper-default":
        W = np.array(PAPER_W_STAR)
    else:
        W = np.asarray(W, dtype=float)
    if W is not None and W.shape != (M,):
        raise ConfigurationError(f"W_true must have length M={M}, got shape {W.shape}")

    default_cs = "beamforming-linear-phase" if scenario == "beamforming" else "random-seeded"
    source = d.get("constraint_source", default_cs)
    if source not in CONSTRAINT_SOURCES:
        raise ConfigurationError(f"constraint_source must be one of {CONSTRAINT_SOURCES}")
    C = f = None
    if source == "explicit":
        if "C" not in d or "f" not in d:
            raise ConfigurationError("explicit constraints need 'C' and 'f'")
        C = np.asarray(d["C"], dtype=float)
        f = np.atleast_1d(np.asarray(d["f"], dtype=float))
        if C.shape != (M, K) or f.shape != (K,):
            raise ConfigurationError(f"explicit C must be {M}x{K} and f length {K}")
    if source == "beamforming-linear-phase" and (M % 2 == 0 or M < 3):
        raise ConfigurationError("linear-phase constraints need an odd M >= 3")
    if scenario == "beamforming" and source != "beamforming-linear-phase":
        raise ConfigurationError("beamforming uses the linear-phase constraint source")
    if source != "beamforming-linear-phase" and not K < M:
        raise ConfigurationError(f"need K < M, got K={K}, M={M}")
    offset = np.broadcast_to(np.asarray(d.get("offset", 0.0), dtype=float), (K,)).copy()

    R_source = d.get("R_source", "random-SPD-trace-M")
    if R_source not in R_SOURCES:
        raise ConfigurationError(f"R_source must be one of {R_SOURCES}")
    R = None
    if R_source == "explicit":
        if "R" not in d:
            raise ConfigurationError("explicit R_source needs 'R'")
        R = np.asarray(d["R"], dtype=float)

    if "noise" not in d:
        raise ConfigurationError("missing 'noise'")
    noise = noise_from_dict(d["noise"])
    algos = tuple(_algo(a) for a in d.get("algos", []))
    if not algos:
        raise ConfigurationError("'algos' must list at least one algorithm")
    labels = [a.label for a in algos]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(f"duplicate algorithm labels: {labels}")
    if scenario == "theory-validation" and "CMCC" not in [a.name for a in algos]:
        raise ConfigurationError("theory-validation needs a CMCC entry")

    if profile not in PROFILES:
        raise ConfigurationError(f"profile must be one of {sorted(PROFILES)}")
    rdiv, idiv = PROFILES[profile]
    runs = max(1, _int(d, "runs", 500, minimum=1) // rdiv)
    iterations = max(2, _int(d, "iterations", 3000, minimum=2) // idiv)
    steady_window = _int(d, "steady_window", 200, minimum=1)
    if profile != "paper":
        steady_window = min(steady_window, iterations // 2)
    if not iterations > steady_window:
        raise ConfigurationError(f"iterations ({iterations}) must exceed steady_window ({steady_window})")
    seed = _int(d, "master_seed", 0, minimum=0)
    if seed_env and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigurationError(f"{SEED_ENV} must be an integer") from exc

    sweep = _sweep(d.get("sweep"))
    if sweep is not None:
        names = set(sweep.axes) | set(sweep.paired)
        if {"alpha", "gamma"} & names and noise.type_name != "alpha-stable":
            raise ConfigurationError("alpha/gamma sweeps need alpha-stable noise")
        unknown = set(sweep.apply_to) - set(labels)
        if unknown:
            raise ConfigurationError(f"sweep apply_to names unknown algorithms: {sorted(unknown)}")

    divergence = d.get("divergence", "initial" if scenario != "beamforming" else None)
    if not (divergence is None or divergence == "initial" or isinstance(divergence, (int, float))):
        raise ConfigurationError("divergence must be 'initial', a number or null")

    calibration = {"reference": "CMCC", "drop_db": 10.0, "pilot_runs": 50, **(d.get("calibration") or {})}
    if any(a.calibrate for a in algos) and calibration["reference"] not in labels:
        raise ConfigurationError(f"calibration reference {calibration['reference']!r} is not configured")
    beam = {
        "look_deg": 0.0,
        "interferer_deg": [-25.0, 30.0, 60.0],
        "snr_db": 0.0,
        "inr_db": 10.0,
        "sensor_noise": 1.0,
        "look_constraint": True,
        **(d.get("beamforming") or {}),
    }
    for ang in [beam["look_deg"], *beam["interferer_deg"]]:
        if not -90 <= ang <= 90:
            raise ConfigurationError(f"angles must lie in [-90, 90], got {ang}")

    known = {
        "name", "scenario", "M", "K", "W_true", "constraint_source", "C", "f", "offset", "R_source", "R",
        "noise", "algos", "runs", "iterations", "steady_window", "master_seed", "sweep", "divergence",
        "calibration", "beamforming", "chunk", "workers", "description",
    }  # fmt: skip
    unknown = set(d) - known
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")

    raw.update(runs=runs, iterations=iterations, steady_window=steady_window, master_seed=seed)
    # scheduling knobs do not change results, so they stay out of the hash
    raw.pop("workers", None)
    raw.pop("chunk", None)
    return ScenarioConfig(
        name=str(d.get("name", scenario)),
        scenario=scenario,
        M=M,
        K=K,
        W_true=W,
        constraint_source=source,
        C=C,
        f=f,
        offset=offset,
        R_source=R_source,
        R=R,
        noise=noise,
        algos=algos,
        runs=runs,
        iterations=iterations,
        steady_window=steady_window,
        master_seed=seed,
        sweep=sweep,
        divergence=divergence,
        calibration=calibration,
        beamforming=beam,
        chunk=_int(d, "chunk", 50, minimum=1),
        workers=_int(d, "workers", 1, minimum=1),
        raw=raw,
    )


def load_config(path, *, profile: str = "paper") -> ScenarioConfig:
    """Read and validate a scenario JSON file.

    Raises
    ------
    ConfigurationError
        If the file is missing, is not valid JSON or fails validation.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(d, profile=profile)


def bundled_config_path(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``"fig4a"``."""
    p = Path(__file__).parent / "configs" / f"{name}.json"
    if not p.exists():
        raise ConfigurationError(f"no bundled config named {name!r}")
    return p
