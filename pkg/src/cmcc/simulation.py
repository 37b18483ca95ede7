"""Batched Monte-Carlo engine shared by every experiment.

Seeding
-------
Run ``r`` of sweep point ``p`` draws its inputs from
``SeedSequence(master_seed, spawn_key=(p, r, 0))`` and its disturbance from
``spawn_key=(p, r, 1)``. Every algorithm in a scenario sees the same data.
Runs are grouped into fixed-size chunks that may execute on a process pool;
the per-run deviation matrices are concatenated in run order before any
reduction, so results do not depend on the number of workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet
from .filters import STEP, HyperParams, init_filter
from .noise import NoiseModel

log = logging.getLogger(__name__)

INPUT_STREAM, NOISE_STREAM = 0, 1


def run_rng(master_seed: int, point: int, run: int, stream: int) -> np.random.Generator:
    """Generator for one (sweep point, run, stream) triple."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(point, run, stream)))


@dataclass(frozen=True)
class SysIdProblem:
    """``d(n) = W*^T X(n) + v(n)`` with ``X(n) ~ N(0, R)``."""

    R: np.ndarray
    cs: ConstraintSet
    W_true: np.ndarray
    noise: NoiseModel
    W_ref: np.ndarray

    def generate(self, rng_x, rng_v, iterations: int):
        L = np.linalg.cholesky(self.R)
        X = rng_x.standard_normal((iterations, self.R.shape[0])) @ L.T
        d = X @ self.W_true + self.noise.sample(rng_v, iterations)
        return X, d


@dataclass(frozen=True)
class AlgoRun:
    """What the engine keeps for one algorithm label (runs in order)."""

    label: str
    name: str
    hp: HyperParams
    msd: np.ndarray  # (runs, iterations), linear deviation after each update
    nonfinite: np.ndarray  # (runs,) bool
    final_W: np.ndarray  # (runs, M)
    initial_msd: float


def generate_block(problem, runs: range, iterations: int, master_seed: int, point: int):
    X = np.empty((len(runs), iterations, problem.cs.M))
    d = np.empty((len(runs), iterations))
    for i, r in enumerate(runs):
        X[i], d[i] = problem.generate(
            run_rng(master_seed, point, r, INPUT_STREAM), run_rng(master_seed, point, r, NOISE_STREAM), iterations
        )
    return X, d


def run_filters(problem, algos, X: np.ndarray, d: np.ndarray):
    """Advance every algorithm over a batch of runs.

    Returns ``{label: (msd, nonfinite, final_W)}`` with ``msd`` of shape
    ``(runs, iterations)``.
    """
    B, N, _ = X.shape
    out = {}
    for label, name, hp in algos:
        state = init_filter(problem.cs, name, hp, batch=B)
        step = STEP[name]
        msd = np.empty((B, N))
        for n in range(N):
            state, _ = step(state, X[:, n], d[:, n], hp)
            diff = state.W - problem.W_ref
            msd[:, n] = np.einsum("bm,bm->b", diff, diff)
        out[label] = (msd, state.diverged.copy(), state.W.copy())
    return out


def _chunk_job(args):
    problem, algos, runs, iterations, master_seed, point = args
    X, d = generate_block(problem, runs, iterations, master_seed, point)
    return run_filters(problem, algos, X, d)


def simulate(
    problem,
    algos,
    runs: int,
    iterations: int,
    master_seed: int,
    point: int = 0,
    chunk: int = 50,
    workers: int = 1,
) -> dict[str, AlgoRun]:
    """Run ``runs`` independent repetitions of every algorithm.

    Parameters
    ----------
    problem : SysIdProblem or BeamformingProblem
        Anything with ``cs``, ``W_ref`` and ``generate(rng_x, rng_v, n)``.
    algos : sequence of (label, name, HyperParams)
    """
    algos = [tuple(a) for a in algos]
    bounds = [range(s, min(s + chunk, runs)) for s in range(0, runs, chunk)]
    jobs = [(problem, algos, b, iterations, master_seed, point) for b in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(j) for j in jobs]
    init = float(np.sum((problem.cs.Q - problem.W_ref) ** 2))
    result = {}
    for label, name, hp in algos:
        result[label] = AlgoRun(
            label=label,
            name=name,
            hp=hp,
            msd=np.concatenate([p[label][0] for p in parts]),
            nonfinite=np.concatenate([p[label][1] for p in parts]),
            final_W=np.concatenate([p[label][2] for p in parts]),
            initial_msd=init,
        )
    return result


def to_db(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return 10.0 * np.log10(x)


@dataclass
class AlgoResult:
    """Per-algorithm summary of a Monte-Carlo experiment.

    ``msd_trace`` is the per-iteration mean deviation over non-diverged runs
    (linear); ``steady_msd`` is the mean of its last ``steady_window`` entries,
    averaged before conversion to dB.
    """

    label: str
    name: str
    hp: HyperParams
    msd_trace: np.ndarray
    steady_msd: float
    diverged_runs: int
    runs: int
    run_steady: np.ndarray  # per-run tail means (all runs)
    diverged: np.ndarray
    final_W: np.ndarray  # mean final weights over non-diverged runs

    @property
    def msd_trace_db(self) -> np.ndarray:
        return to_db(self.msd_trace)

    @property
    def steady_msd_db(self) -> float:
        return float(to_db(self.steady_msd))


def summarize(run: AlgoRun, steady_window: int, divergence="initial") -> AlgoResult:
    """Apply the divergence rule and reduce runs in index order."""
    tail = run.msd[:, -steady_window:].mean(axis=1)
    diverged = run.nonfinite | ~np.isfinite(tail)
    if divergence == "initial":
        diverged |= tail >= run.initial_msd
    elif divergence is not None:
        diverged |= tail >= float(divergence)
    good = ~diverged
    if np.any(good):
        trace = run.msd[good].mean(axis=0)
        steady = float(trace[-steady_window:].mean())
        final_W = run.final_W[good].mean(axis=0)
    else:
        trace = np.full(run.msd.shape[1], np.nan)
        steady = float("nan")
        final_W = np.full(run.final_W.shape[1], np.nan)
    return AlgoResult(
        label=run.label,
        name=run.name,
        hp=run.hp,
        msd_trace=trace,
        steady_msd=steady,
        diverged_runs=int(diverged.sum()),
        runs=int(diverged.size),
        run_steady=tail,
        diverged=diverged,
        final_W=final_W,
    )


@dataclass
class ExperimentResult:
    """One simulated scenario (or one sweep point).

    Attributes
    ----------
    name : str
    scenario : str
    algos : dict of AlgoResult, keyed by label in configuration order
    W_ref : ndarray
        Reference weights the deviation is measured against.
    point : dict
        Sweep coordinates (empty outside sweeps).
    theory_overlay : SteadyStatePrediction or None
    theory_status : str
        ``"ok"``, ``"deviates>3dB"``, ``"unavailable: ..."`` or ``""``.
    provenance : dict
        Master seed, config hash, point index, run and iteration counts.
    extras : dict
        Scenario-specific tables (beampatterns, output power, calibration).
    """

    name: str
    scenario: str
    algos: dict
    W_ref: np.ndarray
    point: dict = field(default_factory=dict)
    theory_overlay: object = None
    theory_status: str = ""
    provenance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(next(iter(self.algos.values())).msd_trace)

    def steady_db(self, label: str) -> float:
        return self.algos[label].steady_msd_db
