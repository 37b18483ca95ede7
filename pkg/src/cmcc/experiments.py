"""Scenario runners: system identification, theory validation, sweeps, arrays.

Every runner takes a :class:`~cmcc.config.ScenarioConfig` and returns
:class:`~cmcc.simulation.ExperimentResult` objects; nothing here writes files.

Fixed quantities of a scenario (input covariance, random constraint matrix)
are drawn from ``SeedSequence(master_seed, spawn_key=(SETUP_KEY, tag))`` so
they stay the same across sweep points while the Monte-Carlo data of point
``p`` uses spawn keys ``(p, run, stream)``.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from . import __version__
from .beamforming import BeamformingProblem, beampattern, make_problem, output_power
from .config import ScenarioConfig, SweepSpec
from .constraints import build_constraints, linear_phase_matrix, random_constraints
from .errors import ConfigurationError, TheoryInapplicableError
from .filters import STEP, init_filter
from .noise import GaussianNoise, NoiseModel
from .simulation import ExperimentResult, SysIdProblem, generate_block, simulate, summarize, to_db
from .theory import TheoryInputs, check_covariance, optimal_weights, steady_state_msd

log = logging.getLogger(__name__)

SETUP_KEY = 2**31 - 1
CALIBRATION_POINT = 2**30
DEVIATION_FLAG_DB = 3.0
CAL_GRID = np.geomspace(1e-5, 1.0, 26)
CAL_BISECTIONS = 30


def _setup_rng(master_seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(SETUP_KEY, tag)))


def make_input_covariance(M: int, source: str = "random-SPD-trace-M", seed=0, R=None) -> np.ndarray:
    """Input covariance for system identification.

    ``"random-SPD-trace-M"`` returns ``V diag(lam) V^T`` with ``V`` a random
    orthogonal matrix and ``lam`` uniform on ``[0.1, 1]`` rescaled so that
    ``tr R = M``. ``seed`` may be an integer or a Generator.
    """
    if M < 2:
        raise ConfigurationError("M must be >= 2")
    if source == "identity":
        return np.eye(M)
    if source == "explicit":
        if R is None:
            raise ConfigurationError("explicit covariance requested without R")
        return check_covariance(R, M)
    if source != "random-SPD-trace-M":
        raise ConfigurationError(f"unknown covariance source {source!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Q, T = np.linalg.qr(rng.standard_normal((M, M)))
    V = Q * np.sign(np.diag(T))
    lam = rng.uniform(0.1, 1.0, M)
    lam *= M / lam.sum()
    R = (V * lam) @ V.T
    return 0.5 * (R + R.T)


def _constraints(cfg: ScenarioConfig, W_true):
    if cfg.constraint_source == "explicit":
        return build_constraints(cfg.C, cfg.f)
    if cfg.constraint_source == "beamforming-linear-phase":
        C = linear_phase_matrix(cfg.M)
        return build_constraints(C, C.T @ W_true + cfg.offset[: C.shape[1]])
    return random_constraints(cfg.M, cfg.K, _setup_rng(cfg.master_seed, 1), W_true=W_true, offset=cfg.offset)


def build_problem(cfg: ScenarioConfig, noise: NoiseModel | None = None):
    """Data generator plus reference weights for a scenario."""
    noise = cfg.noise if noise is None else noise
    if cfg.scenario == "beamforming":
        return make_problem(cfg.M, cfg.beamforming, noise)
    R = make_input_covariance(cfg.M, cfg.R_source, _setup_rng(cfg.master_seed, 0), cfg.R)
    cs = _constraints(cfg, cfg.W_true)
    W_ref, _ = optimal_weights(R, cs, cfg.W_true)
    return SysIdProblem(R=R, cs=cs, W_true=cfg.W_true, noise=noise, W_ref=W_ref)


def _point_noise(noise: NoiseModel, point: dict) -> NoiseModel:
    if "alpha" in point or "gamma" in point:
        noise = replace(noise, **{k: point[k] for k in ("alpha", "gamma") if k in point})
    if "noise_variance" in point:
        v = point["noise_variance"]
        noise = GaussianNoise(v) if isinstance(noise, GaussianNoise) else noise.with_variance(v)
    return noise


def _point_algos(cfg: ScenarioConfig, point: dict, sweep: SweepSpec | None, etas: dict):
    out = []
    for a in cfg.algos:
        hp = a.hp
        if a.label in etas:
            hp = hp.with_(eta=etas[a.label])
        if sweep is not None and a.label in sweep.apply_to:
            hp = hp.with_(**{k: point[k] for k in ("eta", "sigma") if k in point})
        out.append((a.label, a.name, hp))
    return out


def _median_deviation(problem, name, hp, X, d, upto: int) -> np.ndarray:
    """Deviation of the coordinate-wise median weight vector over the batch."""
    state = init_filter(problem.cs, name, hp, batch=X.shape[0])
    step = STEP[name]
    out = np.empty(upto)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(upto):
            state, _ = step(state, X[:, n], d[:, n], hp)
            out[n] = np.sum((np.median(state.W, axis=0) - problem.W_ref) ** 2)
    return out


def _early_db(D: np.ndarray) -> float:
    v = float(np.mean(to_db(D)))
    return v if np.isfinite(v) else np.inf


def calibrate_step_sizes(cfg: ScenarioConfig, problem=None) -> dict:
    """Choose ``eta`` for every ``"calibrate"`` entry to match initial convergence.

    The reference algorithm runs on ``pilot_runs`` pilot repetitions; ``n*`` is
    the first iteration at which the deviation of its median weight vector has
    dropped by ``drop_db``. The matching statistic is the mean over iterations
    ``1..n*`` of that deviation in dB. Each calibrated algorithm gets the
    smallest step size on a logarithmic grid over ``[1e-5, 1]`` whose statistic
    is no larger than the reference's, refined by bisection in ``log eta``.
    If no grid point gets there, the grid point with the smallest statistic is
    used and ``reached`` is False.

    Returns
    -------
    dict
        ``{label: {"eta", "n_star", "target_db", "reached"}}``.
    """
    targets = [a for a in cfg.algos if a.calibrate]
    if not targets:
        return {}
    problem = build_problem(cfg) if problem is None else problem
    cal = cfg.calibration
    ref = cfg.algo(cal["reference"])
    if ref.calibrate:
        raise ConfigurationError("the calibration reference must have a fixed step size")
    pilot = int(cal["pilot_runs"])
    X, d = generate_block(problem, range(pilot), cfg.iterations, cfg.master_seed, CALIBRATION_POINT)
    D = _median_deviation(problem, ref.name, ref.hp, X, d, cfg.iterations)
    D0 = float(np.sum((problem.cs.Q - problem.W_ref) ** 2))
    hit = np.flatnonzero(to_db(D) <= to_db(D0) - float(cal["drop_db"]))
    if hit.size:
        n_star = int(hit[0])
    else:
        n_star = int(np.argmin(D))
        log.warning("reference never dropped %s dB; matching at its minimum (n=%d)", cal["drop_db"], n_star)
    target = _early_db(D[: n_star + 1])

    out = {}
    for a in targets:

        def dev(eta, a=a):
            return _early_db(_median_deviation(problem, a.name, a.hp.with_(eta=float(eta)), X, d, n_star + 1))

        vals = []
        eta = None
        for i, e in enumerate(CAL_GRID):
            vals.append(dev(e))
            if vals[-1] <= target:
                if i == 0:
                    eta = e
                else:
                    lo, hi = np.log(CAL_GRID[i - 1]), np.log(e)
                    for _ in range(CAL_BISECTIONS):
                        mid = 0.5 * (lo + hi)
                        if dev(np.exp(mid)) <= target:
                            hi = mid
                        else:
                            lo = mid
                    eta = float(np.exp(hi))
                break
        reached = eta is not None
        if not reached:
            eta = float(CAL_GRID[int(np.argmin(vals))])
            log.warning("%s cannot match the reference convergence; using eta=%.4g", a.label, eta)
        out[a.label] = {"eta": float(eta), "n_star": n_star, "target_db": target, "reached": reached}
        log.info("calibrated %s: eta=%.6g (n*=%d)", a.label, eta, n_star)
    return out


def _provenance(cfg: ScenarioConfig, point_index: int, **extra) -> dict:
    return {
        "master_seed": cfg.master_seed,
        "config_hash": cfg.config_hash,
        "point_index": point_index,
        "runs": cfg.runs,
        "iterations": cfg.iterations,
        "steady_window": cfg.steady_window,
        "divergence": cfg.divergence,
        "version": __version__,
        **extra,
    }


def _theory(cfg, problem, point, algos, res: ExperimentResult):
    label, _, hp = next(a for a in algos if a[1] == "CMCC")
    try:
        inputs = TheoryInputs(problem.R, problem.cs, problem.W_true, hp.eta, hp.sigma, problem.noise)
        pred = steady_state_msd(inputs)
    except TheoryInapplicableError as exc:
        res.theory_status = f"unavailable: {exc}"
        return
    res.theory_overlay = pred
    sim = res.algos[label].steady_msd_db
    res.theory_status = "ok" if abs(sim - pred.S_db) <= DEVIATION_FLAG_DB else "deviates>3dB"


def _beam_extras(problem: BeamformingProblem, res: ExperimentResult, look_deg: float) -> dict:
    R = problem.R
    patterns = {label: beampattern(a.final_W, look_deg=look_deg) for label, a in res.algos.items()}
    patterns["optimal"] = beampattern(problem.W_ref, look_deg=look_deg)
    power = {label: output_power(a.final_W, R) for label, a in res.algos.items()}
    power["optimal"] = output_power(problem.W_ref, R)
    return {
        "beampattern": patterns,
        "output_power": power,
        "conventions": "SNR/INR relative to unit-variance sensor noise; d(n) = v(n)",
    }


def _run_point(cfg, problem, point_index: int, point: dict, sweep, etas: dict, calibration: dict) -> ExperimentResult:
    algos = _point_algos(cfg, point, sweep, etas)
    runs = simulate(
        problem,
        algos,
        cfg.runs,
        cfg.iterations,
        cfg.master_seed,
        point=point_index,
        chunk=cfg.chunk,
        workers=cfg.workers,
    )
    res = ExperimentResult(
        name=cfg.name,
        scenario=cfg.scenario,
        algos={label: summarize(r, cfg.steady_window, cfg.divergence) for label, r in runs.items()},
        W_ref=problem.W_ref,
        point=dict(point),
        provenance=_provenance(cfg, point_index),
        extras={"calibration": calibration} if calibration else {},
    )
    if cfg.scenario == "theory-validation":
        _theory(cfg, problem, point, algos, res)
    if cfg.scenario == "beamforming":
        res.extras.update(_beam_extras(problem, res, cfg.beamforming["look_deg"]))
    return res


def _calibrated(cfg, problem):
    calibration = calibrate_step_sizes(cfg, problem)
    return {k: v["eta"] for k, v in calibration.items()}, calibration


def run_sysid(cfg: ScenarioConfig) -> ExperimentResult:
    """Single system-identification scenario (sweep settings are ignored)."""
    if cfg.scenario != "sysid":
        raise ConfigurationError(f"run_sysid needs scenario 'sysid', got {cfg.scenario!r}")
    problem = build_problem(cfg)
    etas, calibration = _calibrated(cfg, problem)
    return _run_point(cfg, problem, 0, {}, None, etas, calibration)


def run_beamforming(cfg: ScenarioConfig) -> ExperimentResult:
    """Array scenario; ``extras`` holds beampatterns and output powers."""
    if cfg.scenario != "beamforming":
        raise ConfigurationError(f"run_beamforming needs scenario 'beamforming', got {cfg.scenario!r}")
    problem = build_problem(cfg)
    etas, calibration = _calibrated(cfg, problem)
    return _run_point(cfg, problem, 0, {}, None, etas, calibration)


def run_parameter_sweep(cfg: ScenarioConfig, sweep: SweepSpec | None = None) -> list[ExperimentResult]:
    """One result per sweep point, in order.

    Step sizes marked ``"calibrate"`` are calibrated once on the unswept
    scenario and reused at every point. Theory-validation scenarios carry a
    theory overlay on each point.
    """
    sweep = cfg.sweep if sweep is None else sweep
    if sweep is None:
        raise ConfigurationError("no sweep specified")
    base = build_problem(cfg)
    etas, calibration = _calibrated(cfg, base)
    results = []
    for i, point in enumerate(sweep.points()):
        noise = _point_noise(cfg.noise, point)
        problem = base if noise == cfg.noise else replace(base, noise=noise)
        results.append(_run_point(cfg, problem, i, point, sweep, etas, calibration))
        log.info("%s point %d/%d done", cfg.name, i + 1, len(sweep.points()))
    return results


def run_theory_validation(cfg: ScenarioConfig) -> list[ExperimentResult]:
    """Simulation and steady-state prediction for every sweep point."""
    if cfg.scenario != "theory-validation":
        raise ConfigurationError(f"run_theory_validation needs scenario 'theory-validation', got {cfg.scenario!r}")
    if cfg.sweep is None:
        problem = build_problem(cfg)
        return [_run_point(cfg, problem, 0, {}, None, {}, {})]
    return run_parameter_sweep(cfg)


def run_experiment(cfg: ScenarioConfig) -> list[ExperimentResult]:
    """Dispatch on scenario and sweep presence."""
    if cfg.scenario == "theory-validation":
        return run_theory_validation(cfg)
    if cfg.sweep is not None:
        return run_parameter_sweep(cfg)
    if cfg.scenario == "beamforming":
        return [run_beamforming(cfg)]
    return [run_sysid(cfg)]


def predict(cfg: ScenarioConfig) -> list[dict]:
    """Theory-only rows for the CMCC entry at every sweep point.

    Raises
    ------
    TheoryInapplicableError
        When the noise has no finite variance or a step size is unstable.
    """
    if cfg.scenario == "beamforming":
        raise ConfigurationError("theory predictions are defined for system identification scenarios")
    problem = build_problem(cfg)
    points = cfg.sweep.points() if cfg.sweep else [{}]
    rows = []
    for point in points:
        noise = _point_noise(cfg.noise, point)
        algos = _point_algos(cfg, point, cfg.sweep, {})
        try:
            _, _, hp = next(a for a in algos if a[1] == "CMCC")
        except StopIteration:
            raise ConfigurationError("predict needs a CMCC entry") from None
        pred = steady_state_msd(TheoryInputs(problem.R, problem.cs, problem.W_true, hp.eta, hp.sigma, noise))
        rows.append({"point": point, "eta": hp.eta, "sigma": hp.sigma, "noise": noise.type_name, "prediction": pred})
    return rows
