"""Command-line front end.

Commands::

    cmcc run CONFIG          simulate a scenario (sweeps included)
    cmcc sweep CONFIG        same, but the config must define a sweep
    cmcc predict CONFIG      steady-state theory only
    cmcc beampattern CONFIG  array scenario and its beampatterns
    cmcc validate CONFIG     check the config and the CMCC step-size bound

Exit status: 0 success, 1 runtime error, 2 unreadable or invalid config,
3 theory not applicable or step size beyond the stability bound. Failures print
one JSON object on stderr: ``{"error": ..., "exit": ..., "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ScenarioConfig, load_config
from .errors import CMCCError, ConfigurationError, TheoryInapplicableError
from .experiments import build_problem, predict, run_experiment
from .io import write_beampattern_csv, write_predict_csv, write_summary_csv, write_svg_from_csv, write_trace_csv
from .theory import stability_bound

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_THEORY = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cmcc", description="Constrained correntropy adaptive filtering experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "predict", "beampattern", "validate"):
        s = sub.add_parser(name)
        s.add_argument("config", type=Path)
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        s.add_argument("--profile", choices=("paper", "fast"), default="paper")
        s.add_argument("--plot", action="store_true", help="also write SVG figures")
        s.add_argument("--workers", type=int, default=None, help="process count for Monte-Carlo runs")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _fail(kind: str, code: int, message: str) -> int:
    print(json.dumps({"error": kind, "exit": code, "message": message}), file=sys.stderr)
    return code


def _svg(csv_path: Path, kind: str) -> None:
    write_svg_from_csv(csv_path, csv_path.with_suffix(".svg"), kind)


def _cmd_run(cfg: ScenarioConfig, args) -> int:
    results = run_experiment(cfg)
    out = args.out
    sweep = len(results) > 1 or cfg.sweep is not None
    for i, res in enumerate(results):
        stem = f"{cfg.name}_p{i}" if sweep else cfg.name
        path = write_trace_csv(res, out / f"{stem}_trace.csv")
        if args.plot:
            _svg(path, "trace")
        if "beampattern" in res.extras:
            bp = write_beampattern_csv(res, out / f"{stem}_beampattern.csv")
            if args.plot:
                _svg(bp, "beampattern")
        prefix = f"[{';'.join(f'{k}={v:g}' for k, v in res.point.items())}] " if res.point else ""
        for label, a in res.algos.items():
            print(f"{prefix}{label}: steady_msd={a.steady_msd_db:.2f} dB diverged_runs={a.diverged_runs}/{a.runs}")
        if res.theory_status:
            th = f"{res.theory_overlay.S_db:.2f} dB " if res.theory_overlay is not None else ""
            print(f"{prefix}theory: {th}({res.theory_status})")
    summary = write_summary_csv(results, out / f"{cfg.name}_summary.csv")
    if args.plot and sweep:
        _svg(summary, "summary")
    return EXIT_OK


def _cmd_predict(cfg: ScenarioConfig, args) -> int:
    rows = predict(cfg)
    write_predict_csv(rows, args.out / f"{cfg.name}_predict.csv")
    for r in rows:
        p = r["prediction"]
        print(f"eta={r['eta']:g} sigma={r['sigma']:g}: S={p.S_db:.2f} dB Eg={p.Eg:.6f} Eg2={p.Eg2:.6f} eta_max={p.eta_max:.6f}")
    return EXIT_OK


def _cmd_validate(cfg: ScenarioConfig, args) -> int:
    problem = build_problem(cfg)
    eta_max = stability_bound(problem.R, problem.cs)
    etas = []
    for a in cfg.algos:
        if a.name == "CMCC" and not a.calibrate:
            etas.append((a.label, a.hp.eta))
            if cfg.sweep and a.label in cfg.sweep.apply_to:
                etas += [(a.label, p["eta"]) for p in cfg.sweep.points() if "eta" in p]
    for label, eta in etas:
        if eta > eta_max:
            return _fail(
                "InstabilityError",
                EXIT_THEORY,
                f"{label} step size eta={eta:g} exceeds the mean-square stability bound "
                f"2/(2 lambda_max + tr(PRP)) = {eta_max:.6g}",
            )
    print(f"{cfg.name}: valid ({cfg.scenario}, {cfg.runs} runs x {cfg.iterations} iterations, eta_max={eta_max:.6g})")
    return EXIT_OK


def _cmd_beampattern(cfg: ScenarioConfig, args) -> int:
    if cfg.scenario != "beamforming":
        raise ConfigurationError("beampattern needs a beamforming scenario")
    return _cmd_run(cfg, args)


def _cmd_sweep(cfg: ScenarioConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigurationError("sweep needs a config with a 'sweep' block")
    return _cmd_run(cfg, args)


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "predict": _cmd_predict,
    "beampattern": _cmd_beampattern,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, profile=args.profile)
        if args.workers is not None:
            cfg = cfg.with_(workers=max(1, args.workers))
    except ConfigurationError as exc:
        return _fail("ConfigurationError", EXIT_CONFIG, str(exc))
    try:
        return COMMANDS[args.command](cfg, args)
    except TheoryInapplicableError as exc:
        return _fail(type(exc).__name__, EXIT_THEORY, str(exc))
    except CMCCError as exc:
        return _fail(type(exc).__name__, EXIT_ERROR, str(exc))
    except OSError as exc:
        return _fail("OSError", EXIT_ERROR, str(exc))


if __name__ == "__main__":
    sys.exit(main())
