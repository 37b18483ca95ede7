"""CSV and SVG writers.

Numbers are written with ``format(x, ".10g")`` so files are locale independent
and byte-stable. Column layouts are fixed per table:

trace
    ``iteration,msd_db_<label>...``
summary
    ``point,axes,algo,eta,sigma,steady_msd_db,diverged_runs,runs,theory_msd_db,theory_status``
predict
    ``point,axes,noise,eta,sigma,S,S_db,Eg,Eg2,eta_max,path``
beampattern
    ``angle_deg,gain_db_<label>...`` (``optimal`` is the analytic optimum)

SVG figures are rendered from a CSV file alone and embed that CSV in a comment.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

SUMMARY_HEADER = [
    "point", "axes", "algo", "eta", "sigma", "steady_msd_db", "diverged_runs", "runs", "theory_msd_db", "theory_status",
]  # fmt: skip
PREDICT_HEADER = ["point", "axes", "noise", "eta", "sigma", "S", "S_db", "Eg", "Eg2", "eta_max", "path"]


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".10g")


def _axes(point: dict) -> str:
    return ";".join(f"{k}={fmt(v)}" for k, v in point.items())


def _write(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def write_trace_csv(result, path) -> Path:
    labels = list(result.algos)
    traces = [result.algos[k].msd_trace_db for k in labels]
    rows = ([n + 1, *(t[n] for t in traces)] for n in range(result.iterations))
    return _write(path, ["iteration", *(f"msd_db_{k}" for k in labels)], rows)


def summary_rows(results) -> list[list]:
    rows = []
    for i, res in enumerate(results):
        for label, a in res.algos.items():
            theory = ""
            status = ""
            if a.name == "CMCC" and res.theory_status:
                status = res.theory_status
                theory = res.theory_overlay.S_db if res.theory_overlay is not None else "nan"
            rows.append(
                [i, _axes(res.point), label, a.hp.eta if a.name != "CRLS" else "nan", a.hp.sigma if a.name == "CMCC" else "nan",
                 a.steady_msd_db, a.diverged_runs, a.runs, theory, status]
            )  # fmt: skip
    return rows


def write_summary_csv(results, path) -> Path:
    return _write(path, SUMMARY_HEADER, summary_rows(results))


def write_predict_csv(rows, path) -> Path:
    out = []
    for i, r in enumerate(rows):
        p = r["prediction"]
        out.append([i, _axes(r["point"]), r["noise"], r["eta"], r["sigma"], p.S, p.S_db, p.Eg, p.Eg2, p.eta_max, p.path])
    return _write(path, PREDICT_HEADER, out)


def write_beampattern_csv(result, path) -> Path:
    patterns = result.extras["beampattern"]
    labels = list(patterns)
    grid = patterns[labels[0]].angles_deg
    rows = ([a, *(patterns[k].gain_db[i] for k in labels)] for i, a in enumerate(grid))
    return _write(path, ["angle_deg", *(f"gain_db_{k}" for k in labels)], rows)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _figure_from_csv(header, rows, kind: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "cmcc"
    plt.rcParams["svg.fonttype"] = "none"
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if kind in ("trace", "beampattern"):
        x = np.array([float(r[0]) for r in rows])
        for j, name in enumerate(header[1:], start=1):
            y = np.array([float(r[j]) for r in rows])
            ax.plot(x, y, label=name.split("_", 2)[-1], lw=1.0)
        ax.set_xlabel("iteration" if kind == "trace" else "angle (deg)")
        ax.set_ylabel("MSD (dB)" if kind == "trace" else "gain (dB)")
        if kind == "beampattern":
            ax.set_ylim(bottom=max(ax.get_ylim()[0], -80))
    elif kind == "summary":
        by_algo = {}
        for r in rows:
            by_algo.setdefault(r[2], []).append(r)
        for algo, rs in by_algo.items():
            x = np.arange(len(rs))
            ax.plot(x, [float(r[5]) for r in rs], "o-", label=f"{algo} simulated", lw=1.0)
            th = [float(r[8]) if r[8] not in ("", "nan") else np.nan for r in rs]
            if not np.all(np.isnan(th)):
                ax.plot(x, th, "s--", label=f"{algo} theory", lw=1.0)
        first = next(iter(by_algo.values()))
        ax.set_xticks(range(len(first)))
        ax.set_xticklabels([r[1] for r in first], rotation=30, ha="right", fontsize=7)
        ax.set_ylabel("steady-state MSD (dB)")
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    ax.grid(True, lw=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig, plt


def write_svg_from_csv(csv_path, svg_path, kind: str) -> Path:
    """Render ``csv_path`` to SVG; output depends only on the CSV bytes."""
    csv_path, svg_path = Path(csv_path), Path(svg_path)
    header, rows = read_csv(csv_path)
    fig, plt = _figure_from_csv(header, rows, kind)
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    svg = buf.getvalue()
    data = csv_path.read_text(encoding="utf-8").replace("--", "- -")
    comment = f"<!-- data: {csv_path.name}\n{data}-->\n"
    head, sep, rest = svg.partition("<svg")
    svg_path.write_text(head + comment + sep + rest, encoding="utf-8")
    return svg_path
