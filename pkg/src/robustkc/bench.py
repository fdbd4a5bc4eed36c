"""Experiment drivers producing tidy results tables.

results.csv (schema version RESULTS_SCHEMA_VERSION) has one row per
(suite, dataset, swept parameter value, seed, algorithm) with columns
RESULTS_COLUMNS. Columns that do not apply to a row are left empty.
spectra.csv (fig9 only) has one row per Laplacian eigenvalue.
summary.json aggregates mean/std per group and validates against
schemas/summary.schema.json.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from . import synth
from .core import ParameterError
from .metrics import evaluate
from .pipeline import AUTO, PipelineConfig, kmeanspp_baseline, run, vanilla_sc

RESULTS_SCHEMA_VERSION = 1
RESULTS_COLUMNS = [
    "schema_version",
    "suite",
    "dataset",
    "param",
    "value",
    "seed",
    "algorithm",
    "n_points",
    "r_true",
    "r_hat",
    "inlier_accuracy",
    "outlier_accuracy",
    "overall_accuracy",
    "merged_accuracy",
    "runtime_s",
]
SPECTRA_COLUMNS = ["schema_version", "dataset", "seed", "index", "eigenvalue"]
METRIC_KEYS = ["inlier_accuracy", "outlier_accuracy", "overall_accuracy", "merged_accuracy", "runtime_s", "r_hat"]

SUITES = ("table3", "fig6", "fig9", "weaksep")
ALGORITHMS = ("robust-sc", "robust-sdp", "kmeans++", "vanilla-sc")
TABLE1 = {"table1-balanced": 3, "table1-unbalanced": 3, "table1-ellipsoidal": 2}

FIG6_DEFAULT = {"r": 15, "s": 5.0, "m": 400, "per_cluster": 400}
FIG6_SWEEPS = {"r": (5, 10, 15, 20, 25), "m": (0, 400, 800, 1200, 1600), "s": (2, 3, 4, 5, 6, 7, 8)}
WEAKSEP_DELTAS = (5.0, 4.0, 3.0, 2.0, 1.0)


@dataclass(frozen=True)
class Cell:
    suite: str
    dataset: str
    param: str
    value: float
    seed: int
    algorithms: tuple


def n_workers() -> int:
    env = os.environ.get("ROBUSTKC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"ROBUSTKC_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _row(cell: Cell, algorithm: str, **kw) -> dict:
    row = dict.fromkeys(RESULTS_COLUMNS, "")
    row.update(
        schema_version=RESULTS_SCHEMA_VERSION,
        suite=cell.suite,
        dataset=cell.dataset,
        param=cell.param,
        value=cell.value,
        seed=cell.seed,
        algorithm=algorithm,
    )
    row.update(kw)
    return row


def _scores(labels, truth) -> dict:
    e = evaluate(labels, truth)
    return dict(inlier_accuracy=e.inlier_accuracy, outlier_accuracy=e.outlier_accuracy, overall_accuracy=e.overall_accuracy)


def _fig6_params(cell: Cell) -> dict:
    p = dict(FIG6_DEFAULT)
    p[cell.param] = type(FIG6_DEFAULT[cell.param])(cell.value)
    return p


def _dataset(cell: Cell):
    if cell.suite in ("table3", "fig9"):
        return synth.preset(cell.dataset, cell.seed), TABLE1[cell.dataset]
    if cell.suite == "fig6":
        p = _fig6_params(cell)
        return synth.gen_simplex(p["r"], p["s"], p["per_cluster"], p["m"], seed=cell.seed), p["r"]
    if cell.suite == "weaksep":
        return synth.gen_weak_separation(delta12=float(cell.value), seed=cell.seed), 6
    raise ParameterError(f"unknown suite {cell.suite!r}")


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def run_cell(cell: Cell, cache: Optional[dict] = None):
    """All algorithms on one (dataset, seed); returns (result rows, spectra rows)."""
    ds, r = _dataset(cell)
    truth = ds.true_labels
    rows, spectra = [], []
    base = dict(n_points=ds.N, r_true=r)
    for alg in cell.algorithms:
        if cell.suite == "fig9":
            res, dt = _timed(run, ds.data, PipelineConfig(r=AUTO, method="SDP", seed=cell.seed), cache)
            rows.append(_row(cell, "robust-sdp", r_hat=res.r, runtime_s=dt, **base, **_scores(res.result, truth)))
            for i, lam in enumerate(res.eigengap.laplacian_eigenvalues, start=1):
                spectra.append(dict(schema_version=RESULTS_SCHEMA_VERSION, dataset=cell.dataset, seed=cell.seed, index=i, eigenvalue=float(lam)))
        elif cell.suite == "weaksep":
            res, dt = _timed(run, ds.data, PipelineConfig(r=AUTO, method="SDP" if alg == "robust-sdp" else "LP", seed=cell.seed), cache)
            merged_acc = evaluate(res.result, merged_truth(truth)).inlier_accuracy
            rows.append(_row(cell, alg, r_hat=res.r, merged_accuracy=merged_acc, runtime_s=dt, **base, **_scores(res.result, truth)))
        elif alg in ("robust-sc", "robust-sdp"):
            method = "SDP" if alg == "robust-sdp" else "LP"
            res, dt = _timed(run, ds.data, PipelineConfig(r=r, method=method, seed=cell.seed), cache)
            rows.append(_row(cell, alg, r_hat=r, runtime_s=dt, **base, **_scores(res.result, truth)))
        elif alg == "kmeans++":
            labels, dt = _timed(kmeanspp_baseline, ds.data, r, seed=cell.seed)
            rows.append(_row(cell, alg, r_hat=r, runtime_s=dt, **base, **_scores(labels, truth)))
        elif alg == "vanilla-sc":
            labels, dt = _timed(vanilla_sc, ds.data, r, seed=cell.seed)
            rows.append(_row(cell, alg, r_hat=r, runtime_s=dt, **base, **_scores(labels, truth)))
        else:
            raise ParameterError(f"unknown algorithm {alg!r}")
    return rows, spectra


def suite_cells(suite: str, seeds: Sequence[int], algorithms: Optional[Sequence[str]] = None, sweeps: Optional[dict] = None,
                deltas: Optional[Sequence[float]] = None) -> list:
    if suite not in SUITES:
        raise ParameterError(f"unknown suite {suite!r}; choose from {list(SUITES)}")
    if algorithms is not None:
        bad = [a for a in algorithms if a not in ALGORITHMS]
        if bad:
            raise ParameterError(f"unknown algorithms {bad}; choose from {list(ALGORITHMS)}")
    cells = []
    if suite == "table3":
        algs = tuple(algorithms or ALGORITHMS)
        for name in TABLE1:
            cells += [Cell(suite, name, "", 0, s, algs) for s in seeds]
    elif suite == "fig9":
        for name in TABLE1:
            cells += [Cell(suite, name, "", 0, s, ("robust-sdp",)) for s in seeds]
    elif suite == "fig6":
        algs = tuple(algorithms or ("robust-sc", "kmeans++", "vanilla-sc"))
        for param, values in (sweeps or FIG6_SWEEPS).items():
            if param not in FIG6_DEFAULT:
                raise ParameterError(f"cannot sweep {param!r}")
            for v in values:
                for s in seeds:
                    cells.append(Cell(suite, "simplex", param, v, s, algs))
    elif suite == "weaksep":
        algs = tuple(algorithms or ("robust-sdp",))
        for dv in deltas or WEAKSEP_DELTAS:
            cells += [Cell(suite, "weaksep", "delta12", dv, s, algs) for s in seeds]
    return cells


def _run_cell_capped(cell: Cell):
    from threadpoolctl import threadpool_limits

    with threadpool_limits(1):
        return run_cell(cell)


def run_suite(suite: str, seeds: Sequence[int], workers: Optional[int] = None, cache: Optional[dict] = None, **kw):
    """Run every cell of a suite; returns (rows, spectra) in cell order."""
    cells = suite_cells(suite, seeds, **kw)
    workers = n_workers() if workers is None else workers
    if workers <= 1 or len(cells) <= 1:
        # the fig6 default point appears in every sweep; compute it once
        memo, out = {}, []
        for c in cells:
            key = (tuple(sorted(_fig6_params(c).items())), c.seed, c.algorithms) if c.suite == "fig6" else c
            if key not in memo:
                memo[key] = run_cell(c, cache)
            rows, spectra = memo[key]
            out.append(([dict(r, param=c.param, value=c.value) for r in rows], spectra))
    else:
        # one BLAS thread per worker so processes do not oversubscribe cores
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_run_cell_capped, cells))
    rows = [r for o in out for r in o[0]]
    spectra = [s for o in out for s in o[1]]
    return rows, spectra


def summarize(suite: str, rows: list, seeds: Sequence[int]) -> dict:
    groups: dict = {}
    for row in rows:
        key = (row["dataset"], row["param"], row["value"], row["algorithm"])
        groups.setdefault(key, []).append(row)
    out = []
    for (dataset, param, value, alg), grp in groups.items():
        stats = {}
        for k in METRIC_KEYS:
            vals = [float(g[k]) for g in grp if g[k] != ""]
            if vals:
                stats[k] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
        if grp[0]["r_true"] != "":
            stats["r_hat_correct"] = int(sum(1 for g in grp if g["r_hat"] == g["r_true"]))
        out.append({"dataset": dataset, "param": param, "value": float(value), "algorithm": alg, "n_seeds": len(grp), "metrics": stats})
    from . import __version__

    return {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "suite": suite,
        "seeds": [int(s) for s in seeds],
        "tool_version": __version__,
        "groups": out,
    }


def summary_schema() -> dict:
    text = resources.files("robustkc").joinpath("schemas/summary.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_summary(summary: dict) -> None:
    import jsonschema

    jsonschema.validate(summary, summary_schema())


def rows_to_csv(rows: list, columns: list) -> str:
    lines = [",".join(columns)]
    for row in rows:
        vals = []
        for c in columns:
            v = row[c]
            vals.append("%.17g" % v if isinstance(v, float) else str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def write_suite(suite: str, rows: list, spectra: list, seeds: Sequence[int], out_dir: str) -> dict:
    from .fileio import atomic_write, write_json

    summary = summarize(suite, rows, seeds)
    validate_summary(summary)
    os.makedirs(out_dir, exist_ok=True)
    atomic_write(os.path.join(out_dir, "results.csv"), rows_to_csv(rows, RESULTS_COLUMNS))
    if spectra:
        atomic_write(os.path.join(out_dir, "spectra.csv"), rows_to_csv(spectra, SPECTRA_COLUMNS))
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def merged_truth(truth: np.ndarray) -> np.ndarray:
    """Ground truth with clusters 1 and 2 merged (outliers unchanged)."""
    t = np.asarray(truth)
    return np.where(t == 2, 1, t)

