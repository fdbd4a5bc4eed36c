"""Command-line interface: cluster, synth, bench.

Exit codes: 0 success, 2 input error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, is_dataclass, replace

import numpy as np

from . import __version__, bench, synth
from .core import OUTLIER, DataMatrix, InputError, PipelineError, RobustKCError
from .fileio import atomic_write, dumps, fingerprint, format_csv, read_csv
from .metrics import evaluate
from .pipeline import AUTO, PipelineConfig, run

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 2, 3

# flag dest -> path into PipelineConfig
FLAG_MAP = {
    "r": ("r",),
    "method": ("method",),
    "seed": ("seed",),
    "max_r": ("max_r",),
    "beta_tilde": ("beta_tilde",),
    "refine": ("refine",),
    "sparse_threshold": ("sparse_threshold",),
    "alpha": ("params", "alpha"),
    "beta": ("params", "beta"),
    "theta": ("params", "theta_override"),
    "gamma": ("params", "gamma_override"),
    "kmeans_restarts": ("kmeans", "restarts"),
    "kmeans_max_iters": ("kmeans", "max_iters"),
    "kmeans_tol": ("kmeans", "tol"),
    "kmeans_seed": ("kmeans", "seed"),
    "normalize_rows": ("kmeans", "normalize_rows"),
    "outlier_mode": ("outliers", "mode"),
    "relative_level": ("outliers", "relative_level"),
    "min_tau": ("outliers", "min_tau"),
    "quantile_level": ("outliers", "quantile_level"),
    "tau": ("outliers", "absolute_tau"),
    "knee_fraction": ("outliers", "knee_fraction"),
    "dimred": ("dimred", "enabled"),
    "alpha_split": ("dimred", "alpha_split"),
    "strict_split": ("dimred", "strict"),
    "assign_fitting_points": ("dimred", "assign_fitting_points"),
    "admm_rho": ("admm", "rho"),
    "admm_max_iters": ("admm", "max_iters"),
    "admm_tol_primal": ("admm", "tol_primal"),
    "admm_tol_dual": ("admm", "tol_dual"),
    "eps_psd": ("admm", "eps_psd"),
}


def _r_value(text: str):
    if text.lower() == AUTO:
        return AUTO
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"r must be an integer or 'auto', got {text!r}") from None


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    # every default is None so we can tell which flags were given explicitly
    g = p.add_argument_group("pipeline")
    g.add_argument("--r", type=_r_value, help="number of clusters or 'auto' (default 2)")
    g.add_argument("--method", choices=["LP", "SDP"])
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--max-r", type=int)
    g.add_argument("--beta-tilde", type=float, help="fraction of points kept for the eigengap estimate")
    g.add_argument("--refine", action="store_const", const=True, help="re-cluster after dropping flagged points")
    g.add_argument("--sparse-threshold", type=int)
    g = p.add_argument_group("kernel parameters")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--theta", type=float, help="override the kernel scale")
    g.add_argument("--gamma", type=float, help="override the offset")
    g = p.add_argument_group("k-means")
    g.add_argument("--kmeans-restarts", type=int)
    g.add_argument("--kmeans-max-iters", type=int)
    g.add_argument("--kmeans-tol", type=float)
    g.add_argument("--kmeans-seed", type=int)
    g.add_argument("--no-normalize-rows", dest="normalize_rows", action="store_const", const=False)
    g = p.add_argument_group("outliers")
    g.add_argument("--outlier-mode", choices=["relative", "quantile", "absolute", "knee"])
    g.add_argument("--relative-level", type=float)
    g.add_argument("--min-tau", type=float)
    g.add_argument("--quantile-level", type=float)
    g.add_argument("--tau", type=float, help="absolute degree threshold (mode=absolute)")
    g.add_argument("--knee-fraction", type=float)
    g = p.add_argument_group("dimensionality reduction")
    g.add_argument("--dimred", action="store_const", const=True)
    g.add_argument("--alpha-split", type=float)
    g.add_argument("--strict-split", action="store_const", const=True)
    g.add_argument("--assign-fitting-points", action="store_const", const=True)
    g = p.add_argument_group("ADMM (SDP)")
    g.add_argument("--admm-rho", type=float)
    g.add_argument("--admm-max-iters", type=int)
    g.add_argument("--admm-tol-primal", type=float)
    g.add_argument("--admm-tol-dual", type=float)
    g.add_argument("--eps-psd", type=float)


def _set_path(d: dict, path: tuple, value) -> None:
    for k in path[:-1]:
        d = d.setdefault(k, {})
    d[path[-1]] = value


def _from_dict(cls, data: dict):
    """Build a (possibly nested) config dataclass, rejecting unknown keys."""
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise InputError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    base = cls()
    kw = {}
    for k, v in data.items():
        cur = getattr(base, k)
        if is_dataclass(cur) and isinstance(v, dict):
            kw[k] = _from_dict(type(cur), v)
        else:
            kw[k] = v
    return replace(base, **kw)


def build_config(args) -> PipelineConfig:
    """Defaults, then the --config file, then explicitly given flags."""
    data: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
    for dest, path in FLAG_MAP.items():
        v = getattr(args, dest, None)
        if v is not None:
            _set_path(data, path, v)
    return _from_dict(PipelineConfig, data)


def _config_snapshot(cfg: PipelineConfig) -> dict:
    return json.loads(dumps(cfg.to_dict()))


def _read_truth(args, Y: np.ndarray):
    if args.truth_column:
        if Y.shape[1] < 2:
            raise InputError("--truth-column needs at least two columns")
        return Y[:, :-1], Y[:, -1]
    if args.truth:
        T, _ = read_csv(args.truth)
        if T.shape[1] != 1:
            raise InputError(f"truth file must have one column, found {T.shape[1]}")
        return Y, T[:, 0]
    return Y, None


def cmd_cluster(args) -> int:
    Y, _ = read_csv(args.input)
    Y, truth = _read_truth(args, Y)
    if truth is not None:
        if truth.size != Y.shape[0]:
            raise InputError(f"truth has {truth.size} labels for {Y.shape[0]} rows")
        if np.any(truth != np.round(truth)):
            raise InputError("truth labels must be integers")
        truth = truth.astype(np.int64)
    cfg = build_config(args)
    data = DataMatrix(Y)
    res = run(data, cfg)
    c = res.result
    rows = [
        {"index": i, "label": int(c.labels[i]), "is_outlier": bool(c.labels[i] == OUTLIER),
         "degree": None if np.isnan(c.degrees[i]) else float(c.degrees[i])}
        for i in range(data.N)
    ]
    out = {
        "theta": res.theta,
        "gamma": res.gamma,
        "tau": c.degree_threshold,
        "r_hat": res.r,
        "n_outliers": int(np.sum(c.labels == OUTLIER)),
        "rows": rows,
        "eval": evaluate(c, truth).as_dict() if truth is not None else None,
        "eigengap": None,
        "solver": None,
        "run_record": {
            "config": _config_snapshot(cfg),
            "dataset_fingerprint": fingerprint(data.points),
            "timings_ms": res.timings,
            "tool_version": __version__,
        },
    }
    if res.eigengap is not None:
        out["eigengap"] = {"r_hat": res.eigengap.r_hat, "laplacian_eigenvalues": res.eigengap.laplacian_eigenvalues.tolist(),
                           "low_confidence": res.eigengap.low_confidence}
    if res.diagnostics is not None:
        d = res.diagnostics
        out["solver"] = {"iterations": d.iterations, "primal_residual": d.primal_residual, "dual_residual": d.dual_residual,
                         "objective": d.objective, "converged": d.converged}
    text = dumps(out) + "\n"
    if args.output and args.output != "-":
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    if bool(args.preset) == bool(args.spec):
        raise InputError("give exactly one of --preset or a spec file")
    if args.preset:
        ds = synth.preset(args.preset, args.seed)
    else:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read spec {args.spec}: {exc}") from exc
        try:
            spec = synth.spec_from_dict(obj)
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad spec: {exc}") from exc
        ds = synth.gen_gmm(spec, args.seed, name=os.path.basename(args.spec))
    header = [f"x{j + 1}" for j in range(ds.data.d)]
    atomic_write(os.path.join(args.out_dir, "data.csv"), format_csv(ds.data.points, header))
    atomic_write(os.path.join(args.out_dir, "truth.csv"), format_csv(ds.true_labels[:, None], ["label"]))
    print(f"wrote {ds.N} rows to {args.out_dir}", file=sys.stderr)
    return EXIT_OK


def _seed_list(text: str) -> list:
    """'0-9' or '0,3,5' or a single integer."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part.strip()[1:]:
                a, b = part.split("-", 1)
                out += list(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    return out


def cmd_bench(args) -> int:
    kw = {}
    if args.algorithms:
        kw["algorithms"] = args.algorithms.split(",")
    rows, spectra = bench.run_suite(args.suite, args.seeds, workers=args.workers, **kw)
    summary = bench.write_suite(args.suite, rows, spectra, args.seeds, args.out_dir)
    for g in summary["groups"]:
        m = g["metrics"]
        acc = m.get("inlier_accuracy", {}).get("mean", float("nan"))
        print(f"{g['dataset']:>20s} {g['param']:>8s} {g['value']:>6g} {g['algorithm']:>11s} inlier={acc:.4f}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustkc", description="Robust kernel clustering with outlier detection.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="cluster the rows of a CSV file")
    c.add_argument("input")
    c.add_argument("--config", help="JSON file with PipelineConfig fields; explicit flags take precedence")
    c.add_argument("--truth", help="CSV with one integer label column (-1 marks outliers)")
    c.add_argument("--truth-column", action="store_true", help="the last input column holds the truth labels")
    c.add_argument("-o", "--output", help="output JSON path (default stdout)")
    _add_pipeline_flags(c)
    c.set_defaults(func=cmd_cluster)

    s = sub.add_parser("synth", help="write a synthetic dataset as data.csv + truth.csv")
    s.add_argument("spec", nargs="?", help="mixture spec JSON")
    s.add_argument("--preset", choices=sorted(synth.PRESETS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("bench", help="run an experiment suite")
    b.add_argument("suite", choices=bench.SUITES)
    b.add_argument("--seeds", type=_seed_list, default=_seed_list("0-9"), help="e.g. 0-9 or 0,1,2")
    b.add_argument("--out-dir", default="bench_out")
    b.add_argument("--algorithms", help="comma-separated subset of " + ",".join(bench.ALGORITHMS))
    b.add_argument("--workers", type=int, help="parallel worker processes (default ROBUSTKC_THREADS or CPU count)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        limit = bench.n_workers() if os.environ.get("ROBUSTKC_THREADS") else None
        if limit is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limit):
                return args.func(args)
        return args.func(args)
    except PipelineError as exc:
        print(f"robustkc: pipeline error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return EXIT_PIPELINE
    except (RobustKCError, ValueError) as exc:
        print(f"robustkc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
