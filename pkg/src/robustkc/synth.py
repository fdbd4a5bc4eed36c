"""Synthetic mixture datasets with ground-truth labels and outlier flags."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import OUTLIER, DataMatrix, MixtureSpec, ParameterError, stage_rng

# Uniform-noise outliers fill the inlier bounding box scaled by this factor.
DEFAULT_BOX_INFLATION = 2.5


@dataclass
class SyntheticDataset:
    data: DataMatrix
    true_labels: np.ndarray  # 1..r or OUTLIER
    spec: MixtureSpec
    seed: int
    name: str = ""

    @property
    def N(self) -> int:
        return self.data.N


def _bounding_box(points: np.ndarray, inflation: float):
    lo, hi = points.min(axis=0), points.max(axis=0)
    center = (lo + hi) / 2
    half = (hi - lo) * inflation / 2
    return center - half, center + half


def gen_uniform_outliers(bounds, m: int, seed: int = 0, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """m i.i.d. points uniform on the box bounds=(low, high)."""
    low, high = (np.asarray(b, dtype=np.float64) for b in bounds)
    if m < 0:
        raise ParameterError("m must be nonnegative")
    if low.shape != high.shape or np.any(high <= low):
        raise ParameterError("degenerate outlier box")
    if rng is None:
        rng = stage_rng(seed, "outliers")
    return low + (high - low) * rng.random((m, low.size))


def _outliers(model: dict, inliers: np.ndarray, m: int, d: int, rng) -> np.ndarray:
    kind = model.get("kind", "none")
    if m == 0:
        return np.empty((0, d))
    if kind == "uniform":
        if "low" in model:
            bounds = (model["low"], model["high"])
        else:
            bounds = _bounding_box(inliers, model.get("inflation", DEFAULT_BOX_INFLATION))
        return gen_uniform_outliers(bounds, m, rng=rng)
    if kind == "gaussian":
        center = np.asarray(model.get("center", np.zeros(d)), dtype=np.float64)
        return center + model.get("sigma", 10.0) * rng.standard_normal((m, d))
    if kind == "segment":
        # points uniform on a segment between two endpoints
        a = np.asarray(model["start"], dtype=np.float64)
        b = np.asarray(model["end"], dtype=np.float64)
        return a + rng.random((m, 1)) * (b - a)
    raise ParameterError(f"unknown outlier model {kind!r}")


def gen_gmm(spec: MixtureSpec, seed: int = 0, shuffle: bool = True, name: str = "") -> SyntheticDataset:
    """Exact per-cluster counts from the mixture spec, Gaussian noise, then outliers."""
    rng = stage_rng(seed, "gmm")
    blocks, labels = [], []
    for k in range(spec.r):
        nk = int(spec.counts[k])
        w, V = np.linalg.eigh(spec.covariances[k])
        root = V * np.sqrt(np.maximum(w, 0.0))
        blocks.append(spec.means[k] + rng.standard_normal((nk, spec.d)) @ root.T)
        labels.append(np.full(nk, k + 1))
    inliers = np.vstack(blocks) if blocks else np.empty((0, spec.d))
    out = _outliers(spec.outlier_model, inliers, spec.m, spec.d, rng)
    Y = np.vstack([inliers, out])
    t = np.concatenate(labels + [np.full(spec.m, OUTLIER)])
    if shuffle:
        perm = stage_rng(seed, "shuffle").permutation(len(t))
        Y, t = Y[perm], t[perm]
    return SyntheticDataset(DataMatrix(Y), t.astype(np.int64), spec, seed, name)


def _spec(means, covs, counts, m, outlier_model) -> MixtureSpec:
    counts = np.asarray(counts)
    n = int(counts.sum())
    return MixtureSpec(counts / n, np.asarray(means, float), np.asarray(covs, float), n, m, outlier_model, counts)


def table1_balanced_spec(inflation: float = DEFAULT_BOX_INFLATION) -> MixtureSpec:
    I = np.eye(2)
    return _spec([[0, 0], [6, 3], [6, -3]], [I, I, I], [150, 150, 150], 50, {"kind": "uniform", "inflation": inflation})


def table1_unbalanced_spec(inflation: float = DEFAULT_BOX_INFLATION) -> MixtureSpec:
    I = np.eye(2)
    return _spec(
        [[0, 0], [20, 3], [20, -3]], [5 * I, 0.5 * I, 0.5 * I], [500, 150, 150], 50, {"kind": "uniform", "inflation": inflation}
    )


def table1_ellipsoidal_spec(inflation: float = DEFAULT_BOX_INFLATION) -> MixtureSpec:
    # diag entries read as variances
    S = np.diag([20.0, 1.0])
    return _spec([[0, 5], [0, -5]], [S, S], [200, 200], 25, {"kind": "uniform", "inflation": inflation})


def fig1_spec(y_extent: float = 10.0) -> MixtureSpec:
    I = np.eye(2)
    return _spec(
        [[-5, 0], [5, 0]], [I, I], [150, 150], 5, {"kind": "segment", "start": [0.0, -y_extent], "end": [0.0, y_extent]}
    )


def simplex_spec(r: int, s: float, per_cluster: int, m: int, outlier_sigma: float = 10.0, d: Optional[int] = None) -> MixtureSpec:
    if r < 2:
        raise ParameterError("simplex mixture needs r >= 2")
    d = r if d is None else d
    if d < r:
        raise ParameterError("ambient dimension must be at least r")
    means = np.zeros((r, d))
    means[np.arange(r), np.arange(r)] = s
    covs = np.broadcast_to(np.eye(d), (r, d, d)).copy()
    return _spec(means, covs, [per_cluster] * r, m, {"kind": "gaussian", "sigma": outlier_sigma})


def gen_simplex(r: int, s: float, per_cluster: int, m: int, outlier_sigma: float = 10.0, seed: int = 0, d: Optional[int] = None):
    """Clusters at s*e_k with identity covariance; Gaussian outliers at the origin.

    ``d`` zero-pads the means into a higher ambient dimension.
    """
    return gen_gmm(simplex_spec(r, s, per_cluster, m, outlier_sigma, d), seed, name="simplex")


def weak_separation_means(base_sep: float, delta12: float, r: int) -> np.ndarray:
    if r < 2:
        raise ParameterError("need r >= 2")
    if not 0 <= delta12 <= base_sep:
        raise ParameterError("delta12 must lie in [0, base_sep]")
    means = np.zeros((r, r))
    means[np.arange(r), np.arange(r)] = base_sep / np.sqrt(2.0)
    direction = means[1] - means[0]
    means[1] = means[0] + direction * (delta12 / base_sep)
    return means


def gen_weak_separation(
    base_sep: float = 5.0, delta12: float = 5.0, r: int = 6, seed: int = 0, per_cluster: int = 150, m: int = 0
) -> SyntheticDataset:
    """Unit-variance clusters on a simplex, cluster 2 pulled to delta12 from cluster 1."""
    means = weak_separation_means(base_sep, delta12, r)
    covs = np.broadcast_to(np.eye(r), (r, r, r)).copy()
    spec = _spec(means, covs, [per_cluster] * r, m, {"kind": "uniform", "inflation": DEFAULT_BOX_INFLATION})
    return gen_gmm(spec, seed, name="weaksep")


PRESETS = {
    "table1-balanced": lambda seed: gen_gmm(table1_balanced_spec(), seed, name="table1-balanced"),
    "table1-unbalanced": lambda seed: gen_gmm(table1_unbalanced_spec(), seed, name="table1-unbalanced"),
    "table1-ellipsoidal": lambda seed: gen_gmm(table1_ellipsoidal_spec(), seed, name="table1-ellipsoidal"),
    "fig1": lambda seed: gen_gmm(fig1_spec(), seed, name="fig1"),
    "simplex": lambda seed: gen_simplex(15, 5.0, 400, 400, seed=seed),
    "weaksep": lambda seed: gen_weak_separation(5.0, 2.0, 6, seed),
}


def preset(name: str, seed: int = 0) -> SyntheticDataset:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def spec_from_dict(obj: dict) -> MixtureSpec:
    """MixtureSpec from its JSON form (keys: means, covariances, counts or weights+n, m, outlier_model)."""
    means = np.asarray(obj["means"], dtype=np.float64)
    r, d = means.shape
    covs = obj.get("covariances")
    covs = np.broadcast_to(np.eye(d), (r, d, d)).copy() if covs is None else np.asarray(covs, dtype=np.float64)
    m = int(obj.get("m", 0))
    model = obj.get("outlier_model", {"kind": "uniform"} if m else {"kind": "none"})
    if "counts" in obj:
        return _spec(means, covs, obj["counts"], m, model)
    weights = np.asarray(obj.get("weights", np.full(r, 1.0 / r)))
    return MixtureSpec(weights, means, covs, int(obj["n"]), m, model)
