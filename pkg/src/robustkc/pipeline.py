"""End-to-end robust kernel clustering, plus the k-means++ and vanilla SC baselines."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .core import (
    ITERATIVE_THRESHOLD,
    OUTLIER,
    UNLABELED,
    ClusterResult,
    DataMatrix,
    DenoisedMatrix,
    ParameterError,
    PipelineError,
    RobustKCError,
    sym_eigendecompose,
)
from .denoise import AdmmConfig, SolveDiagnostics, lp_denoise, lp_denoise_points, sdp_denoise
from .dimred import SplitProjection, fit_projection, project
from .fileio import fingerprint
from .kernel import ParamConfig, gaussian_kernel, iter_sqdist_blocks, select_gamma, select_theta, truncated_kernel
from .modelselect import EigengapReport, estimate_r
from .outlier import OutlierConfig, degrees, split_outliers
from .spectral import KMeansConfig, embed, kmeans, normalize_rows

AUTO = "auto"


@dataclass(frozen=True)
class DimRedConfig:
    enabled: bool = False
    alpha_split: float = 0.5
    strict: bool = False
    # strict mode only: give fitting-subset points the nearest recovered centroid
    assign_fitting_points: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    r: Union[int, str] = 2
    method: str = "LP"
    params: ParamConfig = field(default_factory=ParamConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    outliers: OutlierConfig = field(default_factory=OutlierConfig)
    dimred: DimRedConfig = field(default_factory=DimRedConfig)
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    seed: int = 0
    max_r: int = 10
    beta_tilde: float = 0.8
    refine: bool = False
    # LP problems larger than this skip the dense kernel and use a sparse radius graph
    sparse_threshold: int = ITERATIVE_THRESHOLD

    def __post_init__(self):
        if self.method not in ("LP", "SDP"):
            raise ParameterError(f"method must be LP or SDP, got {self.method!r}")
        if self.r == AUTO:
            if self.max_r < 1:
                raise ParameterError("r=auto needs max_r >= 1")
            if self.dimred.enabled:
                raise ParameterError("dimensionality reduction needs an explicit r")
        elif not (isinstance(self.r, (int, np.integer)) and self.r >= 1):
            raise ParameterError(f"r must be a positive integer or 'auto', got {self.r!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PipelineResult:
    result: ClusterResult
    eigengap: Optional[EigengapReport]
    diagnostics: Optional[SolveDiagnostics]
    projection: Optional[SplitProjection]
    theta: float
    gamma: float
    timings: dict
    r: int

    @property
    def labels(self) -> np.ndarray:
        return self.result.labels


@contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except (RobustKCError, ValueError, np.linalg.LinAlgError, MemoryError) as exc:
        raise PipelineError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + 1000.0 * (time.perf_counter() - t0)


def _first_appearance_map(labels: np.ndarray) -> dict:
    """Map cluster ids to 1..k in order of first appearance."""
    mapping = {}
    for v in labels:
        if v > 0 and v not in mapping:
            mapping[v] = len(mapping) + 1
    return mapping


def denoise(Y: DataMatrix, theta: float, gamma: float, cfg: PipelineConfig):
    if cfg.method == "LP":
        if Y.N > cfg.sparse_threshold:
            return lp_denoise_points(Y, theta, gamma), None
        return lp_denoise(gaussian_kernel(Y, theta), gamma), None
    return sdp_denoise(gaussian_kernel(Y, theta), gamma, cfg.admm)


def _spectral_labels(X, r: int, kcfg: KMeansConfig):
    U = embed(X, r)
    P = normalize_rows(U) if kcfg.normalize_rows else U
    labels, cost = kmeans(P, r, kcfg)
    return labels, cost, P


def run(Y, cfg: PipelineConfig = PipelineConfig(), cache: Optional[dict] = None) -> PipelineResult:
    """Cluster the rows of Y and flag outliers.

    Rows are processed in lexicographic order so results do not depend on
    the input row order; outputs are mapped back to the caller's order.
    ``cache`` (any dict) memoizes denoised matrices across calls, keyed on
    the data, theta, gamma and solver settings, so e.g. a known-r and an
    AUTO run on the same data share one SDP solve.
    """
    Y = Y if isinstance(Y, DataMatrix) else DataMatrix(Y)
    timings: dict = {}
    N = Y.N
    order = np.lexsort(Y.points.T[::-1])
    Yc = DataMatrix(Y.points[order])

    proj = None
    work_rows = np.arange(N)
    Yw = Yc
    with _stage("dimred", timings):
        if cfg.dimred.enabled and cfg.r != AUTO and Y.d > cfg.r - 1:
            proj = fit_projection(
                Yc, int(cfg.r), cfg.dimred.alpha_split, seed=cfg.seed, strict=cfg.dimred.strict
            )
            if not proj.identity:
                Yw, work_rows = project(Yc, proj)

    with _stage("params", timings):
        p = cfg.params
        if p.theta_override is not None:
            theta = p.theta_override
        elif Yw.N > 1 and np.all(Yw.points == Yw.points[0]):
            # identical points: the kernel is all ones for every scale
            theta = 1.0
        else:
            theta = select_theta(Yw, p)
        gamma = p.gamma_override if p.gamma_override is not None else select_gamma(Yw.d, p.alpha)

    with _stage("denoise", timings):
        key = None
        if cache is not None:
            solver = (cfg.admm, None) if cfg.method == "SDP" else (None, Yw.N > cfg.sparse_threshold)
            key = (fingerprint(Yw.points), float(theta), float(gamma), cfg.method, solver)
        if key is not None and key in cache:
            X, diag = cache[key]
        else:
            X, diag = denoise(Yw, theta, gamma, cfg)
            if key is not None:
                cache[key] = (X, diag)

    report = None
    with _stage("modelselect", timings):
        if cfg.r == AUTO:
            report = estimate_r(X, cfg.beta_tilde, min(cfg.max_r, Yw.N - 1))
            r = report.r_hat
        else:
            r = int(cfg.r)
            if r > Yw.N:
                raise ParameterError(f"r={r} exceeds the number of points {Yw.N}")

    kcfg = replace(cfg.kmeans, seed=int(np.random.SeedSequence([cfg.seed, cfg.kmeans.seed]).generate_state(1)[0]))
    with _stage("spectral", timings):
        labels_w, cost, P = _spectral_labels(X, r, kcfg)

    with _stage("outliers", timings):
        deg = degrees(X)
        split = split_outliers(X, cfg.outliers)
        spectral_w = labels_w.copy()
        if cfg.refine and split.outliers.size and split.inliers.size >= r:
            Xm = X.X
            sub = Xm[split.inliers][:, split.inliers] if sp.issparse(Xm) else np.asarray(Xm)[np.ix_(split.inliers, split.inliers)]
            sub_labels, cost, _ = _spectral_labels(DenoisedMatrix(sub, X.gamma, X.method), r, kcfg)
            spectral_w[split.inliers] = sub_labels
        labels_w = spectral_w.copy()
        labels_w[split.outliers] = OUTLIER

    labels_c = np.full(N, UNLABELED, dtype=np.int64)
    spectral_c = np.full(N, UNLABELED, dtype=np.int64)
    deg_c = np.full(N, np.nan)
    labels_c[work_rows] = labels_w
    spectral_c[work_rows] = spectral_w
    deg_c[work_rows] = deg
    emb_c = np.full((N, P.shape[1]), np.nan)
    emb_c[work_rows] = P

    if proj is not None and proj.strict and cfg.dimred.assign_fitting_points and proj.p2_indices.size:
        Z = Yw.points
        cents = np.array([Z[labels_w == k].mean(axis=0) if np.any(labels_w == k) else np.full(Z.shape[1], np.inf) for k in range(1, r + 1)])
        Z2 = Yc.points[proj.p2_indices] @ proj.basis
        d2 = ((Z2[:, None, :] - cents[None, :, :]) ** 2).sum(-1)
        labels_c[proj.p2_indices] = np.argmin(d2, axis=1) + 1
        spectral_c[proj.p2_indices] = labels_c[proj.p2_indices]

    # flagged points keep their spectral id for the secondary field
    base = np.where(labels_c == OUTLIER, spectral_c, labels_c)
    mapping = _first_appearance_map(base)
    labels_c = np.array([mapping.get(v, v) for v in labels_c], dtype=np.int64)
    spectral_c = np.array([mapping.get(v, v) for v in spectral_c], dtype=np.int64)

    inv = np.empty(N, dtype=np.int64)
    inv[order] = np.arange(N)
    result = ClusterResult(
        labels=labels_c[inv],
        r=r,
        embedding=emb_c[inv],
        kmeans_cost=float(cost),
        degree_threshold=split.tau,
        spectral_labels=spectral_c[inv],
        degrees=deg_c[inv],
    )
    if proj is not None:
        proj = replace(proj, p1_indices=np.sort(order[proj.p1_indices]), p2_indices=np.sort(order[proj.p2_indices]))
    if report is not None:
        report.kept = np.sort(order[work_rows[report.kept]])
    return PipelineResult(result, report, diag, proj, float(theta), float(gamma), timings, r)


def kmeanspp_baseline(Y, r: int, seed: int = 0, restarts: int = 10) -> np.ndarray:
    """k-means++ on the raw points; labels in 1..r, no outlier flags."""
    Y = Y if isinstance(Y, DataMatrix) else DataMatrix(Y)
    labels, _ = kmeans(Y.points, r, KMeansConfig(restarts=restarts, seed=seed))
    return labels


# the truncated kernel is only worth storing sparsely below this fill ratio
SPARSE_KERNEL_FILL = 0.1


def _kernel_fill(points: np.ndarray, theta: float, cutoff: float) -> float:
    limit = -2.0 * theta * theta * np.log(cutoff)
    kept = sum(int(np.count_nonzero(D2 < limit)) for _, D2 in iter_sqdist_blocks(points))
    return kept / float(points.shape[0]) ** 2


def _normalized_kernel_dense(points: np.ndarray, theta: float) -> np.ndarray:
    """D^-1/2 K D^-1/2 filled block by block into a single array."""
    N = points.shape[0]
    S = np.empty((N, N))
    for start, D2 in iter_sqdist_blocks(points):
        np.exp(-D2 / (2.0 * theta * theta), out=S[start : start + D2.shape[0]])
    s = 1.0 / np.sqrt(S.sum(axis=1))
    S *= s[:, None]
    S *= s[None, :]
    return S


def vanilla_sc(Y, r: int, theta: Optional[float] = None, seed: int = 0, params: ParamConfig = ParamConfig(),
               sparse_threshold: int = ITERATIVE_THRESHOLD, cutoff: float = 1e-10) -> np.ndarray:
    """Normalized spectral clustering on the undenoised Gaussian kernel.

    Top-r eigenvectors of D^-1/2 K D^-1/2, rows scaled to unit length, then
    k-means. No outlier flags. Above ``sparse_threshold`` points the kernel
    is truncated at ``cutoff`` and solved with Lanczos if it is actually
    sparse; a mostly full kernel goes to the dense solver, where Lanczos
    stalls on the cluster of eigenvalues near 1.
    """
    Y = Y if isinstance(Y, DataMatrix) else DataMatrix(Y)
    if theta is None:
        theta = select_theta(Y, params)
    if Y.N > sparse_threshold and _kernel_fill(Y.points, theta, cutoff) <= SPARSE_KERNEL_FILL:
        K = truncated_kernel(Y, theta, cutoff)
        deg = np.asarray(K.sum(axis=1)).ravel()
        s = sp.diags(1.0 / np.sqrt(deg))
        S = (s @ K @ s).tocsr()
        S = ((S + S.T) / 2).tocsr()
        _, U = sym_eigendecompose(S, r)
    else:
        S = _normalized_kernel_dense(Y.points, theta)
        _, U = sym_eigendecompose(S, r, iterative=False, overwrite=True)
    labels, _ = kmeans(normalize_rows(U), r, KMeansConfig(seed=seed))
    return labels
