"""Shared domain types, errors and symmetric linear algebra."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Label value for points flagged as outliers, and for points left out of
# clustering (strict sample-splitting mode).
OUTLIER = -1
UNLABELED = -2

# Above this size the eigensolver switches from dense LAPACK to Lanczos.
ITERATIVE_THRESHOLD = 4000


class RobustKCError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(RobustKCError, ValueError):
    pass


class InputError(RobustKCError, ValueError):
    pass


class DegenerateDataError(InputError):
    pass


class ContractError(RobustKCError, ValueError):
    """A documented precondition on a matrix argument does not hold."""


class SolverError(RobustKCError, RuntimeError):
    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class PipelineError(RobustKCError):
    """Wraps an error raised inside a pipeline stage with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _check_finite(a, what: str) -> None:
    data = a.data if sp.issparse(a) else a
    if not np.all(np.isfinite(data)):
        raise InputError(f"{what} contains NaN or Inf")


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DataMatrix:
    """N x d matrix of observations, one row per point."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InputError(f"points must be a non-empty 2-d array, got shape {pts.shape}")
        _check_finite(pts, "data matrix")
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class KernelMatrix:
    K: np.ndarray
    theta: float

    def __post_init__(self):
        K = np.asarray(self.K, dtype=np.float64)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise InputError("kernel matrix must be square")
        _check_finite(K, "kernel matrix")
        if not self.theta > 0:
            raise ParameterError("theta must be positive")
        object.__setattr__(self, "K", _freeze(K))

    @property
    def N(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class DenoisedMatrix:
    """Estimated clustering matrix.

    ``X`` is a dense array, or a scipy CSR matrix for large LP problems
    where the rounded matrix is built directly from neighbour radii.
    """

    X: object
    gamma: float
    method: str  # "LP" or "SDP"

    def __post_init__(self):
        if self.method not in ("LP", "SDP"):
            raise ParameterError(f"unknown denoising method {self.method!r}")
        if sp.issparse(self.X):
            X = sp.csr_matrix(self.X, dtype=np.float64)
            if X.shape[0] != X.shape[1]:
                raise InputError("clustering matrix must be square")
            _check_finite(X, "clustering matrix")
        else:
            X = np.asarray(self.X, dtype=np.float64)
            if X.ndim != 2 or X.shape[0] != X.shape[1]:
                raise InputError("clustering matrix must be square")
            _check_finite(X, "clustering matrix")
            X = _freeze(X)
        object.__setattr__(self, "X", X)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.X)

    def dense(self) -> np.ndarray:
        return self.X.toarray() if self.is_sparse else np.asarray(self.X)


@dataclass
class ClusterResult:
    labels: np.ndarray
    r: int
    embedding: np.ndarray
    kmeans_cost: float
    degree_threshold: float = 0.0
    # Spectral label kept for points whose primary label is OUTLIER.
    spectral_labels: Optional[np.ndarray] = None
    degrees: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return len(self.labels)

    @property
    def outliers(self) -> np.ndarray:
        return np.flatnonzero(self.labels == OUTLIER)


@dataclass
class MixtureSpec:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    n: int
    m: int = 0
    outlier_model: dict = field(default_factory=lambda: {"kind": "none"})
    counts: Optional[np.ndarray] = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        r, d = self.means.shape
        if self.weights.shape != (r,):
            raise ParameterError("need one mixing weight per mean")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ParameterError("mixing weights must be nonnegative and sum to 1")
        if self.covariances.shape != (r, d, d):
            raise ParameterError(f"covariances must have shape {(r, d, d)}")
        for S in self.covariances:
            if not np.allclose(S, S.T, atol=1e-12):
                raise ParameterError("covariance matrices must be symmetric")
            if np.linalg.eigvalsh(S).min() < -1e-10:
                raise ParameterError("covariance matrices must be PSD")
        if self.n < 0 or self.m < 0:
            raise ParameterError("counts must be nonnegative")
        if self.counts is None:
            self.counts = cluster_counts(self.weights, self.n)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.sum() != self.n or self.counts.shape != (r,):
                raise ParameterError("per-cluster counts must sum to n")

    @property
    def r(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def N(self) -> int:
        return self.n + self.m

    @property
    def delta_min(self) -> float:
        if self.r < 2:
            return float("inf")
        diff = self.means[:, None, :] - self.means[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        return float(dist[np.triu_indices(self.r, 1)].min())

    @property
    def delta_max(self) -> float:
        if self.r < 2:
            return 0.0
        diff = self.means[:, None, :] - self.means[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    @property
    def sigma_max(self) -> float:
        return float(max(np.sqrt(max(np.linalg.eigvalsh(S)[-1], 0.0)) for S in self.covariances))

    @property
    def snr(self) -> float:
        return self.delta_min / self.sigma_max


def cluster_counts(weights: np.ndarray, n: int) -> np.ndarray:
    """Split n into integer counts proportional to weights (largest remainder)."""
    raw = np.asarray(weights) * n
    counts = np.floor(raw).astype(np.int64)
    short = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def stage_rng(seed: int, tag: str) -> np.random.Generator:
    """Independent RNG stream for a named stage of a seeded computation."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(zlib.crc32(tag.encode()),))
    return np.random.default_rng(ss)


def _fix_signs(V: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # first component with |v_i| > tol made positive
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > tol * max(1.0, np.abs(col).max()))
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return V


def _check_symmetric(M, rtol: float = 1e-10) -> None:
    if M.shape[0] != M.shape[1]:
        raise ContractError(f"matrix must be square, got {M.shape}")
    if sp.issparse(M):
        diff = abs(M - M.T).max() if M.nnz else 0.0
        scale = abs(M).max() if M.nnz else 0.0
    else:
        diff = np.abs(M - M.T).max() if M.size else 0.0
        scale = np.abs(M).max() if M.size else 0.0
    if diff > rtol * max(scale, 1e-300):
        raise ContractError(f"matrix is not symmetric (max asymmetry {diff:.3e})")


def sym_eigendecompose(M, k: int, iterative: Optional[bool] = None, seed: int = 0, overwrite: bool = False):
    """Top-k eigenpairs of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and orthonormal eigenvector columns, each sign-normalised so its
    first nonzero entry is positive. Dense LAPACK is used up to
    ``ITERATIVE_THRESHOLD`` rows (or for dense input when ``iterative`` is
    False); sparse or larger inputs go through ARPACK's Lanczos iteration.

    ``overwrite=True`` lets the dense solver destroy ``M`` and read only its
    lower triangle, skipping the symmetry check and the symmetrised copy.
    Meant for large matrices built symmetric by construction.
    """
    N = M.shape[0]
    if not 1 <= k <= N:
        raise ParameterError(f"need 1 <= k <= N, got k={k}, N={N}")
    overwrite = overwrite and not sp.issparse(M) and iterative is False
    if not overwrite:
        _check_symmetric(M)
    if iterative is None:
        iterative = sp.issparse(M) or N > ITERATIVE_THRESHOLD
    if iterative and k >= N - 1:
        iterative = False
    if iterative:
        v0 = np.random.default_rng(seed).uniform(0.5, 1.5, N)
        try:
            w, V = spla.eigsh(M, k=k, which="LA", v0=v0, tol=1e-12, maxiter=max(1000, 20 * N))
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"Lanczos did not converge: {exc}", iterations=max(1000, 20 * N)) from exc
    else:
        if overwrite:
            A = M
        else:
            A = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)
            A = (A + A.T) / 2
        try:
            if k < N:
                w, V = sla.eigh(A, subset_by_index=(N - k, N - 1), driver="evr", overwrite_a=overwrite)
            else:
                w, V = sla.eigh(A, driver="evd", overwrite_a=overwrite)
        except sla.LinAlgError as exc:
            raise SolverError(f"dense eigensolver failed: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = np.ascontiguousarray(V[:, order])
    return w, _fix_signs(V)


def psd_project(M: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues zeroed)."""
    w, V = np.linalg.eigh((M + M.T) / 2)
    pos = w > 0
    if not pos.any():
        return np.zeros_like(M)
    Vp = V[:, pos]
    P = (Vp * w[pos]) @ Vp.T
    return (P + P.T) / 2


def min_eigenvalue(M: np.ndarray) -> float:
    return float(sla.eigh((M + M.T) / 2, eigvals_only=True, subset_by_index=(0, 0))[0])
