"""Gaussian kernel construction and the theta / gamma selection rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.stats import chi2

from .core import DataMatrix, DegenerateDataError, KernelMatrix, ParameterError

# Rows per block when distances are streamed instead of materialised.
BLOCK_ROWS = 256


@dataclass(frozen=True)
class ParamConfig:
    alpha: float = 0.2
    beta: float = 0.06
    theta_override: Optional[float] = None
    gamma_override: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ParameterError("beta must lie in (0, 1)")
        if self.theta_override is not None and not self.theta_override > 0:
            raise ParameterError("theta_override must be positive")
        if self.gamma_override is not None and not 0 < self.gamma_override < 1:
            raise ParameterError("gamma_override must lie in (0, 1)")


def _as_data(Y) -> DataMatrix:
    return Y if isinstance(Y, DataMatrix) else DataMatrix(Y)


def gaussian_kernel(Y, theta: float) -> KernelMatrix:
    """K_ij = exp(-|y_i - y_j|^2 / (2 theta^2)), one evaluation per unordered pair."""
    if not theta > 0:
        raise ParameterError("theta must be positive")
    Y = _as_data(Y)
    if Y.N == 1:
        return KernelMatrix(np.ones((1, 1)), theta)
    sq = pdist(Y.points, "sqeuclidean")
    K = squareform(np.exp(-sq / (2.0 * theta * theta)))
    np.fill_diagonal(K, 1.0)
    return KernelMatrix(K, theta)


def iter_sqdist_blocks(points: np.ndarray, block: int = BLOCK_ROWS) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (row offset, block of squared distances to every point)."""
    N = points.shape[0]
    for start in range(0, N, block):
        stop = min(start + block, N)
        D = cdist(points[start:stop], points, "sqeuclidean")
        D[np.arange(stop - start), np.arange(start, stop)] = 0.0
        yield start, D


def quantile_sorted(s: np.ndarray, p: float) -> float:
    """Linear-interpolation quantile at zero-based rank p*(M-1) of a sorted sample."""
    M = len(s)
    h = p * (M - 1)
    lo = int(np.floor(h))
    hi = min(lo + 1, M - 1)
    return float(s[lo] + (h - lo) * (s[hi] - s[lo]))


def neighbor_quantiles(Y, beta: float, block: int = BLOCK_ROWS) -> np.ndarray:
    """Per point, the beta quantile of its distances to the other N-1 points."""
    Y = _as_data(Y)
    N = Y.N
    if N < 2:
        raise ParameterError("need at least two points")
    M = N - 1
    h = beta * (M - 1)
    lo = int(np.floor(h))
    hi = min(lo + 1, M - 1)
    frac = h - lo
    q = np.empty(N)
    for start, D2 in iter_sqdist_blocks(Y.points, block):
        rows = np.arange(D2.shape[0])
        # self-distance pushed below every real distance, then skipped
        D2[rows, start + rows] = -1.0
        part = np.partition(D2, (1 + lo, 1 + hi), axis=1)
        a = np.sqrt(part[:, 1 + lo])
        b = np.sqrt(part[:, 1 + hi])
        q[start : start + D2.shape[0]] = a + frac * (b - a)
    return q


def chi2_quantile(p: float, d: int) -> float:
    return float(chi2.ppf(p, d))


def select_theta(Y, cfg: ParamConfig = ParamConfig()) -> float:
    """Kernel scale from the neighbour-distance quantile rule."""
    Y = _as_data(Y)
    if Y.N < 2:
        raise ParameterError("theta selection needs at least two points")
    if np.ptp(Y.points, axis=0).max() == 0:
        raise DegenerateDataError("all points are identical")
    q = np.sort(neighbor_quantiles(Y, cfg.beta))
    top = quantile_sorted(q, 1 - cfg.alpha)
    if top <= 0:
        raise DegenerateDataError("neighbour distance quantile is zero; too many duplicate points")
    return top / np.sqrt(chi2_quantile(1 - cfg.alpha, Y.d))


def select_gamma(d: int, alpha: float) -> float:
    """gamma = exp(-t/2) with t the (1 - alpha) quantile of chi-squared(d)."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if d < 1:
        raise ParameterError("d must be positive")
    return float(np.exp(-chi2_quantile(1 - alpha, d) / 2.0))


def radius_graph(Y, radius_sq: float, block: int = BLOCK_ROWS, strict: bool = True) -> sp.csr_matrix:
    """Sparse 0/1 matrix with ones where |y_i - y_j|^2 < radius_sq."""
    Y = _as_data(Y)
    N = Y.N
    rows, cols = [], []
    for start, D2 in iter_sqdist_blocks(Y.points, block):
        hit = D2 < radius_sq if strict else D2 <= radius_sq
        i, j = np.nonzero(hit)
        rows.append(i + start)
        cols.append(j)
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    X = sp.csr_matrix((np.ones(len(i)), (i, j)), shape=(N, N))
    # cdist can differ in the last bit between (i, j) and (j, i)
    return X.maximum(X.T).tocsr()


def truncated_kernel(Y, theta: float, cutoff: float = 1e-10, block: int = BLOCK_ROWS) -> sp.csr_matrix:
    """Sparse Gaussian kernel with entries below ``cutoff`` dropped."""
    Y = _as_data(Y)
    N = Y.N
    limit = -2.0 * theta * theta * np.log(cutoff)
    data, rows, cols = [], [], []
    for start, D2 in iter_sqdist_blocks(Y.points, block):
        i, j = np.nonzero(D2 < limit)
        rows.append(i + start)
        cols.append(j)
        data.append(np.exp(-D2[i, j] / (2.0 * theta * theta)))
    K = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return ((K + K.T) / 2).tocsr()
