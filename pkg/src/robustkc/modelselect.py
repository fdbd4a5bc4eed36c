"""Estimate the number of clusters from the normalized Laplacian spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import DegenerateDataError, DenoisedMatrix, ParameterError, sym_eigendecompose
from .kernel import quantile_sorted
from .outlier import degrees

# Eigenvalues at or above this are not "near zero" for the gap rule.
GAP_FLOOR = 0.1


@dataclass
class EigengapReport:
    r_hat: int
    laplacian_eigenvalues: np.ndarray  # ascending, the smallest max_r + 1
    gap_index: int
    beta_tilde: float
    kept: np.ndarray  # indices surviving the degree filter
    low_confidence: bool = False


def normalized_laplacian_spectrum(A, k: int) -> np.ndarray:
    """Smallest k eigenvalues of I - D^-1/2 A D^-1/2, ascending."""
    deg = np.asarray(A.sum(axis=1)).ravel()
    if np.any(deg <= 0):
        raise DegenerateDataError("zero-degree node in Laplacian")
    s = 1.0 / np.sqrt(deg)
    if sp.issparse(A):
        S = sp.diags(s) @ A @ sp.diags(s)
        S = ((S + S.T) / 2).tocsr()
    else:
        S = A * s[:, None] * s[None, :]
        S = (S + S.T) / 2
    w, _ = sym_eigendecompose(S, min(k, A.shape[0]))
    return np.clip(1.0 - w, 0.0, 2.0)


def estimate_r(X, beta_tilde: float = 0.8, max_r: int = 10) -> EigengapReport:
    """Eigengap estimate of r from the degree-filtered denoised matrix.

    Points whose degree is below the (1 - beta_tilde) quantile are dropped,
    so beta_tilde is the retained fraction. r_hat maximises
    lambda_{k+1} - lambda_k over k <= max_r with lambda_k < GAP_FLOOR.
    """
    if not 0 < beta_tilde < 1:
        raise ParameterError("beta_tilde must lie in (0, 1)")
    if max_r < 1:
        raise ParameterError("max_r must be at least 1")
    M = X.X if isinstance(X, DenoisedMatrix) else X
    deg = degrees(M)
    tau = quantile_sorted(np.sort(deg), 1.0 - beta_tilde)
    kept = np.flatnonzero(deg >= tau)
    if kept.size < 2:
        raise DegenerateDataError("fewer than two points survive the degree filter")
    A = M[kept][:, kept] if sp.issparse(M) else np.asarray(M)[np.ix_(kept, kept)]
    k = min(max_r + 1, kept.size)
    lam = np.sort(normalized_laplacian_spectrum(A, k))
    gaps = np.diff(lam)
    cand = [j for j in range(1, len(lam)) if lam[j - 1] < GAP_FLOOR]
    low_conf = not cand
    if low_conf:
        cand = list(range(1, len(lam)))
    r_hat = max(cand, key=lambda j: (gaps[j - 1], -j)) if gaps.size else 1
    return EigengapReport(int(r_hat), lam, int(r_hat), beta_tilde, kept, low_conf)
