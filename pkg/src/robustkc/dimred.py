"""PCA projection onto the top r-1 principal directions.

Strict mode fits the directions on a random subset P2 of size
max(ceil(N**alpha_split), r) and projects only the complement P1, so the
projected points stay independent of the basis. Practical mode fits and
projects on every point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataMatrix, InputError, ParameterError, stage_rng, sym_eigendecompose


@dataclass(frozen=True)
class SplitProjection:
    basis: np.ndarray  # d x k, orthonormal columns
    p1_indices: np.ndarray  # rows that get projected
    p2_indices: np.ndarray  # rows used for fitting (empty in practical mode)
    alpha_split: float = 0.5
    strict: bool = True
    identity: bool = False  # d < r-1: nothing to reduce

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def _top_directions(P: np.ndarray, k: int) -> np.ndarray:
    centered = P - P.mean(axis=0)
    S = centered.T @ centered / P.shape[0]
    _, V = sym_eigendecompose((S + S.T) / 2, k, iterative=False)
    return V


def fit_projection(Y, r: int, alpha_split: float = 0.5, seed: int = 0, strict: bool = True) -> SplitProjection:
    Y = Y if isinstance(Y, DataMatrix) else DataMatrix(Y)
    N, d = Y.N, Y.d
    if r < 2:
        raise ParameterError("dimensionality reduction needs r >= 2")
    if N < 2:
        raise ParameterError("need at least two points")
    if not 0 < alpha_split < 1:
        raise ParameterError("alpha_split must lie in (0, 1)")
    k = r - 1
    if d < k:
        return SplitProjection(np.eye(d), np.arange(N), np.array([], dtype=np.int64), alpha_split, strict, identity=True)
    if not strict:
        return SplitProjection(_top_directions(Y.points, k), np.arange(N), np.array([], dtype=np.int64), alpha_split, False)
    n2 = max(int(np.ceil(N**alpha_split)), r)
    if n2 >= N:
        raise ParameterError(f"fitting subset size {n2} leaves no points to project (N={N})")
    rng = stage_rng(seed, "dimred/split")
    perm = rng.permutation(N)
    p2 = np.sort(perm[:n2])
    p1 = np.sort(perm[n2:])
    return SplitProjection(_top_directions(Y.points[p2], k), p1, p2, alpha_split, True)


def project(Y, proj: SplitProjection):
    """Project the P1 rows; returns (DataMatrix, original row indices)."""
    Y = Y if isinstance(Y, DataMatrix) else DataMatrix(Y)
    if Y.d != proj.basis.shape[0]:
        raise InputError(f"projection fitted for d={proj.basis.shape[0]}, data has d={Y.d}")
    rows = proj.p1_indices
    return DataMatrix(Y.points[rows] @ proj.basis), rows
