"""Spectral embedding of the denoised matrix and k-means rounding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ClusterResult, DenoisedMatrix, ParameterError, stage_rng, sym_eigendecompose


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 10
    max_iters: int = 300
    tol: float = 1e-8
    seed: int = 0
    # Project embedding rows onto the unit sphere before k-means.
    normalize_rows: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ParameterError("restarts must be at least 1")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")


def embed(X: DenoisedMatrix, r: int) -> np.ndarray:
    """Top-r eigenvectors of X as an N x r matrix."""
    if not 1 <= r <= X.N:
        raise ParameterError(f"need 1 <= r <= N, got r={r}, N={X.N}")
    _, V = sym_eigendecompose(X.X, r)
    return V


def normalize_rows(U: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    return np.where(norms > eps, U / np.maximum(norms, eps), 0.0)


def _sqdist(P: np.ndarray, C: np.ndarray) -> np.ndarray:
    D = (P * P).sum(1)[:, None] - 2.0 * P @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(D, 0.0)


def kmeanspp_init(P: np.ndarray, r: int, rng: np.random.Generator) -> np.ndarray:
    N = P.shape[0]
    centers = np.empty((r, P.shape[1]))
    centers[0] = P[rng.integers(N)]
    closest = _sqdist(P, centers[:1])[:, 0]
    for c in range(1, r):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(N)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, N - 1)
        centers[c] = P[idx]
        closest = np.minimum(closest, _sqdist(P, centers[c : c + 1])[:, 0])
    return centers


def _lloyd(P: np.ndarray, centers: np.ndarray, max_iters: int, tol: float):
    N, r = P.shape[0], centers.shape[0]
    prev = np.inf
    costs = []
    for _ in range(max_iters):
        D = _sqdist(P, centers)
        labels = np.argmin(D, axis=1)  # ties go to the lowest index
        counts = np.bincount(labels, minlength=r)
        # empty clusters take the point farthest from its centroid
        for k in np.flatnonzero(counts == 0):
            dist = D[np.arange(N), labels]
            movable = counts[labels] > 1
            dist = np.where(movable, dist, -1.0)
            far = int(np.argmax(dist))
            counts[labels[far]] -= 1
            labels[far] = k
            counts[k] = 1
            D[far, :] = np.inf
            D[far, k] = 0.0
        new_centers = np.zeros_like(centers)
        np.add.at(new_centers, labels, P)
        new_centers /= counts[:, None]
        cost = float(((P - new_centers[labels]) ** 2).sum())
        costs.append(cost)
        centers = new_centers
        if prev - cost <= tol * max(prev, 1e-300) or cost == 0.0:
            break
        prev = cost
    # final assignment against the final centroids
    D = _sqdist(P, centers)
    final = np.argmin(D, axis=1)
    if np.bincount(final, minlength=r).min() > 0:
        fcost = float(((P - centers[final]) ** 2).sum())
        if fcost <= costs[-1]:
            labels = final
            new_centers = np.zeros_like(centers)
            np.add.at(new_centers, labels, P)
            centers = new_centers / np.bincount(labels, minlength=r)[:, None]
            costs.append(float(((P - centers[labels]) ** 2).sum()))
    labels, hcost = _hartigan(P, labels, r)
    if hcost < costs[-1]:
        costs.append(hcost)
    return labels, costs[-1], costs


def _hartigan(P: np.ndarray, labels: np.ndarray, r: int, max_passes: int = 100):
    """Single-point moves that lower the cost; escapes many Lloyd fixed points.

    Moving x from cluster a (size n_a) to b changes the cost by
    n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2. Each pass screens all
    points at once and then applies the improving moves one at a time.
    """
    N = P.shape[0]
    labels = labels.copy()
    n = np.bincount(labels, minlength=r).astype(float)
    C = np.zeros((r, P.shape[1]))
    np.add.at(C, labels, P)
    C /= n[:, None]
    rows = np.arange(N)
    for _ in range(max_passes):
        D = _sqdist(P, C)
        na = n[labels]
        remove = np.where(na > 1, na / np.maximum(na - 1, 1) * D[rows, labels], 0.0)
        add = n / (n + 1) * D
        add[rows, labels] = np.inf
        cand = np.flatnonzero(add.min(axis=1) < remove - 1e-12 * (1 + remove))
        if cand.size == 0:
            break
        for i in cand:
            a = labels[i]
            if n[a] <= 1:
                continue
            d = ((C - P[i]) ** 2).sum(axis=1)
            gain = n / (n + 1) * d
            gain[a] = np.inf
            b = int(np.argmin(gain))
            if gain[b] < n[a] / (n[a] - 1) * d[a] - 1e-12 * (1 + d[a]):
                C[a] = (C[a] * n[a] - P[i]) / (n[a] - 1)
                C[b] = (C[b] * n[b] + P[i]) / (n[b] + 1)
                n[a] -= 1
                n[b] += 1
                labels[i] = b
    # recompute centroids exactly to shed drift from the running updates
    C = np.zeros((r, P.shape[1]))
    np.add.at(C, labels, P)
    C /= np.bincount(labels, minlength=r)[:, None]
    return labels, float(((P - C[labels]) ** 2).sum())


def kmeans(points: np.ndarray, r: int, cfg: KMeansConfig = KMeansConfig(), return_history: bool = False):
    """k-means++ seeding, Lloyd iterations and Hartigan moves, best of ``cfg.restarts`` runs.

    Labels are in 1..r. Each restart draws from its own stream derived from
    (seed, restart index).
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    N = P.shape[0]
    if not 1 <= r <= N:
        raise ParameterError(f"need 1 <= r <= N, got r={r}, N={N}")
    best = None
    histories = []
    for rep in range(cfg.restarts):
        rng = stage_rng(cfg.seed, f"kmeans/{rep}")
        labels, cost, hist = _lloyd(P, kmeanspp_init(P, r, rng), cfg.max_iters, cfg.tol)
        histories.append(hist)
        if best is None or cost < best[1]:
            best = (labels, cost)
    labels, cost = best
    out = (labels + 1, float(cost))
    return out + (histories,) if return_history else out


def cluster(X: DenoisedMatrix, r: int, cfg: KMeansConfig = KMeansConfig()) -> ClusterResult:
    U = embed(X, r)
    P = normalize_rows(U) if cfg.normalize_rows else U
    labels, cost = kmeans(P, r, cfg)
    return ClusterResult(labels=labels, r=r, embedding=P, kmeans_cost=cost)
