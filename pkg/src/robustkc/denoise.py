"""Denoising the kernel matrix: LP rounding and an ADMM solver for the SDP.

Both problems maximise <K - gamma*E, X> over 0 <= X_ij <= 1; the SDP adds
X >= 0 (PSD). The LP separates entrywise and is solved by thresholding.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import DenoisedMatrix, KernelMatrix, ParameterError, min_eigenvalue, psd_project
from .kernel import radius_graph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1.0
    max_iters: int = 2000
    tol_primal: float = 1e-4
    tol_dual: float = 1e-4
    eps_psd: float = 1e-6
    relaxation: float = 1.6
    # Residual balancing: rescale rho when one residual dominates by this factor.
    balance_factor: float = 10.0
    balance_every: int = 10

    def __post_init__(self):
        for name in ("rho", "tol_primal", "tol_dual", "eps_psd"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if not 0 < self.relaxation < 2:
            raise ParameterError("relaxation must lie in (0, 2)")


@dataclass
class SolveDiagnostics:
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    converged: bool
    rho: float = 1.0
    primal_history: list = None


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")


def objective(K, gamma: float, X) -> float:
    """<K - gamma*E, X>."""
    K = K.K if isinstance(K, KernelMatrix) else np.asarray(K)
    X = X.dense() if isinstance(X, DenoisedMatrix) else np.asarray(X)
    return float(np.sum(K * X) - gamma * np.sum(X))


def lp_denoise(K: KernelMatrix, gamma: float) -> DenoisedMatrix:
    """Closed-form LP optimum: X_ij = 1 exactly when K_ij > gamma."""
    _check_gamma(gamma)
    X = (K.K > gamma).astype(np.float64)
    return DenoisedMatrix(X, gamma, "LP")


def lp_denoise_points(Y, theta: float, gamma: float) -> DenoisedMatrix:
    """LP optimum built from the points without forming K (sparse output).

    K_ij > gamma is equivalent to |y_i - y_j|^2 < -2 theta^2 log(gamma).
    """
    _check_gamma(gamma)
    if not theta > 0:
        raise ParameterError("theta must be positive")
    radius_sq = -2.0 * theta * theta * np.log(gamma)
    return DenoisedMatrix(radius_graph(Y, radius_sq), gamma, "LP")


def restore_feasibility(X: np.ndarray, eps_psd: float) -> np.ndarray:
    """Clip to the box, then mix toward the identity until PSD.

    The identity is box-feasible with all eigenvalues 1, so a convex
    combination stays in the box and the smallest eigenvalue moves to >= 0.
    """
    X = np.clip((X + X.T) / 2, 0.0, 1.0)
    lam = min_eigenvalue(X)
    if lam >= -eps_psd / 2:
        return X
    t = -lam / (1.0 - lam)
    t = min(1.0, t * (1 + 1e-9) + 1e-15)
    X = (1 - t) * X + t * np.eye(X.shape[0])
    return np.clip((X + X.T) / 2, 0.0, 1.0)


def sdp_warm_start(K: KernelMatrix, gamma: float, eps_psd: float = 1e-6) -> np.ndarray:
    """LP solution projected onto the PSD cone, made box feasible."""
    return restore_feasibility(psd_project(lp_denoise(K, gamma).dense()), eps_psd)


def sdp_denoise(K: KernelMatrix, gamma: float, cfg: AdmmConfig = AdmmConfig()):
    """Solve the SDP relaxation by ADMM on the split X (box) = Z (PSD cone).

    Returns ``(DenoisedMatrix, SolveDiagnostics)``. A solve that hits
    ``max_iters`` still returns its final iterate, with ``converged=False``.
    """
    _check_gamma(gamma)
    N = K.N
    if N == 1:
        X = np.ones((1, 1))
        return DenoisedMatrix(X, gamma, "SDP"), SolveDiagnostics(0, 0.0, 0.0, 1.0 - gamma, True, cfg.rho, [])

    C = K.K - gamma
    Z = psd_project(lp_denoise(K, gamma).dense())
    U = np.zeros_like(Z)
    rho = cfg.rho
    a = cfg.relaxation
    rp = rd = np.inf
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        X = np.clip(Z - U + C / rho, 0.0, 1.0)
        X = (X + X.T) / 2
        Xh = a * X + (1 - a) * Z
        Z_prev = Z
        Z = psd_project(Xh + U)
        U = U + Xh - Z
        rp = np.linalg.norm(X - Z) / max(1.0, np.linalg.norm(X))
        rd = rho * np.linalg.norm(Z - Z_prev) / max(1.0, rho * np.linalg.norm(U))
        history.append(rp)
        if rp < cfg.tol_primal and rd < cfg.tol_dual:
            converged = True
            break
        if cfg.balance_every and it % cfg.balance_every == 0:
            if rp > cfg.balance_factor * rd:
                rho *= 2.0
                U /= 2.0
            elif rd > cfg.balance_factor * rp:
                rho /= 2.0
                U *= 2.0
    if not converged:
        log.warning("ADMM stopped after %d iterations (primal %.2e, dual %.2e)", it, rp, rd)
    Xf = restore_feasibility(Z, cfg.eps_psd)
    diag = SolveDiagnostics(
        iterations=it,
        primal_residual=float(rp),
        dual_residual=float(rd),
        objective=objective(K, gamma, Xf),
        converged=converged,
        rho=rho,
        primal_history=history,
    )
    return DenoisedMatrix(Xf, gamma, "SDP"), diag
