"""Degree-threshold outlier detection on the denoised matrix."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DenoisedMatrix, ParameterError
from .kernel import quantile_sorted

log = logging.getLogger(__name__)

MODES = ("relative", "quantile", "absolute", "knee")


@dataclass(frozen=True)
class OutlierConfig:
    """How the degree threshold tau is chosen.

    relative: tau = max(min_tau, relative_level * median degree)
    quantile: tau = quantile_level quantile of the degrees
    absolute: tau = absolute_tau
    knee:     tau at the widest gap among the lowest knee_fraction of sorted
              degrees, if that gap exceeds twice the median gap; otherwise
              no point is flagged
    Points with degree < tau are outliers.
    """

    mode: str = "relative"
    relative_level: float = 0.05
    min_tau: float = 2.0
    quantile_level: float = 0.2
    absolute_tau: Optional[float] = None
    knee_fraction: float = 0.2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown outlier mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "absolute":
            if self.absolute_tau is None or self.absolute_tau < 0:
                raise ParameterError("absolute mode needs a nonnegative absolute_tau")
        if not 0 < self.quantile_level < 1:
            raise ParameterError("quantile_level must lie in (0, 1)")
        if not 0 < self.knee_fraction <= 1:
            raise ParameterError("knee_fraction must lie in (0, 1]")
        if self.relative_level < 0 or self.min_tau < 0:
            raise ParameterError("relative_level and min_tau must be nonnegative")


@dataclass
class OutlierSplit:
    inliers: np.ndarray
    outliers: np.ndarray
    tau: float
    # set when the rule found nothing to cut (e.g. all degrees equal)
    warning: Optional[str] = None


def degrees(X) -> np.ndarray:
    """Row sums of X, diagonal included."""
    M = X.X if isinstance(X, DenoisedMatrix) else X
    return np.asarray(M.sum(axis=1), dtype=np.float64).ravel()


def _knee_tau(deg: np.ndarray, fraction: float) -> Optional[float]:
    s = np.sort(deg)
    if len(s) < 3:
        return None
    gaps = np.diff(s)
    lim = max(1, int(np.ceil(fraction * len(s))) - 1)
    low = gaps[:lim]
    i = int(np.argmax(low))
    if low[i] <= 2.0 * np.median(gaps) or low[i] == 0:
        return None
    return float(s[i + 1])


def threshold(deg: np.ndarray, cfg: OutlierConfig):
    """Return (tau, warning) for a degree vector."""
    deg = np.asarray(deg, dtype=np.float64)
    if cfg.mode == "absolute":
        return float(cfg.absolute_tau), None
    if cfg.mode == "relative":
        return float(max(cfg.min_tau, cfg.relative_level * np.median(deg))), None
    if cfg.mode == "quantile":
        tau = quantile_sorted(np.sort(deg), cfg.quantile_level)
        if np.all(deg == deg[0]):
            return tau, "all degrees equal; no outliers flagged"
        return tau, None
    tau = _knee_tau(deg, cfg.knee_fraction)
    if tau is None:
        return -np.inf, "no degree gap found; no outliers flagged"
    return tau, None


def split_outliers(X, cfg: OutlierConfig = OutlierConfig()) -> OutlierSplit:
    deg = degrees(X)
    tau, warning = threshold(deg, cfg)
    if warning:
        log.info(warning)
    out = deg < tau
    return OutlierSplit(np.flatnonzero(~out), np.flatnonzero(out), float(tau), warning)
