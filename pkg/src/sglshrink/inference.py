"""Posterior summaries, region selection and posterior prediction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "PosteriorSummary",
    "SelectionResult",
    "hpd_interval",
    "summarize",
    "select_regions_hpd",
    "select_regions_sn",
    "pooled_block",
    "posterior_predictive",
    "PredictiveResult",
    "persistently_active",
]

MIN_HPD_SAMPLES = 100


def hpd_interval(samples, level: float = 0.95) -> tuple[float, float]:
    """Shortest window of sorted draws holding ``ceil(level * S)`` of them."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    S = x.size
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    if S < MIN_HPD_SAMPLES:
        raise ValueError(f"HPD needs at least {MIN_HPD_SAMPLES} draws, got {S}")
    m = math.ceil(level * S - 1e-9)
    widths = x[m - 1 :] - x[: S - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


@dataclass
class PosteriorSummary:
    names: list
    mean: np.ndarray
    sd: np.ndarray
    hpd_lower: np.ndarray
    hpd_upper: np.ndarray
    level: float = 0.95

    def rows(self):
        for i, n in enumerate(self.names):
            yield n, self.mean[i], self.sd[i], self.hpd_lower[i], self.hpd_upper[i]


def summarize(draws: np.ndarray, names: Sequence[str], level: float = 0.95) -> PosteriorSummary:
    draws = np.asarray(draws, dtype=float)
    lo = np.empty(draws.shape[1])
    hi = np.empty(draws.shape[1])
    for c in range(draws.shape[1]):
        lo[c], hi[c] = hpd_interval(draws[:, c], level)
    return PosteriorSummary(list(names), draws.mean(axis=0), draws.std(axis=0, ddof=1), lo, hi, level)


@dataclass
class SelectionResult:
    active: np.ndarray
    rule: str
    level: float | None = None
    flagged: np.ndarray = field(default=None)
    hpd_lower: np.ndarray | None = None
    hpd_upper: np.ndarray | None = None
    post_mean: np.ndarray | None = None
    post_sd: np.ndarray | None = None

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=bool)
        if self.flagged is None:
            self.flagged = np.zeros_like(self.active)


def select_regions_hpd(beta_draws: np.ndarray, level: float = 0.95) -> SelectionResult:
    """Region ``j`` is active when the HPD interval of ``beta_j`` excludes zero."""
    B = np.asarray(beta_draws, dtype=float)
    lo = np.empty(B.shape[1])
    hi = np.empty(B.shape[1])
    for j in range(B.shape[1]):
        lo[j], hi[j] = hpd_interval(B[:, j], level)
    active = (lo > 0) | (hi < 0)
    return SelectionResult(active, "HPD", level, None, lo, hi, B.mean(axis=0), B.std(axis=0, ddof=1))


def select_regions_sn(beta_draws: np.ndarray) -> SelectionResult:
    """Scaled-neighbourhood rule.

    Region ``j`` is inactive when the posterior mass of ``|beta_j| < sd_j``
    is at least one half; exact ties and zero posterior sd are flagged.
    """
    B = np.asarray(beta_draws, dtype=float)
    sd = B.std(axis=0, ddof=1)
    inside = np.mean(np.abs(B) < sd[None, :], axis=0)
    zero_sd = ~(sd > 0)
    active = (inside < 0.5) & ~zero_sd
    flagged = zero_sd | (inside == 0.5)
    return SelectionResult(active, "SN", None, flagged, None, None, B.mean(axis=0), sd)


def pooled_block(chains, name: str) -> np.ndarray:
    """Stack one block's retained draws across chains."""
    return np.concatenate([c.block(name) for c in chains], axis=0)


@dataclass
class PredictiveResult:
    draws: np.ndarray
    mean: float
    rounded: int
    hpd: tuple
    theta_mean: float


def posterior_predictive(
    chains,
    w_new,
    x_new,
    rng: np.random.Generator,
    level: float = 0.95,
    beta_draws: np.ndarray | None = None,
) -> PredictiveResult:
    """Posterior predictive draws for one new observation.

    ``beta_draws`` overrides the chains' ``beta`` block (e.g. basis-expanded fits
    whose chain coefficients live in spline space).
    """
    alpha = pooled_block(chains, "alpha")
    beta = pooled_block(chains, "beta") if beta_draws is None else np.asarray(beta_draws)
    eta = alpha @ np.asarray(w_new, dtype=float) + beta @ np.asarray(x_new, dtype=float)
    if np.any(eta > 700):
        raise FloatingPointError("posterior predictive mean overflows (log-mean > 700)")
    theta = np.exp(eta)
    y = rng.poisson(theta).astype(float)
    m = float(y.mean())
    return PredictiveResult(y, m, int(round(m)), hpd_interval(y, level), float(theta.mean()))


def persistently_active(masks: Sequence) -> np.ndarray:
    """Active in at least two consecutive masks."""
    arr = np.array([np.asarray(getattr(m, "active", m), dtype=bool) for m in masks])
    if arr.shape[0] < 2:
        raise ValueError("need at least two masks")
    return np.any(arr[1:] & arr[:-1], axis=0)
