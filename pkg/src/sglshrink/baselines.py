"""Reference predictors: moving-average climatology and two-stage Poisson GLMs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

__all__ = [
    "GlmFit",
    "RankDeficientError",
    "moving_average_forecast",
    "fit_poisson_glm_irls",
    "tstat_screen",
    "ScreenResult",
    "fixed_region_forecast",
    "RegionForecast",
]


class RankDeficientError(ValueError):
    pass


@dataclass
class GlmFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    converged: bool
    iterations: int
    deviance_path: list = field(default_factory=list)

    def predict_mean(self, design) -> np.ndarray:
        eta = np.asarray(design, dtype=float) @ self.coefficients
        return np.exp(np.minimum(eta, 700.0))

    @property
    def z_scores(self) -> np.ndarray:
        return self.coefficients / self.standard_errors


def moving_average_forecast(history, window: int = 5) -> float:
    h = np.asarray(history, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if h.size < window:
        raise ValueError(f"history of length {h.size} is shorter than the window {window}")
    return float(h[-window:].mean())


def _poisson_deviance(y, mu) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def fit_poisson_glm_irls(y, design, tol: float = 1e-8, max_iter: int = 50) -> GlmFit:
    """Poisson log-link MLE by iteratively reweighted least squares.

    Stops when the largest coefficient change falls below ``tol``.  Steps that
    would raise the deviance are halved, so the recorded deviance path is
    nonincreasing.  Non-convergence (e.g. separation) is reported, not raised.
    """
    y = np.asarray(y, dtype=float)
    Z = np.asarray(design, dtype=float)
    n, p = Z.shape
    if n <= p:
        raise RankDeficientError(f"need more rows than columns (n={n}, p={p})")
    if np.linalg.matrix_rank(Z) < p:
        raise RankDeficientError("design matrix is rank deficient")

    ybar = max(y.mean(), 1e-8)
    beta = np.linalg.lstsq(Z, np.full(n, math.log(ybar)), rcond=None)[0]
    mu = np.exp(np.clip(Z @ beta, -700, 700))
    dev = _poisson_deviance(y, mu)
    path = [dev]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = Z @ beta
        w = mu
        zwork = eta + (y - mu) / mu
        sw = np.sqrt(w)
        try:
            new = np.linalg.lstsq(Z * sw[:, None], zwork * sw, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        step = new - beta
        for _ in range(30):
            cand = beta + step
            mu_c = np.exp(np.clip(Z @ cand, -700, 700))
            dev_c = _poisson_deviance(y, mu_c)
            if np.isfinite(dev_c) and dev_c <= dev + 1e-12 * max(1.0, abs(dev)):
                break
            step = step / 2.0
        else:
            break
        beta, mu, dev = cand, mu_c, dev_c
        path.append(dev)
        if np.max(np.abs(step)) < tol:
            converged = True
            break
        if np.any(np.abs(beta) > 1e6) or np.any(mu < 1e-300):
            break

    info = Z.T @ (Z * mu[:, None])
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
    except np.linalg.LinAlgError:
        se = np.full(p, np.inf)
        converged = False
    if converged and not np.all(se > 0):
        converged = False
    return GlmFit(beta, se, converged, it, path)


@dataclass
class ScreenResult:
    active: np.ndarray
    pooled: np.ndarray
    z: np.ndarray
    fallback: bool


def tstat_screen(y, W, X, alpha_level: float = 0.05) -> ScreenResult:
    """Per-location Wald screening of ``X[:, j]`` in a Poisson GLM on ``(W, X[:, j])``.

    The pooled predictor is the row mean of ``X`` over the significant
    locations (all locations when none is significant; ``fallback`` is set).
    """
    y = np.asarray(y, dtype=float)
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    crit = stats.norm.ppf(1.0 - alpha_level / 2.0)
    z = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        try:
            fit = fit_poisson_glm_irls(y, np.column_stack([W, X[:, j]]))
        except RankDeficientError:
            continue
        if fit.converged:
            z[j] = fit.z_scores[-1]
    active = np.abs(z) > crit
    fallback = not active.any()
    cols = np.ones(X.shape[1], dtype=bool) if fallback else active
    return ScreenResult(active, X[:, cols].mean(axis=1), z, fallback)


@dataclass
class RegionForecast:
    fit: GlmFit
    scalar_train: np.ndarray
    predictions: np.ndarray


def _region_mean(X, mask) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("region mask is empty")
    return X[:, mask].mean(axis=1)


def fixed_region_forecast(y, W, X, mask, W_new=None, X_new=None) -> RegionForecast:
    """Average ``X`` over ``mask`` into one scalar, regress ``y`` on ``(W, scalar)``."""
    s = _region_mean(X, mask)
    fit = fit_poisson_glm_irls(y, np.column_stack([W, s]))
    preds = np.array([])
    if W_new is not None and X_new is not None:
        s_new = _region_mean(X_new, mask)
        preds = fit.predict_mean(np.column_stack([np.atleast_2d(W_new), s_new]))
    return RegionForecast(fit, s, preds)
