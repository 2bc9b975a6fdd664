"""Estimation, selection and forecast accuracy measures.

Undefined quantities (empty denominators) are ``None``, never 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

__all__ = [
    "EstimationReport",
    "SelectionReport",
    "ForecastReport",
    "estimation_metrics",
    "selection_metrics",
    "forecast_metrics",
    "pred_rmse",
]


@dataclass
class EstimationReport:
    signal_rmse: Optional[float]
    noise_rmse: Optional[float]
    beta_rmse: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SelectionReport:
    fpr: Optional[float]
    fnr: Optional[float]
    tp: int
    fp: int
    tn: int
    fn: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ForecastReport:
    mae: float
    rmse: float
    max_ae: float
    sdr: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)


def _rms(v: np.ndarray) -> Optional[float]:
    return float(math.sqrt(np.mean(v**2))) if v.size else None


def estimation_metrics(beta_hat, beta_star, mask) -> EstimationReport:
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not (beta_hat.shape == beta_star.shape == mask.shape):
        raise ValueError("beta_hat, beta_star and mask must have equal shapes")
    err = beta_hat - beta_star
    return EstimationReport(_rms(err[mask]), _rms(err[~mask]), _rms(err))


def selection_metrics(active_hat, mask) -> SelectionReport:
    a = np.asarray(active_hat, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    if a.shape != m.shape:
        raise ValueError("shape mismatch")
    tp = int(np.sum(a & m))
    fp = int(np.sum(a & ~m))
    tn = int(np.sum(~a & ~m))
    fn = int(np.sum(~a & m))
    fpr = fp / (fp + tn) if fp + tn else None
    fnr = fn / (fn + tp) if fn + tp else None
    return SelectionReport(fpr, fnr, tp, fp, tn, fn)


def forecast_metrics(y, y_hat) -> ForecastReport:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.ndim != 1 or y.size < 1:
        raise ValueError("y and y_hat must be equal-length 1-d arrays")
    err = np.abs(y - y_hat)
    den = np.sum((y - y.mean()) ** 2)
    sdr = float(math.sqrt(np.sum((y_hat - y_hat.mean()) ** 2) / den)) if den > 0 else None
    return ForecastReport(float(err.mean()), float(math.sqrt(np.mean(err**2))), float(err.max()), sdr)


def pred_rmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    return float(math.sqrt(np.mean((np.asarray(y_hat, dtype=float) - y) ** 2)))
