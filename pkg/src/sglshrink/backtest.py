"""Rolling one-year-ahead forecasting.

For each target year ``t`` every model is fitted on the rows with year < t
only, then predicts year ``t``.  Standardisation moments come from the same
training rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .baselines import fixed_region_forecast, moving_average_forecast, tstat_screen
from .graph import LatticeGraph
from .inference import posterior_predictive, select_regions_hpd
from .io import standardize_columns
from .metrics import forecast_metrics
from .model import MODEL_TABLE, Dataset, ModelSpec
from .sampler import SamplerConfig, monitored_columns, rhat_table, run_chains

__all__ = [
    "BacktestError",
    "BacktestResult",
    "training_rows",
    "run_backtest",
    "MEASURES",
]

MEASURES = ("MAE", "RMSE", "MaxAE", "SDR")


class BacktestError(ValueError):
    pass


@dataclass
class BacktestResult:
    years: np.ndarray
    observed: np.ndarray
    predictions: dict
    hpd: dict
    reports: dict
    active: dict = field(default_factory=dict)
    persistent: dict = field(default_factory=dict)
    max_rhat: dict = field(default_factory=dict)
    train_years: dict = field(default_factory=dict)

    def table(self) -> list:
        """Rows ``[measure, value per model...]`` in model order."""
        names = list(self.reports)
        out = []
        for m in MEASURES:
            key = {"MAE": "mae", "RMSE": "rmse", "MaxAE": "max_ae", "SDR": "sdr"}[m]
            out.append([m] + [getattr(self.reports[n], key) for n in names])
        return out


def training_rows(years: np.ndarray, target: int) -> np.ndarray:
    """Indices of rows strictly before ``target``."""
    return np.flatnonzero(np.asarray(years) < target)


def _sgl_forecast(name, spec_kwargs, graph, Xtr, Wtr, ytr, x_new, w_new, sampler, M, rng, level, threads):
    spec = ModelSpec.named(name, graph, **spec_kwargs)
    Xd = Xtr if M is None else Xtr @ M
    xd = x_new if M is None else x_new @ M
    data = Dataset(ytr, Wtr, Xd, standardized=True)
    chains = run_chains(spec, data, sampler, threads=threads)
    pred = posterior_predictive(chains, w_new, xd, rng, level)
    beta = np.concatenate([c.block("beta") for c in chains])
    if M is not None:
        beta = beta @ M.T
    sel = select_regions_hpd(beta, level)
    rhat = None
    if len(chains) > 1:
        tab = rhat_table(chains, monitored_columns(spec, data.K, data.J))
        rhat = max(tab.values())
    return pred, sel.active, rhat


def run_backtest(
    data: Dataset,
    years: Sequence[int],
    graph: LatticeGraph,
    models: Sequence[str],
    start_year: int,
    end_year: int,
    sampler: SamplerConfig,
    *,
    ma_window: int = 5,
    alpha_level: float = 0.05,
    fixed_mask: Optional[np.ndarray] = None,
    level: float = 0.95,
    basis_M: Optional[np.ndarray] = None,
    standardize: bool = True,
    spec_kwargs: Optional[dict] = None,
    threads: int = 1,
) -> BacktestResult:
    """Rolling one-year-ahead backtest over target years ``start_year..end_year``.

    ``graph`` is the dependence graph of the fitted coefficients: the region
    graph, or the spline-coefficient graph when ``basis_M`` is given.  Each
    target year ``t`` reseeds the sampler with ``sampler.seed + t``.
    """
    years = np.asarray(years, dtype=int)
    if years.shape[0] != data.n:
        raise BacktestError("years and data have different lengths")
    targets = list(range(start_year, end_year + 1))
    missing = [t for t in targets if t not in set(years.tolist())]
    if missing:
        raise BacktestError(f"target years {missing} are outside the data range {years.min()}-{years.max()}")
    spec_kwargs = spec_kwargs or {}
    names = [m.upper() if m.upper() in MODEL_TABLE else m for m in models]

    preds = {n: [] for n in names}
    hpd = {n: [] for n in names}
    active = {n: [] for n in names if n in MODEL_TABLE}
    max_rhat = {n: [] for n in names if n in MODEL_TABLE}
    train_years = {}
    observed = []
    for t in targets:
        tr = training_rows(years, t)
        te = int(np.flatnonzero(years == t)[0])
        if tr.size == 0:
            raise BacktestError(f"no training years before {t}")
        assert years[tr].max() < t
        train_years[t] = years[tr].copy()
        ytr = data.y[tr]
        if standardize:
            Wtr, w_new = standardize_columns(data.W[tr], data.W[te : te + 1])
            Xtr, x_new = standardize_columns(data.X[tr], data.X[te : te + 1])
        else:
            Wtr, w_new = data.W[tr], data.W[te : te + 1]
            Xtr, x_new = data.X[tr], data.X[te : te + 1]
        observed.append(data.y[te])
        for n in names:
            key = n.upper()
            if key in MODEL_TABLE:
                cfg = _reseed(sampler, t)
                rng = np.random.default_rng([sampler.seed, t])
                pred, act, rh = _sgl_forecast(
                    key, spec_kwargs, graph, Xtr, Wtr, ytr, x_new[0], w_new[0], cfg, basis_M, rng, level, threads
                )
                preds[n].append(pred.mean)
                hpd[n].append(pred.hpd)
                active[n].append(act)
                max_rhat[n].append(rh)
            elif key == "MA":
                if tr.size < ma_window:
                    raise BacktestError(f"{tr.size} training years before {t}; MA needs {ma_window}")
                preds[n].append(moving_average_forecast(ytr, ma_window))
                hpd[n].append((None, None))
            elif key == "TSTAT":
                screen = tstat_screen(ytr, Wtr, Xtr, alpha_level)
                mask = np.ones(data.J, dtype=bool) if screen.fallback else screen.active
                fc = fixed_region_forecast(ytr, Wtr, Xtr, mask, w_new, x_new)
                preds[n].append(float(fc.predictions[0]))
                hpd[n].append((None, None))
            elif key == "FIXED_REGION":
                if fixed_mask is None:
                    raise BacktestError("fixed_region model needs a region mask")
                fc = fixed_region_forecast(ytr, Wtr, Xtr, fixed_mask, w_new, x_new)
                preds[n].append(float(fc.predictions[0]))
                hpd[n].append((None, None))
            else:
                raise BacktestError(f"unknown model {n!r}")

    observed = np.asarray(observed, dtype=float)
    predictions = {n: np.asarray(v, dtype=float) for n, v in preds.items()}
    reports = {n: forecast_metrics(observed, p) for n, p in predictions.items()}
    persistent = {}
    for n, masks in active.items():
        if len(masks) >= 2:
            arr = np.array(masks)
            persistent[n] = np.any(arr[1:] & arr[:-1], axis=0)
    return BacktestResult(
        years=np.asarray(targets),
        observed=observed,
        predictions=predictions,
        hpd=hpd,
        reports=reports,
        active=active,
        persistent=persistent,
        max_rhat=max_rhat,
        train_years=train_years,
    )


def _reseed(cfg: SamplerConfig, t: int) -> SamplerConfig:
    return replace(cfg, seed=int(cfg.seed) + int(t), init_steps=dict(cfg.init_steps))
