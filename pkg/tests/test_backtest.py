from __future__ import annotations

import numpy as np
import pytest

from sglshrink.backtest import BacktestError, MEASURES, run_backtest, training_rows
from sglshrink.graph import build_lattice
from sglshrink.model import Dataset
from sglshrink.sampler import SamplerConfig
from sglshrink.simgen import simulate_series

FAST = SamplerConfig(n_iter=1500, burn_in=500, n_chains=1, thin=5, seed=3)


def _series(n=16, seed=0):
    return simulate_series(n_years=n, rows=2, cols=2, block_shape=(1, 1), seed=seed)


def test_training_rows_strictly_before():
    yrs = np.array([2000, 2001, 2002, 2003])
    assert training_rows(yrs, 2002).tolist() == [0, 1]
    assert training_rows(yrs, 2000).size == 0


def test_single_year_window_maxae_equals_mae():
    s = _series()
    r = run_backtest(s.data, s.years, s.graph, ["MA"], 2005, 2005, FAST)
    rep = r.reports["MA"]
    assert rep.max_ae == rep.mae == rep.rmse


def test_ma_on_constant_series_is_exact():
    n = 12
    d = Dataset(np.full(n, 4.0), np.ones((n, 1)), np.random.default_rng(0).normal(size=(n, 4)))
    r = run_backtest(d, np.arange(2000, 2000 + n), build_lattice(2, 2), ["MA"], 2006, 2011, FAST)
    assert r.reports["MA"].mae == 0.0 and r.reports["MA"].max_ae == 0.0


def test_table_layout():
    s = _series()
    r = run_backtest(s.data, s.years, s.graph, ["MA", "TSTAT"], 2003, 2006, FAST)
    tab = r.table()
    assert [row[0] for row in tab] == list(MEASURES)
    assert all(len(row) == 3 for row in tab)


def test_dlc_tracks_signal_while_constant_does_not():
    s = _series(n=20, seed=1)
    r = run_backtest(s.data, s.years, s.graph, ["DLC", "MA"], 2000, 2010, FAST)
    assert len(r.observed) == 11
    assert r.reports["DLC"].sdr > 0
    # a flat truth leaves SDR undefined; flat predictions give SDR 0
    d = Dataset(np.full(20, 4.0), np.ones((20, 1)), s.data.X)
    flat = run_backtest(d, s.years, s.graph, ["MA"], 2000, 2010, FAST)
    assert flat.reports["MA"].sdr is None
    yconst = np.where(s.years < 2000, 4.0, s.data.y)
    d = Dataset(yconst, np.ones((20, 1)), s.data.X)
    r3 = run_backtest(d, s.years, s.graph, ["MA"], 2000, 2000 + 4, FAST, ma_window=5)
    assert r3.predictions["MA"][0] == 4.0


def test_no_leakage_from_future_years():
    s = _series(n=14, seed=2)
    t = 2000
    base = run_backtest(s.data, s.years, s.graph, ["DLC", "MA", "TSTAT"], t, t, FAST)
    y = s.data.y.copy()
    y[s.years >= t] += 50
    X = s.data.X.copy()
    X[s.years > t] *= 5
    d2 = Dataset(y, s.data.W, X)
    pert = run_backtest(d2, s.years, s.graph, ["DLC", "MA", "TSTAT"], t, t, FAST)
    for m in ("DLC", "MA", "TSTAT"):
        assert np.array_equal(base.predictions[m], pert.predictions[m]), m
    assert base.train_years[t].max() < t


def test_deterministic():
    s = _series()
    a = run_backtest(s.data, s.years, s.graph, ["DLC"], 2003, 2005, FAST)
    b = run_backtest(s.data, s.years, s.graph, ["DLC"], 2003, 2005, FAST)
    assert np.array_equal(a.predictions["DLC"], b.predictions["DLC"])


def test_persistent_regions_reported():
    s = _series()
    r = run_backtest(s.data, s.years, s.graph, ["DLC"], 2003, 2005, FAST)
    assert r.persistent["DLC"].shape == (4,)
    assert len(r.active["DLC"]) == 3


def test_errors():
    s = _series()
    with pytest.raises(BacktestError):
        run_backtest(s.data, s.years, s.graph, ["MA"], 1990, 1995, FAST)
    with pytest.raises(BacktestError):
        run_backtest(s.data, s.years, s.graph, ["MA"], 1992, 1992, FAST)
    with pytest.raises(BacktestError):
        run_backtest(s.data, s.years, s.graph, ["FIXED_REGION"], 2000, 2000, FAST)
    with pytest.raises(BacktestError):
        run_backtest(s.data, s.years[:-1], s.graph, ["MA"], 2000, 2000, FAST)
