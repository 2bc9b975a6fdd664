from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import naive_estimation
from sglshrink.metrics import estimation_metrics, forecast_metrics, pred_rmse, selection_metrics


def test_estimation_exact():
    r = estimation_metrics([6, 0, 0], [6, 0, 0], [True, False, False])
    assert (r.signal_rmse, r.noise_rmse, r.beta_rmse) == (0.0, 0.0, 0.0)


def test_estimation_hand_case():
    r = estimation_metrics([5, 1], [6, 0], [True, False])
    assert (r.signal_rmse, r.noise_rmse, r.beta_rmse) == (1.0, 1.0, 1.0)


def test_estimation_empty_mask():
    r = estimation_metrics([1, 2], [0, 0], [False, False])
    assert r.signal_rmse is None and r.noise_rmse is not None


def test_estimation_matches_naive_loop():
    rng = np.random.default_rng(0)
    for _ in range(20):
        J = int(rng.integers(2, 40))
        bh, bs = rng.normal(size=J), rng.normal(size=J)
        m = rng.random(J) < 0.3
        m[0] = True
        m[1] = False
        r = estimation_metrics(bh, bs, m)
        s, n, t = naive_estimation(bh, bs, m)
        assert r.signal_rmse == pytest.approx(s, abs=1e-12)
        assert r.noise_rmse == pytest.approx(n, abs=1e-12)
        assert r.beta_rmse == pytest.approx(t, abs=1e-12)


def test_selection_cases():
    r = selection_metrics([True, False], [True, False])
    assert (r.fpr, r.fnr) == (0.0, 0.0)
    r = selection_metrics([True] * 4, [True, True, False, False])
    assert (r.fpr, r.fnr) == (1.0, 0.0)
    a = [True] * 3 + [True] + [False] * 5 + [False]
    m = [True] * 3 + [False] + [False] * 5 + [True]
    r = selection_metrics(a, m)
    assert (r.tp, r.fp, r.tn, r.fn) == (3, 1, 5, 1)
    assert r.fpr == pytest.approx(1 / 6) and r.fnr == pytest.approx(1 / 4)


def test_selection_undefined_rates():
    assert selection_metrics([True, True], [True, True]).fpr is None
    assert selection_metrics([False, False], [False, False]).fnr is None


def test_forecast_cases():
    y = np.array([1.0, 4.0, 2.0])
    r = forecast_metrics(y, y)
    assert (r.mae, r.rmse, r.max_ae, r.sdr) == (0.0, 0.0, 0.0, 1.0)
    assert forecast_metrics(y, np.full(3, 2.0)).sdr == 0.0
    r = forecast_metrics([1, 3], [2, 2])
    assert (r.mae, r.rmse, r.max_ae, r.sdr) == (1.0, 1.0, 1.0, 0.0)


def test_forecast_constant_truth():
    assert forecast_metrics([2, 2, 2], [1, 2, 3]).sdr is None


def test_forecast_null_serialization():
    d = forecast_metrics([2, 2], [1, 3]).as_dict()
    assert d["sdr"] is None


def test_pred_rmse():
    assert pred_rmse([1, 2, 3], [1, 2, 5]) == pytest.approx(math.sqrt(4 / 3))


@given(st.integers(0, 10_000))
def test_pooled_rmse_identity(seed):
    rng = np.random.default_rng(seed)
    J = int(rng.integers(3, 60))
    m = rng.random(J) < 0.4
    m[0], m[1] = True, False
    bh, bs = rng.normal(size=J) * 3, rng.normal(size=J) * 3
    r = estimation_metrics(bh, bs, m)
    lhs = r.beta_rmse**2 * J
    rhs = r.signal_rmse**2 * m.sum() + r.noise_rmse**2 * (J - m.sum())
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=30))
def test_forecast_ordering(pairs):
    y, yh = map(np.array, zip(*pairs))
    r = forecast_metrics(y, yh)
    assert r.mae <= r.rmse * (1 + 1e-12) + 1e-12
    assert r.rmse <= r.max_ae * (1 + 1e-12) + 1e-12


@given(st.integers(0, 1000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    y, yh = rng.poisson(5, 12).astype(float), rng.normal(5, 2, 12)
    p = rng.permutation(12)
    a, b = forecast_metrics(y, yh), forecast_metrics(y[p], yh[p])
    assert a.mae == pytest.approx(b.mae) and a.rmse == pytest.approx(b.rmse) and a.max_ae == b.max_ae
