from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exhaustive_hpd
from sglshrink.inference import (
    hpd_interval,
    persistently_active,
    posterior_predictive,
    select_regions_hpd,
    select_regions_sn,
    summarize,
)


class _Chain:
    """Minimal chain stand-in exposing ``block``."""

    def __init__(self, alpha, beta):
        self._b = {"alpha": np.atleast_2d(alpha), "beta": np.atleast_2d(beta)}

    def block(self, name):
        return self._b[name]


def test_hpd_constant():
    assert hpd_interval(np.full(200, 3.5)) == (3.5, 3.5)


def test_hpd_exponential():
    x = np.random.default_rng(0).exponential(size=200_000)
    lo, hi = hpd_interval(x, 0.95)
    assert lo == pytest.approx(0.0, abs=0.01)
    assert hi == pytest.approx(-math.log(0.05), abs=0.05)


def test_hpd_too_few_samples():
    with pytest.raises(ValueError):
        hpd_interval(np.arange(99.0))
    with pytest.raises(ValueError):
        hpd_interval(np.arange(200.0), 1.0)


def test_hpd_contains_required_mass():
    x = np.random.default_rng(1).gamma(2.0, size=1001)
    lo, hi = hpd_interval(x, 0.9)
    assert np.sum((x >= lo) & (x <= hi)) >= math.ceil(0.9 * 1001)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 0.8, 0.95]))
def test_hpd_matches_exhaustive_oracle(seed, level):
    x = np.random.default_rng(seed).standard_t(3, size=150)
    assert hpd_interval(x, level) == exhaustive_hpd(x, level)


def test_select_hpd_cases():
    rng = np.random.default_rng(0)
    B = np.column_stack([rng.uniform(0.1, 1.0, 500), rng.normal(0, 1, 500), -rng.uniform(0.1, 1.0, 500)])
    sel = select_regions_hpd(B)
    assert sel.active.tolist() == [True, False, True]
    assert sel.rule == "HPD" and sel.level == 0.95


def test_selection_monotone_in_level():
    rng = np.random.default_rng(3)
    B = rng.normal(loc=np.linspace(-3, 3, 25), size=(2000, 25))
    prev = select_regions_hpd(B, 0.5).active
    for lvl in (0.8, 0.9, 0.95, 0.99):
        cur = select_regions_hpd(B, lvl).active
        assert not np.any(cur & ~prev)
        prev = cur


def test_select_sn_cases():
    rng = np.random.default_rng(0)
    B = np.column_stack([rng.normal(0, 1, 20_000), rng.normal(5, 1, 20_000), np.zeros(20_000)])
    sel = select_regions_sn(B)
    assert sel.active.tolist() == [False, True, False]
    assert sel.flagged.tolist() == [False, False, True]


def test_sn_tie_is_inactive_and_flagged():
    # sd of (+-a) with ddof=1 is slightly above a, so give half the mass at 0
    B = np.array([0.0] * 100 + [10.0] * 100)[:, None]
    sel = select_regions_sn(B)
    assert not sel.active[0] and sel.flagged[0]


def test_summarize():
    x = np.random.default_rng(0).normal(size=(5000, 2)) * [1, 2]
    s = summarize(x, ["a", "b"])
    assert s.names == ["a", "b"]
    assert np.allclose(s.sd, [1, 2], atol=0.05)
    assert np.all(s.hpd_lower < s.hpd_upper)


def test_predictive_degenerate():
    chains = [_Chain(np.zeros((5000, 1)), np.zeros((5000, 3))), _Chain(np.zeros((5000, 1)), np.zeros((5000, 3)))]
    r = posterior_predictive(chains, [1.0], np.ones(3), np.random.default_rng(0))
    assert r.mean == pytest.approx(1.0, abs=0.03)
    assert r.theta_mean == 1.0
    assert r.rounded == 1


def test_predictive_x_zero_depends_on_alpha_only():
    rng = np.random.default_rng(1)
    alpha = rng.normal(1.0, 0.1, (2000, 1))
    c1 = [_Chain(alpha, rng.normal(size=(2000, 4)))]
    c2 = [_Chain(alpha, rng.normal(size=(2000, 4)) * 10)]
    a = posterior_predictive(c1, [1.0], np.zeros(4), np.random.default_rng(5))
    b = posterior_predictive(c2, [1.0], np.zeros(4), np.random.default_rng(5))
    assert np.array_equal(a.draws, b.draws)


def test_predictive_mean_matches_theta_mean():
    rng = np.random.default_rng(2)
    c = [_Chain(rng.normal(1.5, 0.2, (40_000, 1)), np.zeros((40_000, 2)))]
    r = posterior_predictive(c, [1.0], np.zeros(2), np.random.default_rng(0))
    assert r.mean == pytest.approx(r.theta_mean, rel=0.02)


def test_predictive_overflow_guard():
    c = [_Chain(np.full((200, 1), 800.0), np.zeros((200, 2)))]
    with pytest.raises(FloatingPointError):
        posterior_predictive(c, [1.0], np.zeros(2), np.random.default_rng(0))


def test_persistently_active_cases():
    T, F = True, False
    assert persistently_active([[T], [T]]).tolist() == [True]
    assert persistently_active([[T], [F], [T], [F]]).tolist() == [False]
    assert persistently_active([[F], [T], [T], [F]]).tolist() == [True]
    with pytest.raises(ValueError):
        persistently_active([[T]])


@given(st.lists(st.lists(st.booleans(), min_size=5, max_size=5), min_size=2, max_size=8))
def test_persistently_active_subset_of_union(masks):
    p = persistently_active(masks)
    assert not np.any(p & ~np.any(np.array(masks), axis=0))


def test_persistently_active_accepts_selection_results():
    r = [SimpleNamespace(active=np.array([True, False])), SimpleNamespace(active=np.array([True, True]))]
    assert persistently_active(r).tolist() == [True, False]
