from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_bspline
from sglshrink.basis import (
    BSplineAxis,
    OutOfHullError,
    TensorProductBasis,
    bspline_eval_1d,
    coefficient_graph,
    expand_design,
    tensor_basis_matrix,
)


def test_basis_counts():
    b = TensorProductBasis.uniform((-100, 0), (0, 60))
    assert b.shape == (19, 14) and b.n_basis == 266
    assert TensorProductBasis.uniform((0, 1), (0, 1), 18, 13).n_basis == 300


def test_degree_zero_indicator():
    ax = BSplineAxis((0.0, 1.0, 2.0), degree=0)
    assert bspline_eval_1d(ax, 0.5).tolist() == [1.0, 0.0]
    assert bspline_eval_1d(ax, 1.5).tolist() == [0.0, 1.0]
    assert bspline_eval_1d(ax, 2.0).tolist() == [0.0, 1.0]


def test_out_of_hull():
    ax = BSplineAxis.uniform(0, 1, 5)
    with pytest.raises(OutOfHullError):
        bspline_eval_1d(ax, 1.0001)
    b = TensorProductBasis.uniform((0, 1), (0, 1), 4, 4)
    with pytest.raises(OutOfHullError, match="location 1"):
        tensor_basis_matrix([(0.5, 0.5), (2.0, 0.5)], b)


def test_invalid_breakpoints():
    with pytest.raises(ValueError):
        BSplineAxis((0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        BSplineAxis((0.0,))


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_naive_oracle_agreement(degree):
    ax = BSplineAxis.uniform(-2.0, 3.0, 7, degree)
    U = ax.knots
    rng = np.random.default_rng(degree)
    pts = np.concatenate([rng.uniform(-2, 3, 50), ax.breakpoints, [(-2 + 3) / 2]])
    for t in pts:
        v = bspline_eval_1d(ax, t)
        want = [naive_bspline(i, degree, U, t) for i in range(ax.n_basis)]
        assert np.max(np.abs(v - want)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_partition_of_unity_and_nonnegative(t):
    ax = BSplineAxis.uniform(0.0, 1.0, 17)
    v = bspline_eval_1d(ax, t)
    assert abs(v.sum() - 1.0) < 1e-12
    assert np.all(v >= 0)
    assert np.count_nonzero(v) <= 4


def test_local_support_of_matrix():
    b = TensorProductBasis.uniform((0, 16), (0, 11))
    rng = np.random.default_rng(0)
    loc = rng.uniform([0, 0], [16, 11], size=(300, 2))
    M = tensor_basis_matrix(loc, b).M
    assert np.all(np.count_nonzero(M, axis=1) <= 16)
    # column (a, b) only touches locations in its 4x4 interval footprint
    for col in range(M.shape[1]):
        a, c = divmod(col, b.shape[1])
        hit = M[:, col] > 0
        assert np.all((loc[hit, 0] >= a - 3 - 1e-9) & (loc[hit, 0] <= a + 1 + 1e-9))
        assert np.all((loc[hit, 1] >= c - 3 - 1e-9) & (loc[hit, 1] <= c + 1 + 1e-9))


def test_tensor_center_row_sums_to_one():
    b = TensorProductBasis.uniform((-60, -20), (0, 20))
    M = tensor_basis_matrix([(-40, 10)], b).M
    assert M.sum() == pytest.approx(1.0, abs=1e-12)


def test_single_basis_function_per_axis():
    ax = BSplineAxis((0.0, 1.0), degree=0)
    b = TensorProductBasis(ax, ax)
    M = tensor_basis_matrix([(0.2, 0.3), (1.0, 1.0), (0.0, 0.9)], b).M
    assert M.shape == (3, 1) and np.all(M == 1.0)


def test_tensor_outer_product_oracle():
    b = TensorProductBasis.uniform((0, 5), (10, 12), 6, 4, 3)
    loc = np.random.default_rng(4).uniform([0, 10], [5, 12], size=(5, 2))
    M = tensor_basis_matrix(loc, b).M
    U, V = b.lon.knots, b.lat.knots
    Llat = b.shape[1]
    for j, (x, y) in enumerate(loc):
        for a in range(b.shape[0]):
            for c in range(Llat):
                want = naive_bspline(a, 3, U, x) * naive_bspline(c, 3, V, y)
                assert M[j, a * Llat + c] == pytest.approx(want, abs=1e-12)


def test_continuity_of_reconstructed_field():
    b = TensorProductBasis.uniform((0, 1), (0, 1), 6, 6)
    gamma = np.random.default_rng(0).normal(size=b.n_basis)
    xs = np.linspace(0, 1, 2001)
    field = tensor_basis_matrix(np.column_stack([xs, np.full_like(xs, 0.37)]), b).M @ gamma
    # cubic splines with 5 intervals: |d/dx| <= 2 * degree * max|gamma| / h
    bound = 2 * 3 * np.abs(gamma).max() / 0.2
    assert np.max(np.abs(np.diff(field))) <= bound * (xs[1] - xs[0])


def test_expand_design():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 3))
    assert np.array_equal(expand_design(X, np.eye(3)), X)
    b = TensorProductBasis.uniform((0, 1), (0, 1), 4, 4)
    M = tensor_basis_matrix(rng.uniform(size=(6, 2)), b)
    assert expand_design(np.ones((1, 6)), M).sum() == pytest.approx(6.0)
    X = rng.normal(size=(3, 6))
    naive = np.array([[sum(X[i, j] * M.M[j, l] for j in range(6)) for l in range(M.M.shape[1])] for i in range(3)])
    assert np.max(np.abs(expand_design(X, M) - naive)) < 1e-12
    with pytest.raises(ValueError):
        expand_design(np.ones((2, 5)), M)


def test_coefficient_graph_matches_columns():
    b = TensorProductBasis.uniform((0, 1), (0, 1), 4, 3, 2)
    g = coefficient_graph(b)
    assert g.n_regions == b.n_basis
    assert (g.rows, g.cols) == b.shape
