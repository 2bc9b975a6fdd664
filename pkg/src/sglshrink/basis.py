"""Tensor-product B-spline expansion of a spatial coefficient field.

Each axis uses a clamped (open) knot vector over its breakpoints, so an axis
with ``m`` breakpoints and degree ``d`` has ``m - 1 + d`` basis functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import LatticeGraph, build_lattice

__all__ = [
    "BSplineAxis",
    "TensorProductBasis",
    "BasisMatrix",
    "bspline_eval_1d",
    "tensor_basis_matrix",
    "expand_design",
    "coefficient_graph",
    "OutOfHullError",
]


class OutOfHullError(ValueError):
    pass


@dataclass(frozen=True)
class BSplineAxis:
    breakpoints: tuple
    degree: int = 3

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        if len(bp) < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing with at least two entries")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def uniform(cls, lo: float, hi: float, n_nodes: int, degree: int = 3) -> "BSplineAxis":
        return cls(tuple(np.linspace(lo, hi, n_nodes)), degree)

    @property
    def knots(self) -> np.ndarray:
        bp = np.asarray(self.breakpoints)
        d = self.degree
        return np.concatenate([np.full(d, bp[0]), bp, np.full(d, bp[-1])])

    @property
    def n_basis(self) -> int:
        return len(self.breakpoints) - 1 + self.degree


def bspline_eval_1d(axis: BSplineAxis, t: float) -> np.ndarray:
    """Values of all ``axis.n_basis`` B-splines at ``t`` (Cox-de Boor recursion)."""
    bp = axis.breakpoints
    if not (bp[0] <= t <= bp[-1]):
        raise OutOfHullError(f"t={t} outside [{bp[0]}, {bp[-1]}]")
    U = axis.knots
    p = axis.degree
    L = axis.n_basis
    # knot span: U[span] <= t < U[span + 1]; the right end uses the last non-empty span
    span = int(np.searchsorted(U, t, side="right") - 1)
    span = min(span, L - 1)
    N = np.zeros(p + 1)
    N[0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = t - U[span + 1 - j]
        right[j] = U[span + j] - t
        saved = 0.0
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    out = np.zeros(L)
    out[span - p : span + 1] = N
    return out


@dataclass(frozen=True)
class TensorProductBasis:
    lon: BSplineAxis
    lat: BSplineAxis

    @classmethod
    def uniform(
        cls,
        lon_range: Sequence[float],
        lat_range: Sequence[float],
        n_lon: int = 17,
        n_lat: int = 12,
        degree: int = 3,
    ) -> "TensorProductBasis":
        return cls(
            BSplineAxis.uniform(lon_range[0], lon_range[1], n_lon, degree),
            BSplineAxis.uniform(lat_range[0], lat_range[1], n_lat, degree),
        )

    @property
    def shape(self) -> tuple:
        return self.lon.n_basis, self.lat.n_basis

    @property
    def n_basis(self) -> int:
        return self.lon.n_basis * self.lat.n_basis


@dataclass
class BasisMatrix:
    M: np.ndarray
    locations: np.ndarray
    basis: TensorProductBasis


def tensor_basis_matrix(locations, basis: TensorProductBasis) -> BasisMatrix:
    """``M[j, a * L_lat + b] = B_a(lon_j) * B_b(lat_j)``."""
    loc = np.asarray(locations, dtype=float).reshape(-1, 2)
    M = np.empty((loc.shape[0], basis.n_basis))
    for j, (lon, lat) in enumerate(loc):
        try:
            bl = bspline_eval_1d(basis.lon, lon)
            bt = bspline_eval_1d(basis.lat, lat)
        except OutOfHullError as exc:
            raise OutOfHullError(f"location {j} ({lon}, {lat}) is outside the basis hull: {exc}") from None
        M[j] = np.outer(bl, bt).ravel()
    return BasisMatrix(M, loc, basis)


def expand_design(X, M) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    M = np.asarray(getattr(M, "M", M), dtype=float)
    if X.ndim != 2 or M.ndim != 2 or X.shape[1] != M.shape[0]:
        raise ValueError(f"cannot expand X{X.shape} with M{M.shape}")
    return X @ M


def coefficient_graph(basis: TensorProductBasis) -> LatticeGraph:
    """Rook lattice over the ``(L_lon, L_lat)`` grid of spline coefficients.

    Node ``a * L_lat + b`` matches the column order of ``tensor_basis_matrix``.
    """
    return build_lattice(*basis.shape)
