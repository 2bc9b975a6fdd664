"""Areal adjacency graphs and the CAR linear algebra built on them.

The proper CAR precision on a graph with adjacency ``A`` and degree matrix
``D`` is ``Q = D - rho * A``.  Writing ``N = D^{-1/2} A D^{-1/2}`` gives
``Q = D^{1/2} (I - rho N) D^{1/2}``, so the log-determinant for any ``rho``
is available in O(J) once the spectrum of ``N`` has been computed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, reverse_cuthill_mckee

__all__ = [
    "LatticeGraph",
    "CarField",
    "build_lattice",
    "graph_from_edges",
    "car_precision",
    "car_log_det",
    "sample_car",
    "induced_covariance",
    "path_series_covariance",
]


class GraphError(ValueError):
    """Raised for graphs that cannot carry a proper CAR prior."""


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """Undirected, connected, unweighted areal graph.

    ``rows``/``cols`` are set for rectangular lattices (cell ``j`` sits at
    ``divmod(j, cols)``) and are ``None`` for graphs built from an edge list.
    """

    adjacency: sp.csr_matrix
    rows: Optional[int] = None
    cols: Optional[int] = None
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        A = sp.csr_matrix(self.adjacency, dtype=float)
        A.eliminate_zeros()
        if A.shape[0] != A.shape[1]:
            raise GraphError("adjacency must be square")
        if A.shape[0] < 2:
            raise GraphError("a CAR graph needs at least two regions")
        if (A != A.T).nnz:
            raise GraphError("adjacency must be symmetric")
        if A.diagonal().any():
            raise GraphError("adjacency must have a zero diagonal")
        if np.any((A.data != 1.0)):
            raise GraphError("adjacency entries must be 0/1")
        n_comp, _ = connected_components(A, directed=False)
        if n_comp != 1:
            raise GraphError(
                f"graph has {n_comp} connected components; supply the largest component only"
            )
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "degrees", np.asarray(A.sum(axis=1)).ravel().astype(int))

    @property
    def n_regions(self) -> int:
        return self.adjacency.shape[0]

    @property
    def is_lattice(self) -> bool:
        return self.rows is not None and self.cols is not None

    def cell(self, j: int) -> tuple[int, int]:
        if not self.is_lattice:
            raise GraphError("graph has no lattice coordinates")
        return divmod(int(j), self.cols)

    @cached_property
    def normalized_spectrum(self) -> np.ndarray:
        """Eigenvalues of ``D^{-1/2} A D^{-1/2}`` in ascending order."""
        s = 1.0 / np.sqrt(self.degrees)
        N = self.adjacency.toarray() * s[:, None] * s[None, :]
        return np.linalg.eigvalsh(N)

    @cached_property
    def edges(self) -> np.ndarray:
        """Upper-triangular edge list, shape (n_edges, 2)."""
        U = sp.triu(self.adjacency, k=1).tocoo()
        return np.column_stack([U.row, U.col]).astype(np.int64)

    @cached_property
    def _rcm_order(self) -> np.ndarray:
        return reverse_cuthill_mckee(self.adjacency, symmetric_mode=True)

    def distances(self, source: int) -> np.ndarray:
        """Shortest-path (hop) distances from ``source``; -1 if unreachable."""
        from scipy.sparse.csgraph import breadth_first_order

        order, pred = breadth_first_order(self.adjacency, source, directed=False)
        dist = np.full(self.n_regions, -1, dtype=int)
        dist[source] = 0
        for v in order[1:]:
            dist[v] = dist[pred[v]] + 1
        return dist


def build_lattice(rows: int, cols: int) -> LatticeGraph:
    """Rook (4-neighbour) lattice over a ``rows x cols`` grid, row-major."""
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GraphError(f"lattice {rows}x{cols} has no neighbours")
    idx = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    e = np.vstack([horiz, vert])
    return LatticeGraph(_adjacency_from_edges(e, rows * cols), rows=rows, cols=cols)


def graph_from_edges(edges: Iterable[Sequence[int]], n_nodes: int) -> LatticeGraph:
    """Graph from 0-based ``(node_a, node_b)`` pairs; duplicates are merged."""
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n_nodes):
        raise GraphError("edge endpoint outside [0, n_nodes)")
    if np.any(e[:, 0] == e[:, 1]):
        raise GraphError("self-loops are not allowed")
    return LatticeGraph(_adjacency_from_edges(e, n_nodes))


def _adjacency_from_edges(e: np.ndarray, n: int) -> sp.csr_matrix:
    i = np.concatenate([e[:, 0], e[:, 1]])
    j = np.concatenate([e[:, 1], e[:, 0]])
    A = sp.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
    A.data[:] = 1.0
    return A


@dataclass(frozen=True)
class CarField:
    graph: LatticeGraph
    rho: float

    def __post_init__(self):
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")


def car_precision(field: CarField) -> sp.csr_matrix:
    g = field.graph
    return (sp.diags(g.degrees.astype(float)) - field.rho * g.adjacency).tocsr()


def car_log_det(field: CarField) -> float:
    g = field.graph
    if not (0.0 <= field.rho < 1.0):
        raise ValueError("rho outside [0, 1)")
    return float(np.sum(np.log(g.degrees)) + np.sum(np.log1p(-field.rho * g.normalized_spectrum)))


def _banded_upper_cholesky(field: CarField):
    """Banded Cholesky of the RCM-permuted precision: ``Q[p][:, p] = U' U``."""
    perm = field.graph._rcm_order
    Qp = car_precision(field)[perm][:, perm].tocoo()
    bw = int(np.max(np.abs(Qp.row - Qp.col))) if Qp.nnz else 0
    n = Qp.shape[0]
    ab = np.zeros((bw + 1, n))
    upper = Qp.col >= Qp.row
    ab[bw + Qp.row[upper] - Qp.col[upper], Qp.col[upper]] = Qp.data[upper]
    try:
        cb = sla.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - excluded by the rho range
        raise np.linalg.LinAlgError("CAR precision is not positive definite") from exc
    return perm, cb, bw


def sample_car(field: CarField, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Exact draw(s) from ``N(0, (D - rho A)^{-1})``.

    Solves ``U x = z`` against the banded Cholesky factor, so the cost per draw
    is O(J * bandwidth).  Returns shape ``(J,)`` or ``(size, J)``.
    """
    perm, cb, bw = _banded_upper_cholesky(field)
    J = field.graph.n_regions
    m = 1 if size is None else int(size)
    z = rng.standard_normal((J, m))
    xp = sla.solve_banded((0, bw), cb, z)
    x = np.empty_like(xp)
    x[perm] = xp
    return x[:, 0] if size is None else x.T


def induced_covariance(field: CarField, tau: float, lam: np.ndarray) -> np.ndarray:
    """Prior covariance of ``beta = tau * diag(lam) * beta_tilde`` given the scales."""
    lam = np.asarray(lam, dtype=float)
    J = field.graph.n_regions
    if lam.shape != (J,):
        raise ValueError(f"lambda must have length {J}")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if np.any(lam <= 0):
        raise ValueError("local scales must be positive")
    Q = car_precision(field).toarray()
    S = sla.solve(Q, np.eye(J), assume_a="pos")
    S = 0.5 * (S + S.T)
    return tau**2 * lam[:, None] * S * lam[None, :]


def path_series_covariance(
    field: CarField,
    tau: float,
    lam_j: float,
    lam_k: float,
    j: int,
    k: int,
    max_len: int,
) -> float:
    """Truncated path-count expansion of the covariance between ``beta_j`` and ``beta_k``.

    Sums ``(A^l)_{jk} rho^l / sqrt(D_jj^l D_kk^l)`` for ``l = 1..max_len`` and scales
    by ``tau^2 lam_j lam_k / sqrt(D_jj D_kk)``.  On regular graphs this is the
    Neumann series of ``(D - rho A)^{-1}``; on irregular graphs it weights paths
    by the endpoint degrees only and therefore differs from
    :func:`induced_covariance`.
    """
    if j == k:
        raise ValueError("path series is defined for j != k")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    g = field.graph
    A = g.adjacency
    dj, dk = float(g.degrees[j]), float(g.degrees[k])
    v = np.zeros(g.n_regions)
    v[k] = 1.0
    total = 0.0
    for length in range(1, max_len + 1):
        v = A @ v
        if v[j]:
            total += v[j] * field.rho**length / np.sqrt(dj**length * dk**length)
    return float(tau**2 * lam_j * lam_k / np.sqrt(dj * dk) * total)
