"""CSV and JSON readers/writers for datasets, chains, selections and scenarios.

Floats are written with ``repr`` (shortest round-trip form), so identical
arrays always serialise to identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import LatticeGraph, graph_from_edges
from .model import Dataset

__all__ = [
    "DataError",
    "fmt",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
    "standardize_columns",
    "LoadedData",
    "read_dataset",
    "write_dataset",
    "write_split",
    "read_split",
    "read_edges",
    "read_locations",
    "write_chain",
    "read_chain",
    "write_selection",
    "write_grid",
    "read_grid",
]


class DataError(ValueError):
    """Missing, malformed or inconsistent input data."""


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x.is_integer() and abs(x) < 1e15:
            return str(int(x))
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_csv(path) -> tuple[list, list]:
    """``(header, rows)`` with rows as lists of strings."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{i}: expected {len(header)} fields, found {len(r)}")
    return header, body


def _numeric(path, header, body) -> np.ndarray:
    try:
        return np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from None


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def standardize_columns(train: np.ndarray, *others: np.ndarray) -> list:
    """Centre and scale columns by training moments.

    Constant training columns (e.g. an intercept) are left untouched.
    """
    train = np.asarray(train, dtype=float)
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    const = ~(sd > 0)
    mu = np.where(const, 0.0, mu)
    sd = np.where(const, 1.0, sd)
    return [(np.asarray(a, dtype=float) - mu) / sd for a in (train, *others)]


class LoadedData:
    """A dataset plus its optional year index and region ids."""

    def __init__(self, data: Dataset, years: Optional[np.ndarray], region_ids: list, w_names: list):
        self.data = data
        self.years = years
        self.region_ids = region_ids
        self.w_names = w_names


def read_dataset(y_path, W_path, X_path, standardize: bool = False) -> LoadedData:
    """Read the three-file layout: ``y`` (optional ``year``), ``W`` and ``X``.

    The header of the X file holds the region ids.
    """
    yh, yb = read_csv(y_path)
    if "y" not in yh:
        raise DataError(f"{y_path}: no 'y' column")
    ya = _numeric(y_path, yh, yb)
    y = ya[:, yh.index("y")]
    years = ya[:, yh.index("year")].astype(int) if "year" in yh else None
    wh, wb = read_csv(W_path)
    W = _numeric(W_path, wh, wb)
    xh, xb = read_csv(X_path)
    X = _numeric(X_path, xh, xb)
    if standardize:
        W, X = standardize_columns(W)[0], standardize_columns(X)[0]
    if years is not None and np.any(np.diff(years) <= 0):
        raise DataError(f"{y_path}: years must be strictly increasing")
    try:
        data = Dataset(y, W, X, standardized=standardize)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return LoadedData(data, years, xh, wh)


def write_dataset(directory, data: Dataset, years=None, region_ids=None, w_names=None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if years is None:
        write_csv(d / "y.csv", ["y"], ([v] for v in data.y))
    else:
        write_csv(d / "y.csv", ["year", "y"], zip(years, data.y))
    w_names = w_names or [f"w{k}" for k in range(data.K)]
    region_ids = region_ids or [f"r{j}" for j in range(data.J)]
    write_csv(d / "W.csv", w_names, data.W)
    write_csv(d / "X.csv", region_ids, data.X)
    return d


def write_split(path, data: Dataset) -> Path:
    """One wide CSV: ``y``, then ``w_<k>`` and ``x_<j>`` columns."""
    header = ["y"] + [f"w_{k}" for k in range(data.K)] + [f"x_{j}" for j in range(data.J)]
    return write_csv(path, header, (np.concatenate([[data.y[i]], data.W[i], data.X[i]]) for i in range(data.n)))


def read_split(path) -> LoadedData:
    h, b = read_csv(path)
    if not h or h[0] != "y":
        raise DataError(f"{path}: first column must be 'y'")
    a = _numeric(path, h, b)
    wi = [i for i, c in enumerate(h) if c.startswith("w_")]
    xi = [i for i, c in enumerate(h) if c.startswith("x_")]
    if len(wi) + len(xi) + 1 != len(h):
        raise DataError(f"{path}: columns must be y, w_*, x_*")
    try:
        data = Dataset(a[:, 0], a[:, wi], a[:, xi], standardized=True)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return LoadedData(data, None, [f"r{c[2:]}" for c in (h[i] for i in xi)], [h[i] for i in wi])


def read_edges(path, n_nodes: int) -> LatticeGraph:
    h, b = read_csv(path)
    if h[:2] != ["node_a", "node_b"]:
        raise DataError(f"{path}: expected header node_a,node_b")
    try:
        edges = [(int(r[0]), int(r[1])) for r in b]
    except ValueError:
        raise DataError(f"{path}: node ids must be integers") from None
    try:
        return graph_from_edges(edges, n_nodes)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def read_locations(path) -> tuple[list, np.ndarray]:
    """``(region_ids, coords)`` from a ``region_id,lon,lat`` file."""
    h, b = read_csv(path)
    if h[:3] != ["region_id", "lon", "lat"]:
        raise DataError(f"{path}: expected header region_id,lon,lat")
    ids = [r[0] for r in b]
    coords = _numeric(path, ["lon", "lat"], [r[1:3] for r in b])
    return ids, coords


def write_chain(path, chain) -> Path:
    return write_csv(path, chain.columns, chain.draws)


def read_chain(path) -> tuple[list, np.ndarray]:
    h, b = read_csv(path)
    return h, _numeric(path, h, b)


def write_selection(path, result, graph: Optional[LatticeGraph] = None, region_ids=None) -> Path:
    J = result.active.shape[0]
    region_ids = region_ids or [str(j) for j in range(J)]
    on_grid = graph is not None and graph.is_lattice and graph.n_regions == J

    def cell(j):
        return graph.cell(j) if on_grid else (None, None)

    def opt(a, j):
        return None if a is None else a[j]

    rows = (
        [
            region_ids[j],
            *cell(j),
            bool(result.active[j]),
            opt(result.hpd_lower, j),
            opt(result.hpd_upper, j),
            opt(result.post_mean, j),
            opt(result.post_sd, j),
        ]
        for j in range(J)
    )
    header = ["region_id", "row", "col", "active", "hpd_lower", "hpd_upper", "post_mean", "post_sd"]
    return write_csv(path, header, rows)


def write_grid(path, values, rows: int, cols: int) -> Path:
    """Write a row-major vector as a ``rows x cols`` headerless grid."""
    grid = np.asarray(values).reshape(rows, cols)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in grid:
            w.writerow([fmt(v) for v in r])
    return path


def read_grid(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    return np.array([[float(v) for v in r] for r in rows])
