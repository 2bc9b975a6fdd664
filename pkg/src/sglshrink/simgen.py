"""Synthetic scenarios: CAR-correlated spatial covariates and planted signals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .graph import CarField, LatticeGraph, build_lattice, sample_car
from .model import Dataset

__all__ = [
    "SimConfig",
    "SimDataset",
    "SeriesDataset",
    "gen_pattern",
    "gen_covariates",
    "gen_response",
    "simulate",
    "simulate_series",
]

ADJACENT_BLOCK = (3, 4)
N_SCATTERED = 6
MIN_SCATTER_DISTANCE = 3


class ScenarioError(ValueError):
    pass


@dataclass
class SimConfig:
    n_train: int = 100
    n_test: int = 50
    rows: int = 20
    cols: int = 25
    rho_x: float = 0.4
    pattern: Union[str, np.ndarray] = "adjacent"
    b_star: float = 6.0
    alpha_star: Sequence[float] = (-0.25, 0.25)
    seed: int = 0
    block_shape: tuple = ADJACENT_BLOCK
    n_scattered: int = N_SCATTERED
    scale_mode: str = "divide"

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 0:
            raise ScenarioError("need n_train >= 1 and n_test >= 0")
        if not (0.0 <= self.rho_x < 1.0):
            raise ScenarioError("rho_x must lie in [0, 1)")
        if self.scale_mode not in ("divide", "multiply"):
            raise ScenarioError("scale_mode must be 'divide' or 'multiply'")
        if isinstance(self.pattern, str) and self.pattern.lower() not in ("adjacent", "scattered"):
            raise ScenarioError(f"unknown pattern {self.pattern!r}")
        self.alpha_star = tuple(float(a) for a in self.alpha_star)

    @property
    def K(self) -> int:
        return len(self.alpha_star)

    @property
    def graph(self) -> LatticeGraph:
        return build_lattice(self.rows, self.cols)


@dataclass
class SimDataset:
    train: Dataset
    test: Dataset
    beta_star: np.ndarray
    active_mask: np.ndarray
    config: SimConfig
    graph: LatticeGraph = field(repr=False)


def gen_pattern(config: SimConfig) -> np.ndarray:
    """Boolean mask of active cells (row-major over the lattice)."""
    R, C = config.rows, config.cols
    p = config.pattern
    if not isinstance(p, str):
        mask = np.asarray(p, dtype=bool)
        if mask.shape == (R, C):
            mask = mask.ravel()
        if mask.shape != (R * C,):
            raise ScenarioError(f"custom mask shape {mask.shape} does not fit a {R}x{C} lattice")
        if not mask.any():
            raise ScenarioError("custom mask has no active cells")
        return mask.copy()
    grid = np.zeros((R, C), dtype=bool)
    if p.lower() == "adjacent":
        br, bc = config.block_shape
        if br > R or bc > C:
            raise ScenarioError(f"{br}x{bc} block does not fit a {R}x{C} lattice")
        r0, c0 = (R - br) // 2, (C - bc) // 2
        grid[r0 : r0 + br, c0 : c0 + bc] = True
        return grid.ravel()
    return _scattered(R, C, config.n_scattered).ravel()


def _scattered(R: int, C: int, m: int) -> np.ndarray:
    # spread m cells over an (a x b) arrangement of evenly spaced interior points
    best = None
    for a in range(1, m + 1):
        if m % a:
            continue
        b = m // a
        rs = np.round(np.linspace(0, R - 1, a + 2)[1:-1]).astype(int)
        cs = np.round(np.linspace(0, C - 1, b + 2)[1:-1]).astype(int)
        pts = [(r, c) for r in rs for c in cs]
        d = min(
            (abs(p[0] - q[0]) + abs(p[1] - q[1]) for i, p in enumerate(pts) for q in pts[i + 1 :]),
            default=math.inf,
        )
        if best is None or d > best[0]:
            best = (d, pts)
    if best is None or best[0] < MIN_SCATTER_DISTANCE or len(set(best[1])) < m:
        raise ScenarioError(f"cannot place {m} cells {MIN_SCATTER_DISTANCE} apart on a {R}x{C} lattice")
    grid = np.zeros((R, C), dtype=bool)
    for r, c in best[1]:
        grid[r, c] = True
    return grid


def gen_covariates(config: SimConfig, rng: np.random.Generator):
    """``(W_train, W_test, X_train, X_test)``.

    X rows are CAR draws at ``rho_x``; columns are standardised with training
    moments and then scaled by ``sqrt(n_train)`` (divided by default).
    """
    n = config.n_train + config.n_test
    g = config.graph
    W = rng.standard_normal((n, config.K))
    X = sample_car(CarField(g, config.rho_x), rng, size=n)
    tr = slice(0, config.n_train)
    mu = X[tr].mean(axis=0)
    sd = X[tr].std(axis=0)
    sd[sd == 0] = 1.0
    X = (X - mu) / sd
    root_n = math.sqrt(config.n_train)
    X = X / root_n if config.scale_mode == "divide" else X * root_n
    return W[tr], W[config.n_train :], X[tr], X[config.n_train :]


def gen_response(config: SimConfig, W: np.ndarray, X: np.ndarray, beta_star: np.ndarray, rng: np.random.Generator):
    eta = W @ np.asarray(config.alpha_star) + X @ beta_star
    bad = np.flatnonzero(np.abs(eta) > 30)
    if bad.size:
        raise ScenarioError(f"log-mean {eta[bad[0]]:.1f} at row {bad[0]} exceeds 30; scenario is mis-scaled")
    return rng.poisson(np.exp(eta)).astype(float)


def simulate(config: SimConfig, rng: Optional[np.random.Generator] = None) -> SimDataset:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    mask = gen_pattern(config)
    beta_star = np.where(mask, config.b_star, 0.0)
    Wtr, Wte, Xtr, Xte = gen_covariates(config, rng)
    ytr = gen_response(config, Wtr, Xtr, beta_star, rng)
    yte = gen_response(config, Wte, Xte, beta_star, rng)
    return SimDataset(
        train=Dataset(ytr, Wtr, Xtr, standardized=True),
        test=Dataset(yte, Wte, Xte, standardized=True),
        beta_star=beta_star,
        active_mask=mask,
        config=config,
        graph=config.graph,
    )


@dataclass
class SeriesDataset:
    data: Dataset
    years: np.ndarray
    beta_star: np.ndarray
    active_mask: np.ndarray
    graph: LatticeGraph = field(repr=False)


def simulate_series(
    n_years: int = 30,
    rows: int = 4,
    cols: int = 4,
    block_shape: tuple = (2, 2),
    b_star: float = 0.6,
    intercept: float = 2.0,
    rho_x: float = 0.4,
    first_year: int = 1991,
    seed: int = 0,
) -> SeriesDataset:
    """Yearly counts driven by a planted block of raw (unstandardised) CAR covariates.

    ``W`` is a single intercept column of ones.
    """
    rng = np.random.default_rng(seed)
    cfg = SimConfig(n_train=n_years, n_test=0, rows=rows, cols=cols, block_shape=tuple(block_shape), rho_x=rho_x)
    mask = gen_pattern(cfg)
    beta_star = np.where(mask, b_star, 0.0)
    g = cfg.graph
    X = sample_car(CarField(g, rho_x), rng, size=n_years)
    W = np.ones((n_years, 1))
    eta = intercept + X @ beta_star
    if np.any(np.abs(eta) > 30):
        raise ScenarioError("series log-mean exceeds 30; lower b_star or intercept")
    y = rng.poisson(np.exp(eta)).astype(float)
    years = np.arange(first_year, first_year + n_years)
    return SeriesDataset(Dataset(y, W, X), years, beta_star, mask, g)
