"""Poisson log-linear model with the spatially dependent global-local prior.

    y_i ~ Poisson(theta_i),  log theta_i = w_i' alpha + x_i' beta
    beta_j = tau * lambda_j * beta_tilde_j
    beta_tilde | rho ~ N_J(0, (D - rho A)^{-1})
    alpha_k ~ N(0, zeta^2),  tau ~ p_tau,  lambda_j ~ p_lambda,  rho ~ p_rho

Scales are carried as ``log_tau`` / ``log_lambda``; in the default ``"log"``
positivity mode the log-prior includes the change-of-variables Jacobian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .graph import CarField, LatticeGraph, car_log_det
from .priors import (
    RhoPrior,
    ScalePrior,
    rho_log_density,
    scale_log_density,
    soft_positivity_log,
)

__all__ = [
    "Dataset",
    "ParamState",
    "ModelSpec",
    "MODEL_TABLE",
    "beta_from",
    "log_likelihood",
    "log_prior",
    "log_posterior",
]

LOG_2PI = math.log(2.0 * math.pi)
ETA_OVERFLOW = 700.0

# (tau prior, lambda prior, rho prior) per named model.
MODEL_TABLE: dict[str, tuple[ScalePrior, ScalePrior, RhoPrior]] = {
    "DLC": (ScalePrior.LOG_CAUCHY, ScalePrior.LOG_CAUCHY, RhoPrior.UNIFORM01),
    "DHS": (ScalePrior.HALF_CAUCHY, ScalePrior.HALF_CAUCHY, RhoPrior.UNIFORM01),
    "HS": (ScalePrior.HALF_CAUCHY, ScalePrior.HALF_CAUCHY, RhoPrior.FIXED_ZERO),
    "LC": (ScalePrior.LOG_CAUCHY, ScalePrior.LOG_CAUCHY, RhoPrior.FIXED_ZERO),
    "CAR": (ScalePrior.HALF_CAUCHY, ScalePrior.FIXED_ONE, RhoPrior.UNIFORM01),
}


@dataclass(frozen=True, eq=False)
class Dataset:
    y: np.ndarray
    W: np.ndarray
    X: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        W = np.asarray(self.W, dtype=float)
        X = np.asarray(self.X, dtype=float)
        n = y.shape[0]
        if W.ndim != 2 or X.ndim != 2:
            raise ValueError("W and X must be 2-d")
        if W.shape[0] != n or X.shape[0] != n:
            raise ValueError(f"row mismatch: y={n}, W={W.shape[0]}, X={X.shape[0]}")
        for name, arr in (("y", y), ("W", W), ("X", X)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains missing or non-finite values")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("y must hold nonnegative integer counts")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.W.shape[1]

    @property
    def J(self) -> int:
        return self.X.shape[1]

    @cached_property
    def log_factorial_sum(self) -> float:
        return float(np.sum(gammaln(self.y + 1.0)))

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.y[rows], self.W[rows], self.X[rows], self.standardized)


@dataclass
class ParamState:
    alpha: np.ndarray
    beta_tilde: np.ndarray
    log_lambda: np.ndarray
    log_tau: float
    rho: float

    @property
    def tau(self) -> float:
        return math.exp(self.log_tau)

    @property
    def lam(self) -> np.ndarray:
        return np.exp(self.log_lambda)

    def copy(self) -> "ParamState":
        return ParamState(
            self.alpha.copy(),
            self.beta_tilde.copy(),
            self.log_lambda.copy(),
            float(self.log_tau),
            float(self.rho),
        )


@dataclass(frozen=True, eq=False)
class ModelSpec:
    graph: LatticeGraph
    tau_prior: ScalePrior = ScalePrior.LOG_CAUCHY
    lambda_prior: ScalePrior = ScalePrior.LOG_CAUCHY
    rho_prior: RhoPrior = RhoPrior.UNIFORM01
    zeta: float = 1.0
    eta: float = 50.0
    positivity: str = "log"
    name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "tau_prior", ScalePrior(self.tau_prior))
        object.__setattr__(self, "lambda_prior", ScalePrior(self.lambda_prior))
        object.__setattr__(self, "rho_prior", RhoPrior(self.rho_prior))
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.positivity not in ("log", "sigmoid"):
            raise ValueError("positivity must be 'log' or 'sigmoid'")

    @classmethod
    def named(cls, name: str, graph: LatticeGraph, **kwargs) -> "ModelSpec":
        try:
            tau, lam, rho = MODEL_TABLE[name.upper()]
        except KeyError:
            raise ValueError(f"unknown model {name!r}; choose from {sorted(MODEL_TABLE)}") from None
        return cls(graph, tau, lam, rho, name=name.upper(), **kwargs)

    @property
    def J(self) -> int:
        return self.graph.n_regions

    def initial_state(self, K: int) -> ParamState:
        J = self.J
        log_tau = 0.0 if self.tau_prior is ScalePrior.FIXED_ONE else math.log(1.0 / J)
        if self.tau_prior is ScalePrior.TRUNCATED_CAUCHY:
            log_tau = math.log(min(1.0, 2.0 / J))
        return ParamState(
            alpha=np.zeros(K),
            beta_tilde=np.zeros(J),
            log_lambda=np.zeros(J),
            log_tau=log_tau,
            rho=0.0 if self.rho_prior is RhoPrior.FIXED_ZERO else 0.5,
        )


def beta_from(state: ParamState) -> np.ndarray:
    return math.exp(state.log_tau) * np.exp(state.log_lambda) * state.beta_tilde


def linear_predictor(state: ParamState, data: Dataset) -> np.ndarray:
    return data.W @ state.alpha + data.X @ beta_from(state)


def log_likelihood(state: ParamState, data: Dataset) -> float:
    if data.n == 0:
        return 0.0
    eta = linear_predictor(state, data)
    if not np.all(np.isfinite(eta)) or np.max(eta) > ETA_OVERFLOW:
        return -math.inf
    return float(np.dot(data.y, eta) - np.sum(np.exp(eta)) - data.log_factorial_sum)


def car_log_density(beta_tilde: np.ndarray, graph: LatticeGraph, rho: float) -> float:
    """Gaussian log-density of ``beta_tilde`` under precision ``D - rho A``."""
    if not (0.0 <= rho < 1.0):
        return -math.inf
    A = graph.adjacency
    quad = float(np.dot(graph.degrees * beta_tilde, beta_tilde) - rho * beta_tilde @ (A @ beta_tilde))
    J = graph.n_regions
    return -0.5 * J * LOG_2PI + 0.5 * car_log_det(CarField(graph, rho)) - 0.5 * quad


def _scale_term(prior: ScalePrior, log_x, spec: ModelSpec) -> float:
    log_x = np.atleast_1d(np.asarray(log_x, dtype=float))
    if prior is ScalePrior.FIXED_ONE:
        return 0.0 if np.all(log_x == 0.0) else -math.inf
    x = np.exp(log_x)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        return -math.inf
    dens = scale_log_density(prior, x, J=spec.J)
    if spec.positivity == "log":
        return float(np.sum(dens + log_x))
    return float(np.sum(dens + soft_positivity_log(x, spec.eta)))


def log_prior(state: ParamState, spec: ModelSpec) -> float:
    rho_lp = rho_log_density(spec.rho_prior, state.rho)
    if rho_lp == -math.inf:
        return -math.inf
    a = np.asarray(state.alpha, dtype=float)
    alpha_lp = float(-0.5 * a.size * (LOG_2PI + 2.0 * math.log(spec.zeta)) - 0.5 * np.sum(a**2) / spec.zeta**2)
    car_lp = car_log_density(np.asarray(state.beta_tilde, dtype=float), spec.graph, state.rho)
    lam_lp = _scale_term(spec.lambda_prior, state.log_lambda, spec)
    tau_lp = _scale_term(spec.tau_prior, state.log_tau, spec)
    total = alpha_lp + car_lp + lam_lp + tau_lp + rho_lp
    if math.isnan(total):
        return -math.inf
    return total


def log_posterior(state: ParamState, spec: ModelSpec, data: Dataset) -> float:
    lp = log_prior(state, spec)
    if lp == -math.inf:
        return lp
    ll = log_likelihood(state, data)
    out = lp + ll
    return -math.inf if math.isnan(out) else out


def with_state(state: ParamState, **changes) -> ParamState:
    return replace(state.copy(), **changes)
