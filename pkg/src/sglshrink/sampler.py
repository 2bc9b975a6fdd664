"""Adaptive Metropolis-within-Gibbs sampler and convergence diagnostics.

Every coordinate gets its own Gaussian random-walk proposal.  During burn-in
each coordinate's step is reviewed every ``adapt_interval`` sweeps and scaled by
``adapt_factor`` when its acceptance rate leaves ``[accept_low, accept_high]``.
Steps are frozen after burn-in.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernel
from .model import Dataset, ModelSpec, ParamState, log_posterior
from .priors import RhoPrior, ScalePrior, truncated_cauchy_log_normalizer

__all__ = [
    "SamplerConfig",
    "ChainOutput",
    "ConfigurationError",
    "BLOCKS",
    "sweep",
    "adapt_step",
    "run_chain",
    "run_chains",
    "split_rhat",
    "gelman_rubin",
    "rhat_table",
]

log = logging.getLogger(__name__)

BLOCKS = ("alpha", "beta_tilde", "lambda", "tau", "rho", "exchange_local", "exchange_global")

DEFAULT_STEPS = {
    "alpha": 0.05,
    "beta_tilde": 0.5,
    "lambda": 0.5,
    "tau": 0.2,
    "rho": 0.5,
    "exchange_local": 0.5,
    "exchange_global": 0.5,
}


class ConfigurationError(ValueError):
    """Bad sampler configuration or an infeasible starting point."""


@dataclass
class SamplerConfig:
    n_iter: int = 20_000
    burn_in: int = 8_000
    adapt_interval: int = 100
    adapt_factor: float = 1.1
    accept_low: float = 0.30
    accept_high: float = 0.50
    init_steps: dict = field(default_factory=lambda: dict(DEFAULT_STEPS))
    n_chains: int = 1
    thin: int = 10
    seed: int = 0
    exchange_moves: bool = True

    def __post_init__(self):
        if not (0 <= self.burn_in < self.n_iter):
            raise ConfigurationError("need 0 <= burn_in < n_iter")
        if not (0 < self.accept_low < self.accept_high < 1):
            raise ConfigurationError("need 0 < accept_low < accept_high < 1")
        if self.adapt_factor <= 1:
            raise ConfigurationError("adapt_factor must exceed 1")
        if self.adapt_interval < 1 or self.thin < 1 or self.n_chains < 1:
            raise ConfigurationError("adapt_interval, thin and n_chains must be >= 1")
        steps = dict(DEFAULT_STEPS)
        for k, v in (self.init_steps or {}).items():
            if k not in steps:
                raise ConfigurationError(f"unknown step block {k!r}")
            if v < 0:
                raise ConfigurationError("proposal steps must be nonnegative")
            steps[k] = float(v)
        self.init_steps = steps

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass
class ChainOutput:
    draws: np.ndarray
    columns: list
    K: int
    J: int
    accept_rates: dict
    burn_in_accept_rates: dict
    step_history: np.ndarray
    final_steps: np.ndarray
    seed: int
    chain_id: int = 0
    final_state: Optional[ParamState] = None
    wall_time: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.columns.index(name)]

    def block(self, name: str) -> np.ndarray:
        """Draws of a vector block: ``alpha``, ``beta_tilde``, ``log_lambda``, ``beta``."""
        K, J = self.K, self.J
        slices = {
            "alpha": slice(0, K),
            "beta_tilde": slice(K, K + J),
            "log_lambda": slice(K + J, K + 2 * J),
            "log_tau": slice(K + 2 * J, K + 2 * J + 1),
            "rho": slice(K + 2 * J + 1, K + 2 * J + 2),
            "beta": slice(K + 2 * J + 2, K + 3 * J + 2),
        }
        return self.draws[:, slices[name]]


def column_names(K: int, J: int) -> list:
    return (
        [f"alpha_{k}" for k in range(K)]
        + [f"beta_tilde_{j}" for j in range(J)]
        + [f"log_lambda_{j}" for j in range(J)]
        + ["log_tau", "rho"]
        + [f"beta_{j}" for j in range(J)]
    )


def _block_slices(K: int, J: int) -> dict:
    return {
        "alpha": slice(0, K),
        "beta_tilde": slice(K, K + J),
        "lambda": slice(K + J, K + 2 * J),
        "tau": slice(K + 2 * J, K + 2 * J + 1),
        "rho": slice(K + 2 * J + 1, K + 2 * J + 2),
        "exchange_local": slice(K + 2 * J + 2, K + 3 * J + 2),
        "exchange_global": slice(K + 3 * J + 2, K + 3 * J + 3),
    }


class _Prepared:
    """Contiguous arrays handed to the compiled kernel."""

    def __init__(self, spec: ModelSpec, data: Dataset):
        g = spec.graph
        if data.J != g.n_regions:
            raise ConfigurationError(f"X has {data.J} columns but the graph has {g.n_regions} regions")
        self.y = np.ascontiguousarray(data.y, dtype=np.float64)
        self.Wt = np.ascontiguousarray(data.W.T, dtype=np.float64)
        self.Xt = np.ascontiguousarray(data.X.T, dtype=np.float64)
        A = g.adjacency
        self.indptr = A.indptr.astype(np.int64)
        self.indices = A.indices.astype(np.int64)
        self.degrees = g.degrees.astype(np.float64)
        self.mu = np.ascontiguousarray(g.normalized_spectrum, dtype=np.float64)
        J = g.n_regions
        self.tau_code = spec.tau_prior.code
        self.lam_code = spec.lambda_prior.code
        self.rho_free = spec.rho_prior is RhoPrior.UNIFORM01
        self.sigmoid = spec.positivity == "sigmoid"
        self.eta = float(spec.eta)
        self.zeta = float(spec.zeta)
        self.tc_lognorm = truncated_cauchy_log_normalizer(J)
        self.tc_lower = 1.0 / J
        self.K, self.J = data.K, J


class _KernelState:
    """Mutable per-chain arrays in the kernel's parameterisation."""

    def __init__(self, state: ParamState, prep: _Prepared):
        self.alpha = np.array(state.alpha, dtype=np.float64)
        self.bt = np.array(state.beta_tilde, dtype=np.float64)
        if prep.sigmoid:
            self.s_lam = np.exp(np.asarray(state.log_lambda, dtype=np.float64))
            self.s_tau = np.array([math.exp(state.log_tau)])
        else:
            self.s_lam = np.array(state.log_lambda, dtype=np.float64)
            self.s_tau = np.array([float(state.log_tau)])
        self.rho = np.array([float(state.rho)])
        self.sigmoid = prep.sigmoid

    def to_state(self) -> ParamState:
        if self.sigmoid:
            with np.errstate(divide="ignore"):
                log_lam = np.log(np.abs(self.s_lam))
                log_tau = float(np.log(abs(self.s_tau[0])))
        else:
            log_lam, log_tau = self.s_lam.copy(), float(self.s_tau[0])
        return ParamState(self.alpha.copy(), self.bt.copy(), log_lam, log_tau, float(self.rho[0]))


def _call_kernel(prep, ks, steps, z, logu, acc, out, sweep0, burn_in, thin, exchange):
    return _kernel.run_sweeps(
        prep.y, prep.Wt, prep.Xt,
        prep.indptr, prep.indices, prep.degrees, prep.mu,
        ks.alpha, ks.bt, ks.s_lam, ks.s_tau, ks.rho,
        steps, z, logu,
        prep.tau_code, prep.lam_code, prep.rho_free, prep.sigmoid, prep.eta, prep.zeta,
        prep.tc_lognorm, prep.tc_lower,
        acc, out, sweep0, burn_in, thin, exchange,
    )


def _n_coords(K: int, J: int) -> int:
    return K + 3 * J + 3


def _step_vector(config: SamplerConfig, K: int, J: int) -> np.ndarray:
    steps = np.empty(_n_coords(K, J))
    for name, sl in _block_slices(K, J).items():
        steps[sl] = config.init_steps[name]
    return steps


def sweep(
    state: ParamState,
    spec: ModelSpec,
    data: Dataset,
    steps,
    rng: np.random.Generator,
    exchange_moves: bool = True,
):
    """One full sweep; returns ``(new_state, accepted)``.

    Order: alpha, beta_tilde, lambda, lambda/beta_tilde exchange, tau,
    tau/lambda exchange, rho.

    ``steps`` is either a per-coordinate vector or a per-block dict.  ``accepted``
    maps each block to its number of accepted proposals in this sweep.
    """
    prep = _Prepared(spec, data)
    K, J = prep.K, prep.J
    P = _n_coords(K, J)
    if isinstance(steps, dict):
        steps = _step_vector(SamplerConfig(n_iter=2, burn_in=0, init_steps=steps), K, J)
    steps = np.ascontiguousarray(steps, dtype=np.float64)
    ks = _KernelState(state, prep)
    z = rng.standard_normal((1, P))
    logu = np.log(rng.random((1, P)))
    acc = np.zeros(P, dtype=np.int64)
    out = np.empty((0, K + 3 * J + 2))
    _call_kernel(prep, ks, steps, z, logu, acc, out, 0, 1, 1, exchange_moves)
    tallies = {
        name: int(acc[sl].sum())
        for name, sl in _block_slices(K, J).items()
        if name in _active_blocks(spec, exchange_moves)
    }
    return ks.to_state(), tallies


def adapt_step(observed_rate: float, step: float, config: SamplerConfig) -> float:
    if observed_rate > config.accept_high:
        return step * config.adapt_factor
    if observed_rate < config.accept_low:
        return step / config.adapt_factor
    return step


def _jittered_start(spec: ModelSpec, K: int, rng: np.random.Generator) -> ParamState:
    s = spec.initial_state(K)
    J = spec.J
    s.alpha = s.alpha + rng.normal(0.0, 0.5, K)
    s.beta_tilde = s.beta_tilde + rng.normal(0.0, 1.0, J)
    if spec.lambda_prior is not ScalePrior.FIXED_ONE:
        s.log_lambda = s.log_lambda + rng.normal(0.0, 1.0, J)
    if spec.tau_prior is ScalePrior.TRUNCATED_CAUCHY:
        s.log_tau = math.log(rng.uniform(1.0 / J, 1.0))
    elif spec.tau_prior is not ScalePrior.FIXED_ONE:
        s.log_tau = s.log_tau + rng.normal(0.0, 1.0)
    if spec.rho_prior is RhoPrior.UNIFORM01:
        s.rho = float(rng.uniform(0.1, 0.9))
    return s


def run_chain(
    spec: ModelSpec,
    data: Dataset,
    config: SamplerConfig,
    chain_id: int = 0,
    init: Optional[ParamState] = None,
) -> ChainOutput:
    """Run one chain with seed ``config.seed ^ chain_id``.

    Chain 0 starts from the model's default state; other chains start from a
    seeded perturbation of it.
    """
    t0 = time.perf_counter()
    seed = int(config.seed) ^ int(chain_id)
    rng = np.random.default_rng(seed)
    prep = _Prepared(spec, data)
    K, J = prep.K, prep.J
    if init is None:
        init = spec.initial_state(K) if chain_id == 0 else _jittered_start(spec, K, rng)
    lp0 = log_posterior(init, spec, data)
    if not math.isfinite(lp0):
        raise ConfigurationError(f"initial log-posterior is not finite ({lp0}); check data scaling and priors")

    P = _n_coords(K, J)
    steps = _step_vector(config, K, J)
    ks = _KernelState(init, prep)
    out = np.empty((config.n_retained, K + 3 * J + 2))
    acc_post = np.zeros(P, dtype=np.int64)
    history = [steps.copy()]
    last_window_rate = np.full(P, np.nan)
    rows = 0
    done = 0
    while done < config.n_iter:
        if done < config.burn_in:
            b = min(config.adapt_interval, config.burn_in - done)
        else:
            b = min(max(config.adapt_interval, 1000), config.n_iter - done)
        z = rng.standard_normal((b, P))
        logu = np.log(rng.random((b, P)))
        acc = np.zeros(P, dtype=np.int64)
        rows += _call_kernel(
            prep, ks, steps, z, logu, acc, out[rows:], done, config.burn_in, config.thin, config.exchange_moves
        )
        done += b
        if done <= config.burn_in:
            rate = acc / b
            last_window_rate = rate
            if b == config.adapt_interval or done == config.burn_in:
                for p in range(P):
                    steps[p] = adapt_step(rate[p], steps[p], config)
                history.append(steps.copy())
        else:
            acc_post += acc

    n_post = config.n_iter - config.burn_in
    slices = _block_slices(K, J)
    active = _active_blocks(spec, config.exchange_moves)
    accept_rates = {
        name: float(acc_post[sl].sum() / (n_post * (sl.stop - sl.start)))
        for name, sl in slices.items()
        if name in active and sl.stop > sl.start
    }
    burn_rates = {
        name: float(np.nanmean(last_window_rate[sl]))
        for name, sl in slices.items()
        if name in active and sl.stop > sl.start and config.burn_in > 0
    }
    return ChainOutput(
        draws=out[:rows],
        columns=column_names(K, J),
        K=K,
        J=J,
        accept_rates=accept_rates,
        burn_in_accept_rates=burn_rates,
        step_history=np.array(history),
        final_steps=steps.copy(),
        seed=seed,
        chain_id=chain_id,
        final_state=ks.to_state(),
        wall_time=time.perf_counter() - t0,
    )


def _active_blocks(spec: ModelSpec, exchange: bool = True) -> set:
    blocks = {"alpha", "beta_tilde"}
    if spec.lambda_prior is not ScalePrior.FIXED_ONE:
        blocks.add("lambda")
        if exchange:
            blocks.add("exchange_local")
    if spec.tau_prior is not ScalePrior.FIXED_ONE:
        blocks.add("tau")
        if exchange:
            blocks.add("exchange_global")
    if spec.rho_prior is RhoPrior.UNIFORM01:
        blocks.add("rho")
    return blocks


def run_chains(
    spec: ModelSpec,
    data: Dataset,
    config: SamplerConfig,
    threads: int = 1,
) -> list:
    """Run ``config.n_chains`` independent chains; order of the result is by chain id."""
    ids = list(range(config.n_chains))
    if threads <= 1 or len(ids) == 1:
        return [run_chain(spec, data, config, i) for i in ids]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: run_chain(spec, data, config, i), ids))


def split_rhat(draws: np.ndarray) -> float:
    """Split potential scale reduction factor for an array of shape (chains, draws).

    Returns ``inf`` (with a ``RuntimeWarning``) when the within-chain variance is zero.
    """
    x = np.asarray(draws, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need an array of shape (n_chains >= 2, n_draws)")
    n = x.shape[1] // 2
    if n < 5:
        raise ValueError("need at least 10 retained draws per chain")
    halves = np.concatenate([x[:, :n], x[:, x.shape[1] - n :]], axis=0)
    means = halves.mean(axis=1)
    W = halves.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if not W > 0:
        warnings.warn("zero within-chain variance; R-hat undefined", RuntimeWarning, stacklevel=2)
        return math.inf
    var_plus = (n - 1) / n * W + B / n
    return float(math.sqrt(var_plus / W))


def gelman_rubin(chains: Sequence[ChainOutput], param: Union[str, int]) -> float:
    if len(chains) < 2:
        raise ValueError("need at least two chains")
    lengths = {c.draws.shape[0] for c in chains}
    if len(lengths) != 1:
        raise ValueError("chains must have equal retained lengths")
    idx = param if isinstance(param, int) else chains[0].columns.index(param)
    return split_rhat(np.stack([c.draws[:, idx] for c in chains]))


def monitored_columns(spec: ModelSpec, K: int, J: int) -> list:
    """Identified quantities: alpha, beta and (when free) rho.

    ``tau`` and ``lambda`` are only weakly identified individually (their product
    enters the likelihood), so they are not monitored.
    """
    cols = [f"alpha_{k}" for k in range(K)] + [f"beta_{j}" for j in range(J)]
    if spec.rho_prior is RhoPrior.UNIFORM01:
        cols.append("rho")
    return cols


def rhat_table(chains: Sequence[ChainOutput], columns: Sequence[str]) -> dict:
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for c in columns:
            out[c] = gelman_rubin(chains, c)
    return out
