"""Run configuration: a YAML document validated against a strict schema.

Unknown keys are rejected at every level.  Relative paths are resolved
against the directory holding the config file.
"""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .model import MODEL_TABLE
from .sampler import DEFAULT_STEPS, SamplerConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataSection(_Strict):
    scenario: Optional[str] = None
    y: Optional[str] = None
    W: Optional[str] = None
    X: Optional[str] = None
    test_y: Optional[str] = None
    test_W: Optional[str] = None
    test_X: Optional[str] = None
    standardize: bool = False
    lattice: Optional[tuple[int, int]] = None
    edges: Optional[str] = None
    locations: Optional[str] = None

    @model_validator(mode="after")
    def _sources(self):
        files = [self.y, self.W, self.X]
        if self.scenario is None and any(f is None for f in files):
            raise ValueError("data needs either 'scenario' or all of 'y', 'W', 'X'")
        if self.scenario is not None and any(f is not None for f in files):
            raise ValueError("give either 'scenario' or data files, not both")
        tests = [self.test_y, self.test_W, self.test_X]
        if any(t is not None for t in tests) and any(t is None for t in tests):
            raise ValueError("test data needs all of 'test_y', 'test_W', 'test_X'")
        if self.lattice is not None and self.edges is not None:
            raise ValueError("give either 'lattice' or 'edges', not both")
        return self


class SimulationSection(_Strict):
    n_train: int = Field(100, ge=1)
    n_test: int = Field(50, ge=0)
    rows: int = Field(20, ge=1)
    cols: int = Field(25, ge=1)
    rho_x: float = Field(0.4, ge=0.0, lt=1.0)
    pattern: Literal["adjacent", "scattered"] = "adjacent"
    pattern_mask: Optional[str] = None
    b_star: float = 6.0
    alpha_star: list[float] = [-0.25, 0.25]
    block_shape: tuple[int, int] = (3, 4)
    n_scattered: int = Field(6, ge=1)
    scale_mode: Literal["divide", "multiply"] = "divide"
    replicates: int = Field(1, ge=1)


ScaleName = Literal["LC", "HS", "TC", "fixed1"]


class ModelSection(_Strict):
    name: Optional[str] = "DLC"
    tau_prior: Optional[ScaleName] = None
    lambda_prior: Optional[ScaleName] = None
    rho_prior: Optional[Literal["unif01", "zero"]] = None
    zeta: float = Field(1.0, gt=0)
    eta: float = Field(50.0, gt=0)
    positivity: Literal["log", "sigmoid"] = "log"

    @model_validator(mode="after")
    def _named_or_explicit(self):
        explicit = [self.tau_prior, self.lambda_prior, self.rho_prior]
        if all(p is not None for p in explicit):
            self.name = None
        elif any(p is not None for p in explicit):
            raise ValueError("explicit priors need all of tau_prior, lambda_prior, rho_prior")
        elif self.name is None or self.name.upper() not in MODEL_TABLE:
            raise ValueError(f"model name must be one of {sorted(MODEL_TABLE)}")
        return self


class SamplerSection(_Strict):
    n_iter: int = Field(20_000, ge=1)
    burn_in: int = Field(8_000, ge=0)
    adapt_interval: int = Field(100, ge=1)
    adapt_factor: float = Field(1.1, gt=1.0)
    accept_low: float = 0.30
    accept_high: float = 0.50
    init_steps: dict[str, float] = {}
    n_chains: int = Field(5, ge=1)
    thin: int = Field(10, ge=1)
    exchange_moves: bool = True

    @field_validator("init_steps")
    @classmethod
    def _known_blocks(cls, v):
        bad = set(v) - set(DEFAULT_STEPS)
        if bad:
            raise ValueError(f"unknown step blocks {sorted(bad)}")
        return v

    @model_validator(mode="after")
    def _burn(self):
        if self.burn_in >= self.n_iter:
            raise ValueError("burn_in must be smaller than n_iter")
        if not (0 < self.accept_low < self.accept_high < 1):
            raise ValueError("need 0 < accept_low < accept_high < 1")
        return self

    def build(self, seed: int) -> SamplerConfig:
        return SamplerConfig(seed=seed, **self.model_dump())


class BasisSection(_Strict):
    enabled: bool = False
    n_lon: int = Field(17, ge=2)
    n_lat: int = Field(12, ge=2)
    degree: int = Field(3, ge=0)
    graph: Literal["lattice", "none"] = "lattice"


class SelectionSection(_Strict):
    rule: Literal["HPD", "SN"] = "HPD"
    level: float = Field(0.95, gt=0.0, lt=1.0)


class FixedRegionSection(_Strict):
    region_ids: Optional[list[str]] = None
    lon: Optional[tuple[float, float]] = None
    lat: Optional[tuple[float, float]] = None

    @model_validator(mode="after")
    def _one(self):
        box = self.lon is not None and self.lat is not None
        if self.region_ids is None and not box:
            raise ValueError("fixed_region needs 'region_ids' or both 'lon' and 'lat'")
        return self


class BacktestSection(_Strict):
    start_year: int
    end_year: int
    models: list[str] = ["DLC", "MA"]
    ma_window: int = Field(5, ge=1)
    alpha_level: float = Field(0.05, gt=0.0, lt=1.0)
    fixed_region: Optional[FixedRegionSection] = None
    level: float = Field(0.95, gt=0.0, lt=1.0)

    @field_validator("models")
    @classmethod
    def _models(cls, v):
        known = set(MODEL_TABLE) | {"MA", "TSTAT", "FIXED_REGION"}
        bad = [m for m in v if m.upper() not in known]
        if bad:
            raise ValueError(f"unknown backtest models {bad}")
        if not v:
            raise ValueError("backtest needs at least one model")
        return v

    @model_validator(mode="after")
    def _window(self):
        if self.end_year < self.start_year:
            raise ValueError("end_year precedes start_year")
        if any(m.upper() == "FIXED_REGION" for m in self.models) and self.fixed_region is None:
            raise ValueError("model 'fixed_region' needs a 'fixed_region' section")
        return self


class RunConfig(_Strict):
    seed: int = 0
    out: Optional[str] = None
    data: Optional[DataSection] = None
    simulation: Optional[SimulationSection] = None
    model: ModelSection = ModelSection()
    sampler: SamplerSection = SamplerSection()
    basis: BasisSection = BasisSection()
    selection: SelectionSection = SelectionSection()
    backtest: Optional[BacktestSection] = None

    base_dir: Optional[str] = Field(None, exclude=True)

    def path(self, p: Optional[str]) -> Optional[Path]:
        if p is None:
            return None
        q = Path(p).expanduser()
        if not q.is_absolute() and self.base_dir is not None:
            q = Path(self.base_dir) / q
        return q


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for e in exc.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(doc: dict, base_dir=None) -> RunConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at the top level")
    if "base_dir" in doc:
        raise ConfigError("base_dir: extra inputs are not permitted")
    try:
        cfg = RunConfig(**doc)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    cfg.base_dir = None if base_dir is None else str(base_dir)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return parse_config(doc, path.parent.resolve())
