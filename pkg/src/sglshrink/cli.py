"""Command-line entry points.

    sglshrink simulate --config run.yaml --out scen/
    sglshrink fit      --config run.yaml --out fit/
    sglshrink select   fit/ --rule SN
    sglshrink predict  fit/ --W W_new.csv --X X_new.csv
    sglshrink backtest --config bt.yaml --out bt/
    sglshrink report   fit/ bt/ --out report/

Exit codes: 0 success, 2 configuration error, 3 data error, 4 R-hat >= 1.1.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .backtest import BacktestError, run_backtest
from .basis import OutOfHullError, TensorProductBasis, coefficient_graph, tensor_basis_matrix
from .config import ConfigError, RunConfig, load_config, parse_config
from .graph import GraphError, LatticeGraph, build_lattice
from .inference import MIN_HPD_SAMPLES, hpd_interval, select_regions_hpd, select_regions_sn, summarize
from .io import (
    DataError,
    read_chain,
    read_csv,
    read_dataset,
    read_edges,
    read_grid,
    read_json,
    read_locations,
    read_split,
    standardize_columns,
    write_chain,
    write_csv,
    write_split,
    write_grid,
    write_json,
    write_selection,
)
from .metrics import estimation_metrics, pred_rmse, selection_metrics
from .model import MODEL_TABLE, Dataset, ModelSpec
from .sampler import ConfigurationError, monitored_columns, rhat_table, run_chains
from .simgen import ScenarioError, SimConfig, simulate

log = logging.getLogger("sglshrink")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_UNCONVERGED = 4
RHAT_LIMIT = 1.1


class ConvergenceFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- helpers


def _out_dir(args, cfg: Optional[RunConfig]) -> Path:
    out = args.out or (cfg.out if cfg is not None else None)
    if out is None:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    if cfg is not None and args.out is None:
        return cfg.path(out)
    return Path(out)


def _make_spec(cfg: RunConfig, graph: LatticeGraph, force_rho_zero: bool = False) -> ModelSpec:
    m = cfg.model
    kw = dict(zeta=m.zeta, eta=m.eta, positivity=m.positivity)
    if m.name is not None:
        tau, lam, rho = MODEL_TABLE[m.name.upper()]
        name = m.name.upper()
    else:
        tau, lam, rho = m.tau_prior, m.lambda_prior, m.rho_prior
        name = f"{tau}/{lam}/{rho}"
    if force_rho_zero:
        rho = "zero"
    return ModelSpec(graph, tau, lam, rho, name=name, **kw)


def _region_graph(cfg: RunConfig, J: int, scenario_meta: Optional[dict] = None) -> Optional[LatticeGraph]:
    if scenario_meta is not None:
        return build_lattice(scenario_meta["rows"], scenario_meta["cols"])
    d = cfg.data
    if d.lattice is not None:
        g = build_lattice(*d.lattice)
    elif d.edges is not None:
        g = read_edges(cfg.path(d.edges), J)
    else:
        return None
    if g.n_regions != J:
        raise DataError(f"graph has {g.n_regions} nodes but X has {J} columns")
    return g


def _basis_for(cfg: RunConfig, region_ids: list):
    """Basis matrix with rows ordered as the X columns."""
    if cfg.data is None or cfg.data.locations is None:
        raise ConfigError("basis expansion needs data.locations")
    ids, coords = read_locations(cfg.path(cfg.data.locations))
    pos = {r: i for i, r in enumerate(ids)}
    missing = [r for r in region_ids if r not in pos]
    if missing:
        raise DataError(f"locations file lacks regions {missing[:5]}")
    coords = coords[[pos[r] for r in region_ids]]
    b = cfg.basis
    basis = TensorProductBasis.uniform(
        (coords[:, 0].min(), coords[:, 0].max()),
        (coords[:, 1].min(), coords[:, 1].max()),
        b.n_lon,
        b.n_lat,
        b.degree,
    )
    return tensor_basis_matrix(coords, basis)


def _check_draws(cfg: RunConfig) -> None:
    sc = cfg.sampler.build(cfg.seed)
    total = sc.n_retained * sc.n_chains
    if total < MIN_HPD_SAMPLES:
        raise ConfigError(f"sampler keeps {total} draws in total; intervals need at least {MIN_HPD_SAMPLES}")


def _grid_shape(meta: dict) -> Optional[tuple]:
    g = meta.get("region_grid")
    return None if g is None else (g[0], g[1])


# ---------------------------------------------------------------- simulate


def _sim_config(cfg: RunConfig, seed: int) -> SimConfig:
    s = cfg.simulation
    pattern = s.pattern
    if s.pattern_mask is not None:
        pattern = read_grid(cfg.path(s.pattern_mask)).astype(bool).ravel()
    return SimConfig(
        n_train=s.n_train,
        n_test=s.n_test,
        rows=s.rows,
        cols=s.cols,
        rho_x=s.rho_x,
        pattern=pattern,
        b_star=s.b_star,
        alpha_star=tuple(s.alpha_star),
        seed=seed,
        block_shape=tuple(s.block_shape),
        n_scattered=s.n_scattered,
        scale_mode=s.scale_mode,
    )


def cmd_simulate(cfg: RunConfig, out: Path, seed: int) -> int:
    if cfg.simulation is None:
        raise ConfigError("simulate needs a 'simulation' section")
    s = cfg.simulation
    ladder = [seed + r for r in range(s.replicates)]
    for r, sd in enumerate(ladder):
        sim = simulate(_sim_config(cfg, sd))
        d = out / f"rep_{r:03d}"
        write_split(d / "train.csv", sim.train)
        write_split(d / "test.csv", sim.test)
        g = sim.graph
        write_csv(
            d / "beta_star.csv",
            ["region_id", "row", "col", "beta_star"],
            ([f"r{j}", *g.cell(j), sim.beta_star[j]] for j in range(g.n_regions)),
        )
        write_grid(d / "mask.csv", sim.active_mask.astype(int), s.rows, s.cols)
        meta = {
            "rows": s.rows,
            "cols": s.cols,
            "seed": sd,
            "replicate": r,
            "simulation": s.model_dump(),
        }
        write_json(d / "scenario.json", meta)
    write_json(out / "manifest.json", {"command": "simulate", "seed": seed, "seeds": ladder, "replicates": s.replicates})
    log.info("wrote %d scenario(s) to %s", len(ladder), out)
    return EXIT_OK


def _scenario_dirs(root: Path) -> list:
    if (root / "scenario.json").is_file():
        return [root]
    reps = sorted(p for p in root.glob("rep_*") if (p / "scenario.json").is_file())
    if not reps:
        raise DataError(f"no scenario found under {root}")
    return reps


def _load_split(path: Path):
    return read_split(path) if path.is_file() else None


# ---------------------------------------------------------------- fit


def _pooled(chains, name):
    return np.concatenate([c.block(name) for c in chains], axis=0)


def _select(beta: np.ndarray, rule: str, level: float):
    return select_regions_hpd(beta, level) if rule == "HPD" else select_regions_sn(beta)


def _write_selection(out: Path, result, graph, region_ids, grid_shape):
    write_selection(out / "selection.csv", result, graph, region_ids)
    if grid_shape is not None and grid_shape[0] * grid_shape[1] == result.active.shape[0]:
        write_grid(out / "selection_grid.csv", result.active.astype(int), *grid_shape)


def _predict_rows(alpha, beta, W, X, seed: int, level: float) -> list:
    rng = np.random.default_rng([seed, 104729])
    rows = []
    for i in range(W.shape[0]):
        eta = alpha @ W[i] + beta @ X[i]
        if np.any(eta > 700):
            raise DataError(f"row {i}: predictive log-mean overflows")
        theta = np.exp(eta)
        y = rng.poisson(theta).astype(float)
        lo, hi = hpd_interval(y, level)
        m = float(y.mean())
        rows.append([i, m, int(round(m)), lo, hi, float(theta.mean())])
    return rows


def _fit_one(cfg, out: Path, seed: int, threads: int, train, test, region_graph, scenario=None) -> float:
    """Fit one dataset; returns the worst monitored R-hat (nan with a single chain)."""
    data = train.data
    Xtr, Wtr = data.X, data.W
    Xte = Wte = None
    if test is not None:
        Xte, Wte = test.data.X, test.data.W
    moments = None
    if cfg.data is not None and cfg.data.standardize and scenario is None:
        Wtr, *rest_w = standardize_columns(data.W, *([Wte] if Wte is not None else []))
        Xtr, *rest_x = standardize_columns(data.X, *([Xte] if Xte is not None else []))
        moments = {
            "W_mean": data.W.mean(axis=0),
            "W_sd": data.W.std(axis=0),
            "X_mean": data.X.mean(axis=0),
            "X_sd": data.X.std(axis=0),
        }
        if Wte is not None:
            Wte, Xte = rest_w[0], rest_x[0]

    M = None
    if cfg.basis.enabled:
        bm = _basis_for(cfg, train.region_ids)
        M = bm.M
        coef_graph = coefficient_graph(bm.basis)
        spec = _make_spec(cfg, coef_graph, force_rho_zero=cfg.basis.graph == "none")
        design = Xtr @ M
        write_csv(out / "basis_M.csv", [f"g{l}" for l in range(M.shape[1])], M)
    else:
        if region_graph is None:
            raise ConfigError("a graph is needed: set data.lattice or data.edges, or enable basis")
        spec = _make_spec(cfg, region_graph)
        design = Xtr
    fit_data = Dataset(data.y, Wtr, design, standardized=True)
    sampler = cfg.sampler.build(seed)
    chains = run_chains(spec, fit_data, sampler, threads=threads)

    for c in chains:
        write_chain(out / f"chain_{c.chain_id}.csv", c)
    names = chains[0].columns
    allx = np.concatenate([c.draws for c in chains], axis=0)
    summ = summarize(allx, names, cfg.selection.level)
    write_csv(out / "summary.csv", ["parameter", "mean", "sd", "hpd_lower", "hpd_upper"], summ.rows())

    worst = math.nan
    rhat = {}
    if len(chains) > 1:
        rhat = rhat_table(chains, monitored_columns(spec, fit_data.K, fit_data.J))
        write_csv(out / "rhat.csv", ["parameter", "rhat"], rhat.items())
        worst = max(rhat.values())

    beta = _pooled(chains, "beta")
    if M is not None:
        beta = beta @ M.T
    grid = None
    if region_graph is not None and region_graph.is_lattice:
        grid = (region_graph.rows, region_graph.cols)
    sel = _select(beta, cfg.selection.rule, cfg.selection.level)
    _write_selection(out, sel, region_graph, train.region_ids, grid)

    rho_draws = allx[:, names.index("rho")]
    manifest = {
        "command": "fit",
        "version": __version__,
        "seed": seed,
        "model": spec.name,
        "priors": {"tau": spec.tau_prior.value, "lambda": spec.lambda_prior.value, "rho": spec.rho_prior.value},
        "positivity": spec.positivity,
        "K": fit_data.K,
        "J": fit_data.J,
        "n": fit_data.n,
        "region_ids": train.region_ids,
        "w_names": train.w_names,
        "region_grid": list(grid) if grid is not None else None,
        "basis": cfg.basis.model_dump() if M is not None else None,
        "standardization": moments,
        "sampler": cfg.sampler.model_dump(),
        "chains": [
            {
                "chain_id": c.chain_id,
                "seed": c.seed,
                "accept_rates": c.accept_rates,
                "burn_in_accept_rates": c.burn_in_accept_rates,
                "wall_time": c.wall_time,
            }
            for c in chains
        ],
        "rhat_max": None if math.isnan(worst) else worst,
        "converged": None if math.isnan(worst) else bool(worst < RHAT_LIMIT),
        "rho_constant": bool(np.all(rho_draws == rho_draws[0])),
        "selection": cfg.selection.model_dump(),
    }
    write_json(out / "manifest.json", manifest)

    if scenario is not None and test is not None and test.data.n > 0:
        alpha = _pooled(chains, "alpha")
        Xp = Xte if M is None else Xte @ M
        beta_fit = _pooled(chains, "beta")
        preds = _predict_rows(alpha, beta_fit, Wte, Xp, seed, cfg.selection.level)
        yhat = np.array([r[1] for r in preds])
        write_csv(
            out / "test_predictions.csv",
            ["row", "y", "prediction", "rounded", "hpd_lower", "hpd_upper", "theta_mean"],
            ([r[0], test.data.y[i], *r[1:]] for i, r in enumerate(preds)),
        )
        est = estimation_metrics(beta.mean(axis=0), scenario["beta_star"], scenario["mask"])
        selm = selection_metrics(sel.active, scenario["mask"])
        meta = scenario["meta"]["simulation"]
        entry = {
            "kind": "fit",
            "model": spec.name,
            "setting": {"pattern": meta["pattern"], "b_star": meta["b_star"], "rho_x": meta["rho_x"]},
            "seed": seed,
            "metrics": {
                **est.as_dict(),
                "fpr": selm.fpr,
                "fnr": selm.fnr,
                "pred_rmse": pred_rmse(test.data.y, yhat),
            },
        }
        write_json(out / "metrics.json", {"entries": [entry]})
    return worst


def cmd_fit(cfg: RunConfig, out: Path, seed: int, threads: int, allow_unconverged: bool) -> int:
    if cfg.data is None:
        raise ConfigError("fit needs a 'data' section")
    _check_draws(cfg)
    d = cfg.data
    worst = []
    if d.scenario is not None:
        dirs = _scenario_dirs(cfg.path(d.scenario))
        for sd in dirs:
            meta = read_json(sd / "scenario.json")
            train = _load_split(sd / "train.csv")
            if train is None:
                raise DataError(f"{sd} has no training data")
            test = _load_split(sd / "test.csv")
            bh, bb = read_csv(sd / "beta_star.csv")
            beta_star = np.array([float(r[bh.index("beta_star")]) for r in bb])
            scenario = {"meta": meta, "beta_star": beta_star, "mask": beta_star != 0}
            target = out if len(dirs) == 1 and sd == cfg.path(d.scenario) else out / sd.name
            graph = _region_graph(cfg, train.data.J, meta)
            worst.append(_fit_one(cfg, target, seed, threads, train, test, graph, scenario))
    else:
        train = read_dataset(cfg.path(d.y), cfg.path(d.W), cfg.path(d.X))
        test = None
        if d.test_y is not None:
            test = read_dataset(cfg.path(d.test_y), cfg.path(d.test_W), cfg.path(d.test_X))
        graph = _region_graph(cfg, train.data.J)
        worst.append(_fit_one(cfg, out, seed, threads, train, test, graph))
    bad = [w for w in worst if not math.isnan(w) and w >= RHAT_LIMIT]
    if bad:
        msg = f"max R-hat {max(bad):.3f} >= {RHAT_LIMIT}"
        if not allow_unconverged:
            raise ConvergenceFailure(msg)
        log.warning("%s (continuing: --allow-unconverged)", msg)
    return EXIT_OK


# ---------------------------------------------------------------- select / predict


def _load_run(run_dir: Path):
    manifest = read_json(run_dir / "manifest.json")
    if manifest.get("command") != "fit":
        raise DataError(f"{run_dir} is not a fit run directory")
    files = sorted(run_dir.glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise DataError(f"no chain files in {run_dir}")
    cols, draws = None, []
    for f in files:
        h, a = read_chain(f)
        cols = h
        draws.append(a)
    allx = np.concatenate(draws, axis=0)
    M = None
    if (run_dir / "basis_M.csv").is_file():
        _, mb = read_csv(run_dir / "basis_M.csv")
        M = np.array([[float(v) for v in r] for r in mb])
    return manifest, cols, allx, M


def _block(cols, allx, prefix):
    idx = [i for i, c in enumerate(cols) if c.startswith(prefix) and c[len(prefix) :].isdigit()]
    return allx[:, idx]


def cmd_select(run_dir: Path, rule: str, level: float, out: Optional[Path]) -> int:
    manifest, cols, allx, M = _load_run(run_dir)
    beta = _block(cols, allx, "beta_")
    if M is not None:
        beta = beta @ M.T
    grid = _grid_shape(manifest)
    graph = build_lattice(*grid) if grid is not None else None
    sel = _select(beta, rule, level)
    _write_selection(out or run_dir, sel, graph, manifest["region_ids"], grid)
    return EXIT_OK


def cmd_predict(run_dir: Path, W_path, X_path, level: float, out: Optional[Path]) -> int:
    manifest, cols, allx, M = _load_run(run_dir)
    wh, wb = read_csv(W_path)
    xh, xb = read_csv(X_path)
    W = np.array([[float(v) for v in r] for r in wb]).reshape(len(wb), len(wh))
    X = np.array([[float(v) for v in r] for r in xb]).reshape(len(xb), len(xh))
    if xh != manifest["region_ids"]:
        raise DataError("X header does not match the fitted region ids")
    if W.shape[1] != manifest["K"] or W.shape[0] != X.shape[0]:
        raise DataError("W/X shapes do not match the fitted model")
    mom = manifest.get("standardization")
    if mom is not None:
        for key, A in (("W", W), ("X", X)):
            mu = np.asarray(mom[f"{key}_mean"])
            sd = np.asarray(mom[f"{key}_sd"])
            const = ~(sd > 0)
            A -= np.where(const, 0.0, mu)
            A /= np.where(const, 1.0, sd)
    if M is not None:
        X = X @ M
    alpha = _block(cols, allx, "alpha_")
    beta = _block(cols, allx, "beta_")
    rows = _predict_rows(alpha, beta, W, X, manifest["seed"], level)
    write_csv(
        (out or run_dir) / "predictions.csv",
        ["row", "prediction", "rounded", "hpd_lower", "hpd_upper", "theta_mean"],
        rows,
    )
    return EXIT_OK


# ---------------------------------------------------------------- backtest


def cmd_backtest(cfg: RunConfig, out: Path, seed: int, threads: int) -> int:
    if cfg.backtest is None or cfg.data is None:
        raise ConfigError("backtest needs 'data' and 'backtest' sections")
    _check_draws(cfg)
    d, b = cfg.data, cfg.backtest
    if d.scenario is not None:
        raise ConfigError("backtest needs time-indexed data files (y with a 'year' column)")
    loaded = read_dataset(cfg.path(d.y), cfg.path(d.W), cfg.path(d.X))
    if loaded.years is None:
        raise DataError("backtest data needs a 'year' column in the y file")
    J = loaded.data.J
    region_graph = _region_graph(cfg, J)
    M = None
    if cfg.basis.enabled:
        bm = _basis_for(cfg, loaded.region_ids)
        M = bm.M
        graph = coefficient_graph(bm.basis)
    else:
        if region_graph is None:
            raise ConfigError("a graph is needed: set data.lattice or data.edges, or enable basis")
        graph = region_graph

    fixed_mask = None
    if b.fixed_region is not None:
        fr = b.fixed_region
        if fr.region_ids is not None:
            unknown = set(fr.region_ids) - set(loaded.region_ids)
            if unknown:
                raise DataError(f"fixed_region ids not in X: {sorted(unknown)[:5]}")
            fixed_mask = np.array([r in set(fr.region_ids) for r in loaded.region_ids])
        else:
            if d.locations is None:
                raise ConfigError("a lon/lat fixed_region needs data.locations")
            ids, coords = read_locations(cfg.path(d.locations))
            pos = {r: i for i, r in enumerate(ids)}
            c = coords[[pos[r] for r in loaded.region_ids]]
            fixed_mask = (
                (c[:, 0] >= fr.lon[0]) & (c[:, 0] <= fr.lon[1]) & (c[:, 1] >= fr.lat[0]) & (c[:, 1] <= fr.lat[1])
            )
        if not fixed_mask.any():
            raise DataError("fixed_region selects no regions")

    spec_kwargs = dict(zeta=cfg.model.zeta, eta=cfg.model.eta, positivity=cfg.model.positivity)
    res = run_backtest(
        loaded.data,
        loaded.years,
        graph,
        b.models,
        b.start_year,
        b.end_year,
        cfg.sampler.build(seed),
        ma_window=b.ma_window,
        alpha_level=b.alpha_level,
        fixed_mask=fixed_mask,
        level=b.level,
        basis_M=M,
        standardize=d.standardize,
        spec_kwargs=spec_kwargs,
        threads=threads,
    )
    names = list(res.predictions)
    rows = []
    for i, t in enumerate(res.years):
        for n in names:
            p = res.predictions[n][i]
            lo, hi = res.hpd[n][i]
            rows.append([t, res.observed[i], n, p, int(round(p)), lo, hi])
    write_csv(out / "predictions.csv", ["year", "observed", "model", "prediction", "rounded", "hpd_lower", "hpd_upper"], rows)
    write_csv(out / "forecast_table.csv", ["measure", *names], res.table())
    grid = (region_graph.rows, region_graph.cols) if region_graph is not None and region_graph.is_lattice else None
    for n, masks in res.active.items():
        persist = res.persistent.get(n)
        header = ["region_id", "row", "col", *[str(t) for t in res.years], "persistent"]
        arr = np.array(masks)
        out_rows = []
        for j in range(J):
            cell = region_graph.cell(j) if grid is not None else (None, None)
            out_rows.append(
                [loaded.region_ids[j], *cell, *arr[:, j].astype(int), None if persist is None else int(persist[j])]
            )
        write_csv(out / f"active_{n}.csv", header, out_rows)
        if persist is not None and grid is not None:
            write_grid(out / f"persistent_{n}_grid.csv", persist.astype(int), *grid)
    entries = [
        {
            "kind": "backtest",
            "model": n,
            "setting": {"start_year": b.start_year, "end_year": b.end_year},
            "seed": seed,
            "metrics": res.reports[n].as_dict(),
        }
        for n in names
    ]
    write_json(out / "metrics.json", {"entries": entries})
    write_json(
        out / "manifest.json",
        {
            "command": "backtest",
            "seed": seed,
            "models": names,
            "years": res.years,
            "train_years": {str(t): [int(res.train_years[t].min()), int(res.train_years[t].max())] for t in res.years},
            "max_rhat": res.max_rhat,
            "basis": cfg.basis.model_dump() if M is not None else None,
            "sampler": cfg.sampler.model_dump(),
        },
    )
    return EXIT_OK


# ---------------------------------------------------------------- report

_MODEL_ORDER = {m: i for i, m in enumerate(["DLC", "DHS", "HS", "LC", "CAR", "MA", "TSTAT", "FIXED_REGION"])}
_KEY_ORDER = [
    "pattern", "b_star", "rho_x", "start_year", "end_year",
    "signal_rmse", "noise_rmse", "beta_rmse", "fpr", "fnr", "pred_rmse",
    "mae", "rmse", "max_ae", "sdr",
]


def _ordered(keys) -> list:
    rank = {k: i for i, k in enumerate(_KEY_ORDER)}
    return sorted(keys, key=lambda k: (rank.get(k, len(rank)), k))


def cmd_report(dirs: Sequence[Path], out: Path) -> int:
    files = []
    for d in dirs:
        if not d.exists():
            raise DataError(f"no such directory: {d}")
        files.extend(sorted(d.rglob("metrics.json")))
    entries = [e for f in files for e in read_json(f).get("entries", [])]
    if not entries:
        raise DataError("no metrics.json found in the given directories")
    by_kind = {}
    for e in entries:
        by_kind.setdefault(e["kind"], []).append(e)
    for kind, es in sorted(by_kind.items()):
        skeys = _ordered({k for e in es for k in e["setting"]})
        mkeys = _ordered({k for e in es for k in e["metrics"]})
        groups = {}
        for e in es:
            key = (tuple(e["setting"].get(k) for k in skeys), e["model"])
            groups.setdefault(key, []).append(e["metrics"])

        def order(item):
            (setting, model), _ = item
            return tuple(str(s) for s in setting), _MODEL_ORDER.get(str(model).upper(), 99), str(model)

        rows = []
        for (setting, model), ms in sorted(groups.items(), key=order):
            row = [*setting, model, len(ms)]
            for k in mkeys:
                v = np.array([m[k] for m in ms if m.get(k) is not None], dtype=float)
                row.append(float(v.mean()) if v.size else None)
                row.append(float(v.std(ddof=1)) if v.size > 1 else None)
            rows.append(row)
        header = [*skeys, "model", "n"] + [f"{k}_{s}" for k in mkeys for s in ("mean", "sd")]
        write_csv(out / f"report_{kind}.csv", header, rows)
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="maximum parallel chains")
    common.add_argument("--allow-unconverged", action="store_true", help="exit 0 even if R-hat >= 1.1")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sglshrink", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="generate synthetic scenarios")
    sub.add_parser("fit", parents=[common], help="run the MCMC sampler")
    s = sub.add_parser("select", parents=[common], help="region selection from a fit run")
    s.add_argument("run_dir", type=Path)
    s.add_argument("--rule", choices=["HPD", "SN"], default="HPD")
    s.add_argument("--level", type=float, default=0.95)
    s = sub.add_parser("predict", parents=[common], help="posterior predictive for new covariates")
    s.add_argument("run_dir", type=Path)
    s.add_argument("--W", dest="w_path", type=Path, required=True)
    s.add_argument("--X", dest="x_path", type=Path, required=True)
    s.add_argument("--level", type=float, default=0.95)
    sub.add_parser("backtest", parents=[common], help="rolling one-year-ahead forecasts")
    s = sub.add_parser("report", parents=[common], help="aggregate metrics tables")
    s.add_argument("dirs", type=Path, nargs="+")
    return p


def _dispatch(args) -> int:
    if args.command in ("select", "predict", "report"):
        if args.command == "select":
            if not 0 < args.level < 1:
                raise ConfigError("--level must lie in (0, 1)")
            return cmd_select(args.run_dir, args.rule, args.level, args.out)
        if args.command == "predict":
            return cmd_predict(args.run_dir, args.w_path, args.x_path, args.level, args.out)
        if args.out is None:
            raise ConfigError("report needs --out")
        return cmd_report(args.dirs, args.out)

    cfg = load_config(args.config) if args.config is not None else parse_config({})
    seed = cfg.seed if args.seed is None else args.seed
    out = _out_dir(args, cfg)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if args.command == "simulate":
        return cmd_simulate(cfg, out, seed)
    if args.command == "fit":
        return cmd_fit(cfg, out, seed, args.threads, args.allow_unconverged)
    return cmd_backtest(cfg, out, seed, args.threads)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ScenarioError, BacktestError, GraphError, OutOfHullError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED


if __name__ == "__main__":
    sys.exit(main())
