from __future__ import annotations

import math

import numpy as np
import pytest
import yaml

from sglshrink.config import ConfigError, load_config, parse_config
from sglshrink.io import (
    DataError,
    fmt,
    read_csv,
    read_dataset,
    read_edges,
    read_grid,
    read_locations,
    read_split,
    standardize_columns,
    write_csv,
    write_dataset,
    write_grid,
    write_json,
    read_json,
    write_split,
)
from sglshrink.model import Dataset


def _data(n=6, K=2, J=3, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.poisson(3, n), rng.normal(size=(n, K)), rng.normal(size=(n, J)))


def test_fmt():
    assert fmt(3.0) == "3"
    assert fmt(0.1) == "0.1"
    assert fmt(True) == "1"
    assert fmt(None) == ""
    assert fmt(float("nan")) == "nan"
    x = 1 / 3
    assert float(fmt(x)) == x


def test_csv_roundtrip_and_field_check(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["a", "b"], [[1, 2.5], [3, 4]])
    assert read_csv(p) == (["a", "b"], [["1", "2.5"], ["3", "4"]])
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError, match=":3"):
        read_csv(p)
    with pytest.raises(DataError):
        read_csv(tmp_path / "missing.csv")


def test_json_numpy(tmp_path):
    p = write_json(tmp_path / "m.json", {"b": np.arange(2), "a": np.float64(0.5)})
    assert read_json(p) == {"a": 0.5, "b": [0, 1]}
    assert p.read_text().index('"a"') < p.read_text().index('"b"')


def test_standardize_uses_training_moments():
    tr = np.array([[1.0, 2.0], [1.0, 4.0], [1.0, 6.0]])
    te = np.array([[1.0, 8.0]])
    a, b = standardize_columns(tr, te)
    assert np.array_equal(a[:, 0], [1, 1, 1])
    assert np.allclose(a[:, 1].mean(), 0) and np.allclose(a[:, 1].std(), 1)
    assert b[0, 1] == pytest.approx(4 / math.sqrt(8 / 3))


def test_split_roundtrip(tmp_path):
    d = _data()
    loaded = read_split(write_split(tmp_path / "train.csv", d))
    assert np.array_equal(loaded.data.y, d.y)
    assert np.array_equal(loaded.data.W, d.W) and np.array_equal(loaded.data.X, d.X)
    assert loaded.region_ids == ["r0", "r1", "r2"]


def test_split_bad_columns(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("y,w_0,z\n1,1,1\n")
    with pytest.raises(DataError):
        read_split(p)
    p.write_text("y,w_0,x_0\n-1,1,1\n")
    with pytest.raises(DataError):
        read_split(p)


def test_dataset_roundtrip_with_years(tmp_path):
    d = _data()
    write_dataset(tmp_path, d, years=np.arange(2000, 2006), region_ids=["a", "b", "c"])
    L = read_dataset(tmp_path / "y.csv", tmp_path / "W.csv", tmp_path / "X.csv")
    assert L.years.tolist() == list(range(2000, 2006))
    assert L.region_ids == ["a", "b", "c"]
    assert np.array_equal(L.data.X, d.X)


def test_dataset_rejects_unsorted_years_and_mismatch(tmp_path):
    d = _data()
    write_dataset(tmp_path, d, years=[2000, 2002, 2001, 2003, 2004, 2005])
    with pytest.raises(DataError, match="increasing"):
        read_dataset(tmp_path / "y.csv", tmp_path / "W.csv", tmp_path / "X.csv")
    write_csv(tmp_path / "y.csv", ["y"], [[1], [2]])
    with pytest.raises(DataError):
        read_dataset(tmp_path / "y.csv", tmp_path / "W.csv", tmp_path / "X.csv")


def test_edges_and_locations(tmp_path):
    write_csv(tmp_path / "e.csv", ["node_a", "node_b"], [[0, 1], [1, 2]])
    g = read_edges(tmp_path / "e.csv", 3)
    assert g.degrees.tolist() == [1, 2, 1]
    with pytest.raises(DataError):
        read_edges(tmp_path / "e.csv", 4)
    write_csv(tmp_path / "l.csv", ["region_id", "lon", "lat"], [["a", -50, 10], ["b", -40, 12.5]])
    ids, c = read_locations(tmp_path / "l.csv")
    assert ids == ["a", "b"] and c.tolist() == [[-50, 10], [-40, 12.5]]


def test_grid_roundtrip(tmp_path):
    v = np.arange(6.0)
    assert np.array_equal(read_grid(write_grid(tmp_path / "g.csv", v, 2, 3)), v.reshape(2, 3))


def test_config_defaults():
    cfg = parse_config({"data": {"scenario": "s"}})
    assert cfg.model.name == "DLC"
    assert cfg.sampler.n_chains == 5 and cfg.sampler.adapt_interval == 100
    sc = cfg.sampler.build(7)
    assert sc.seed == 7 and sc.n_iter == 20_000


@pytest.mark.parametrize(
    "doc",
    [
        {"bogus": 1},
        {"model": {"name": "XYZ"}},
        {"model": {"tau_prior": "HS"}},
        {"sampler": {"n_iter": 100, "burn_in": 100}},
        {"sampler": {"init_steps": {"nope": 1.0}}},
        {"simulation": {"pattern": "diagonal"}},
        {"data": {"scenario": "s", "y": "y.csv"}},
        {"data": {"y": "y.csv"}},
        {"backtest": {"start_year": 2010, "end_year": 2000}},
        {"backtest": {"start_year": 2010, "end_year": 2012, "models": ["fixed_region"]}},
        {"backtest": {"start_year": 2010, "end_year": 2012, "models": ["ARIMA"]}},
        {"selection": {"rule": "BF"}},
        {"base_dir": "/x"},
    ],
)
def test_config_rejections(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_explicit_priors_clear_name():
    cfg = parse_config({"model": {"tau_prior": "TC", "lambda_prior": "HS", "rho_prior": "zero"}})
    assert cfg.model.name is None


def test_load_config_resolves_relative_paths(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump({"data": {"y": "y.csv", "W": "/abs/W.csv", "X": "X.csv"}}))
    cfg = load_config(p)
    assert cfg.path(cfg.data.y) == tmp_path.resolve() / "y.csv"
    assert str(cfg.path(cfg.data.W)) == "/abs/W.csv"
    p.write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.yaml")
