import json

import numpy as np
import pytest

import gaussfluct as gf
from gaussfluct.modelio import ParseError, dumps_17g, load_model, save_model


def test_round_trip_bit_identical(tmp_path, chain_model):
    p1 = tmp_path / "m1.json"
    p2 = tmp_path / "m2.json"
    save_model(chain_model, p1)
    loaded = load_model(p1)
    assert loaded.generator.tobytes() == chain_model.generator.tobytes()
    assert loaded.covariance.tobytes() == chain_model.covariance.tobytes()
    assert loaded.time_reversal.tobytes() == chain_model.time_reversal.tobytes()
    save_model(loaded, p2)
    assert p1.read_text() == p2.read_text()


def test_parse_error_carries_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"dim": 2,\n  "generator": [[}')
    with pytest.raises(ParseError, match=r"line 2"):
        load_model(path)


def test_missing_field(tmp_path):
    path = tmp_path / "missing.json"
    path.write_text('{"dim": 2, "generator": {"dense": [[0,0],[0,0]]}}')
    with pytest.raises(ParseError, match="covariance"):
        load_model(path)


def test_builder_reference_loading(tmp_path):
    doc = {
        "dim": 66,
        "generator": {"builder": {"name": "chain", "params": {"n_left": 16, "n_right": 16}}},
        "covariance": {"builder": {"name": "chain", "params": {"n_left": 16, "n_right": 16}}},
        "time_reversal": {"builder": {"name": "chain", "params": {"n_left": 16, "n_right": 16}}},
        "label": "chain from builder",
    }
    path = tmp_path / "builder.json"
    path.write_text(json.dumps(doc))
    model = load_model(path)
    built, _ = gf.build_chain(gf.ChainSpec(n_left=16, n_right=16))
    assert model.dim == 66
    assert np.abs(model.generator - built.generator).max() == 0.0
    assert np.abs(model.covariance - built.covariance).max() == 0.0


def test_builder_toy_loading(tmp_path):
    doc = {
        "dim": 64,
        "generator": {"builder": {"name": "toy", "params": {"n": 32, "lam": 0.5}}},
        "covariance": {"builder": {"name": "toy", "params": {"n": 32, "lam": 0.5}}},
        "time_reversal": {"builder": {"name": "toy", "params": {"n": 32, "lam": 0.5}}},
    }
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(doc))
    model = load_model(path)
    assert model.dim == 64
    assert gf.validate_model(model, [0.0, 1.0]).g4_ok


def test_builder_dim_mismatch(tmp_path):
    doc = {
        "dim": 10,
        "generator": {"builder": {"name": "toy", "params": {"n": 32, "lam": 0.5}}},
        "covariance": {"dense": np.eye(10).tolist()},
    }
    path = tmp_path / "bad_dim.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ParseError, match="dim"):
        load_model(path)


def test_unknown_builder(tmp_path):
    doc = {
        "dim": 4,
        "generator": {"builder": {"name": "mystery"}},
        "covariance": {"dense": np.eye(4).tolist()},
    }
    path = tmp_path / "mystery.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ParseError, match="unknown builder"):
        load_model(path)


def test_dumps_17g_round_trips_floats():
    values = [1.0 / 3.0, 1e-300, -2.5e17, np.pi, 6.02e23]
    text = dumps_17g({"v": values})
    parsed = json.loads(text)
    assert parsed["v"] == values
