import json

import numpy as np
import pytest

from ising_assortment import Domain, Instance, IsingModel
from ising_assortment.serialization import (
    dumps,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    load_model,
    model_from_dict,
    model_to_dict,
    save_instance,
    save_model,
)


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.normal(size=(5, 5)) * 1e3
    t = (t + t.T) / 3.0
    inst = Instance.from_arrays(t, rng.random(5) / 7.0)
    path = tmp_path / "inst.json"
    save_instance(path, inst)
    back = load_instance(path)
    assert np.array_equal(back.theta, inst.theta)
    assert np.array_equal(back.profits, inst.profits)


def test_model_without_profits(tmp_path):
    m = IsingModel([[0.1, -0.2], [-0.2, 0.3]], Domain.SPIN)
    save_model(tmp_path / "m.json", m)
    back, profits = load_model(tmp_path / "m.json")
    assert profits is None
    assert back == m
    assert json.loads((tmp_path / "m.json").read_text())["domain"] == "spin"


def test_layout():
    doc = model_to_dict(IsingModel([[1.0]]), [2.0])
    assert doc == {"n": 1, "domain": "binary", "theta": [[1.0]], "profits": [2.0]}


@pytest.mark.parametrize(
    "doc",
    [
        {"n": 2, "theta": [[0.0]]},
        {"theta": [[0.0]]},
        {"n": 1, "domain": "ternary", "theta": [[0.0]]},
        {"n": 1, "theta": [[0.0]], "profits": [1.0, 2.0]},
    ],
)
def test_malformed_documents(doc):
    with pytest.raises(ValueError):
        model_from_dict(doc)


def test_instance_needs_profits():
    with pytest.raises(ValueError):
        instance_from_dict({"n": 1, "theta": [[0.0]]})


def test_nonfinite_is_not_serialized():
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


def test_instance_dict_round_trip(example1):
    assert instance_from_dict(instance_to_dict(example1)) == example1
