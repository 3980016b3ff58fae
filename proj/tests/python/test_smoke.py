import json
import math
import os

import pytest

import probstl


COIN = {
    "name": "coin",
    "system": {
        "dt": 1.0,
        "horizon_seconds": 1.0,
        "A": [[1.0]],
        "B": [[0.0]],
        "feedback": {"K": [[0.0]]},
        "reference": [0.0],
        "x0": {"mean": [0.0], "cov": [[1.0]]},
    },
    "specification": {"formula": "G[0,1](x1 >= 0)"},
    "estimator": {"n_k": 64, "seed": 7},
}


def test_robustness_values():
    assert probstl.robustness("G[0,1](x1 >= 0)", [[1.0], [0.5]]) == 0.5
    assert probstl.robustness("F[0,1](x1 - 2 >= 0)", [[0.0], [5.0]]) == 3.0
    two = probstl.robustness("G[0,0](x1 >= 0 & x2 - 1 >= 0)", [[4.0, 3.0]])
    assert two == 2.0


def test_horizon_units():
    assert probstl.horizon("G[0,5](x1 >= 0)", 1) == 6
    assert probstl.horizon("F[0,0.25](x1 >= 0)", 1, dt=0.25) == 2
    assert probstl.horizon("G[0,2.5](x1 >= 0) & F[0,0.5](x1 >= 0)", 1, dt=0.5) == 6


def test_verify_coin():
    doc = probstl.verify(COIN)
    assert doc["mode"] == "stl"
    assert len(doc["digest"]) == 16
    assert abs(doc["probability"] - 0.5) < 0.1
    again = probstl.verify(COIN)
    assert again["probability"] == doc["probability"]
    other = probstl.verify(COIN, seed=1234)
    assert other["probability"] != doc["probability"]


def test_verify_negate_complement():
    p = probstl.verify(COIN)["probability"]
    q = probstl.verify(COIN, negate=True)["probability"]
    assert abs((p + q) - 1.0) < 0.2


def test_verify_ra_tail():
    sc = json.loads(json.dumps(COIN))
    sc["specification"] = {
        "reach_avoid": {
            "unsafe": [],
            "goals": [{"region": {"A": [[1.0]], "b": [-1.0]}, "window": [1.0, 1.0]}],
            "midpoints": False,
        }
    }
    doc = probstl.verify_ra(sc)
    want = 0.5 * (1.0 + math.erf(1.0 / math.sqrt(2.0)))  # P(x0 < 1)
    assert doc["mode"] == "reach-avoid"
    assert abs(doc["probability"] - want) < 0.1


def test_mc_baseline():
    doc = probstl.mc(COIN, seed=5)
    assert doc["mode"] == "mc"
    assert doc["mc"]["hits"] == round(doc["probability"] * doc["mc"]["n_mc"])
    assert abs(doc["probability"] - 0.5) < 0.1


def test_sample_satisfy(tmp_path):
    doc = probstl.sample(COIN, 5, "satisfy", str(tmp_path))
    path = doc["outputs"]["samples_csv"]
    assert os.path.exists(path)
    rows = open(path).read().strip().splitlines()
    assert len(rows) == 6  # header + samples
    header = rows[0].split(",")
    for line in rows[1:]:
        vals = [float(v) for v in line.split(",")]
        signal = [[vals[i]] for i in range(len(header))]
        assert probstl.robustness("G[0,1](x1 >= 0)", signal) >= 0.0


def test_config_error_is_value_error():
    with pytest.raises(ValueError):
        probstl.verify("{ not json")
    with pytest.raises(probstl.ConfigError):
        probstl.verify("{ not json")
