import copy
import json

import pytest

from rbq.config import SCHEMA, build_model, load, parse, validate
from rbq.errors import ConfigError
from rbq.gm1 import Gm1Model
from rbq.gmn1 import Gmn1Model
from rbq.mngn1 import MnGn1Model
from rbq.sim import Partition

from conftest import CONFIGS

BASE = {"model": {"kind": "gm1", "inter_arrival": {"family": "exponential", "rate": 1.0}, "mu": 2.0}}


def _with(**parts):
    rec = copy.deepcopy(BASE)
    rec.update(parts)
    return rec


@pytest.mark.parametrize("rec", [
    {},
    {"model": {"kind": "gm1", "inter_arrival": {"family": "exponential", "rate": 1.0}}},
    {"model": {**BASE["model"], "extra": 1}},
    {"model": {**BASE["model"], "mu": -1.0}},
    {"model": {**BASE["model"], "inter_arrival": {"family": "gamma", "rate": 1.0}}},
    {"model": {**BASE["model"], "inter_arrival": {"family": "erlang", "shape": 1.5, "rate": 1.0}}},
    {"model": {"kind": "gmn1", "inter_arrival": {"family": "exponential", "rate": 1.0},
               "mu": {"head": [1.0]}}},
    _with(sim={"events": 10, "horizon": 5.0}),
    _with(sim={"seed": -3}),
    _with(sim={"trackers": [{"level": -1}]}),
    _with(sim={"trackers": [{"two_step": 0}]}),
    _with(output={"format": "xml"}),
    _with(verify={"alpha": 1.5}),
    _with(unknown=True),
])
def test_schema_rejects(rec):
    with pytest.raises(ConfigError):
        validate(rec)


@pytest.mark.parametrize("rec", [
    _with(sim={"events": 10, "warmup": 10}),
    _with(sim={"trackers": [{"down": [0, 1], "up": [1]}]}),
    {"model": {**BASE["model"], "inter_arrival": {"family": "uniform", "lo": 2.0, "hi": 1.0}}},
    {"model": {**BASE["model"], "inter_arrival": {"family": "hyperexponential", "probs": [0.5, 0.4],
                                                  "rates": [1.0, 2.0]}}},
])
def test_semantic_errors_are_config_errors(rec):
    with pytest.raises(ConfigError):
        parse(rec)


def test_parse_defaults_and_no_mutation():
    rec = _with()
    before = copy.deepcopy(rec)
    cfg = parse(rec)
    assert rec == before
    assert isinstance(cfg.model, Gm1Model) and cfg.sim_model is cfg.model
    assert cfg.sim.events == 1_000_000 and cfg.sim.replications == 10
    assert cfg.output.s_grid == (0.25, 0.5, 1.0, 2.0, 4.0) and cfg.output.format == "json"
    assert cfg.verify.alpha == 0.01
    cfg.record["model"]["mu"] = 99.0
    assert rec == before


def test_horizon_mode():
    cfg = parse(_with(sim={"horizon": 100.0}))
    assert cfg.sim.events is None and cfg.sim.horizon == 100.0


def test_build_models():
    g = {"family": "deterministic", "value": 1.0}
    kind, m, c = build_model({"kind": "gmc", "inter_arrival": g, "servers": 3, "mu": 0.5})
    assert kind == "gmc" and c == 3 and isinstance(m, Gmn1Model)
    assert [m.rate(n) for n in range(1, 6)] == [0.5, 1.0, 1.5, 1.5, 1.5]
    _, m, _ = build_model({"kind": "gmn1", "inter_arrival": g, "mu": {"head": [1.0, 2.0], "tail": 3.0}})
    assert [m.rate(n) for n in range(1, 5)] == [1.0, 2.0, 3.0, 3.0]
    _, m, _ = build_model({"kind": "mngn1", "lam": {"head": [2.0], "tail": 1.0}, "services": [g],
                           "service_tail": {"family": "exponential", "rate": 3.0}})
    assert isinstance(m, MnGn1Model) and m.arrival_rate(0) == 2.0 and m.arrival_rate(5) == 1.0


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.json")):
        if path.name == "schema.json":
            continue
        cfg = load(path)
        assert cfg.sim.seed == 20261016
        assert all(isinstance(p, Partition) for p in cfg.sim.trackers)


def test_published_schema_matches():
    assert json.loads((CONFIGS / "schema.json").read_text()) == SCHEMA


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load(bad)
