import csv
import io
import json
import subprocess
import sys

import pytest

from rbq import cli
from rbq.oracles import sigma_bisect
from rbq.distributions import Deterministic

from conftest import CONFIGS, FIXTURES, GOLDEN


def _run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _config(tmp_path, record, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(record))
    return path


MM1 = {"model": {"kind": "gm1", "inter_arrival": {"family": "exponential", "rate": 1.0}, "mu": 2.0}}


def test_analyze_mm1(tmp_path, capsys):
    code, out, _ = _run(["analyze", _config(tmp_path, MM1)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["schema"] == "rbq.analysis/1"
    assert rep["sigma"] == 0.5 and rep["pi_n"]["0"] == 0.5 and rep["a_n"]["3"] == 0.0625
    # memoryless inter-arrival: the residual is Exp(lambda) at every level
    assert rep["residual_lst"]["0"]["values"][2] == {"s": 1.0, "value": pytest.approx(0.5, abs=1e-11)}


def test_analyze_dm1_sigma(capsys):
    code, out, _ = _run(["analyze", CONFIGS / "dm1.json"], capsys)
    assert code == 0
    ref = sigma_bisect(Deterministic(1.0), 1.5)
    assert json.loads(out)["sigma"] == pytest.approx(ref, rel=1e-11)


def test_analyze_golden_files(capsys):
    code, out, _ = _run(["analyze", CONFIGS / "dm1.json"], capsys)
    assert code == 0 and out == (GOLDEN / "analyze_dm1.json").read_text()
    code, out, _ = _run(["analyze", CONFIGS / "mngn1.json", "--format", "csv"], capsys)
    assert code == 0 and out == (GOLDEN / "analyze_mngn1.csv").read_text()


def test_simulate_golden_file(capsys):
    code, out, _ = _run(["simulate", FIXTURES / "small_sim.json"], capsys)
    assert code == 0 and out == (GOLDEN / "simulate_small.json").read_text()


def test_simulate_seed_override_and_out(tmp_path, capsys):
    dest = tmp_path / "out.json"
    code, out, _ = _run(["simulate", FIXTURES / "small_sim.json", "--seed", "7", "--out", dest], capsys)
    assert code == 0 and out == ""
    rep = json.loads(dest.read_text())
    assert rep["seed"] == 7 and rep != json.loads((GOLDEN / "simulate_small.json").read_text())
    assert rep["rbp_max_imbalance"] <= 1 and rep["conservation"]


def test_simulate_threads_identical(capsys):
    _, one, _ = _run(["simulate", FIXTURES / "small_sim.json"], capsys)
    _, two, _ = _run(["simulate", FIXTURES / "small_sim.json", "--threads", "2"], capsys)
    assert one == two


def test_unstable_exit_3(tmp_path, capsys):
    rec = {"model": {"kind": "gm1", "inter_arrival": {"family": "exponential", "rate": 2.0}, "mu": 1.0}}
    path = _config(tmp_path, rec)
    for cmd in ("analyze", "simulate", "verify"):
        code, out, err = _run([cmd, path], capsys)
        assert code == 3 and out == "" and "lambda < mu" in err


@pytest.mark.parametrize("mutate", [
    lambda r: r["model"].update(extra=1),
    lambda r: r.update(sim={"events": 5, "horizon": 1.0}),
    lambda r: r["model"].update(mu="fast"),
    lambda r: r.update(sim={"trackers": [{"down": [1], "up": [1]}]}),
])
def test_config_errors_exit_2(tmp_path, capsys, mutate):
    rec = json.loads(json.dumps(MM1))
    mutate(rec)
    code, out, err = _run(["simulate", _config(tmp_path, rec)], capsys)
    assert code == 2 and out == "" and err.startswith("config error")


def test_missing_file_and_bad_seed(tmp_path, capsys):
    assert _run(["analyze", tmp_path / "nope.json"], capsys)[0] == 2
    assert _run(["simulate", _config(tmp_path, MM1), "--seed", "-1"], capsys)[0] == 2
    assert _run(["simulate", _config(tmp_path, MM1), "--threads", "0"], capsys)[0] == 2


def test_numeric_failure_exit_4(tmp_path, capsys):
    # a slow second service: level ratios converge too slowly to stabilise within the level cap
    rec = {"model": {"kind": "mngn1", "lam": 0.7872515882602742,
                     "services": [{"family": "exponential", "rate": 4.491535913746268},
                                  {"family": "exponential", "rate": 1.4440925033821175}],
                     "service_tail": {"family": "exponential", "rate": 2.269061652469925}}}
    code, out, err = _run(["analyze", _config(tmp_path, rec)], capsys)
    assert code == 4 and out == "" and "did not stabilise" in err


def test_csv_output(tmp_path, capsys):
    code, out, _ = _run(["analyze", _config(tmp_path, MM1), "--format", "csv"], capsys)
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == 0 and rows["sigma"] == "0.5" and rows["pi_n.1"] == "0.25"


def test_config_file_not_modified(tmp_path, capsys):
    path = _config(tmp_path, {**MM1, "sim": {"seed": 3, "events": 3000, "replications": 2}})
    before = path.read_bytes()
    _run(["simulate", path, "--seed", "9"], capsys)
    assert path.read_bytes() == before


def test_verify_mm1_default_config(capsys):
    code, out, _ = _run(["verify", CONFIGS / "mm1.json"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"], [c for c in rep["checks"] if not c["pass"]]
    names = {c["check"] for c in rep["checks"]}
    assert {"pi", "arrival_epoch", "arrival_ratio", "residual_lst", "first_fraction", "idle_lst",
            "rbp_max_imbalance", "conservation"} <= names


def test_verify_gm2_tail_geometric(capsys):
    code, out, _ = _run(["verify", FIXTURES / "small_verify_dm2.json", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    tail = [r for r in rows if r["check"] == "pi_tail_geometric"]
    assert len(tail) == 1 and tail[0]["pass"] == "True"


def test_verify_negative_control_fails(capsys):
    code, out, err = _run(["verify", FIXTURES / "negative_control.json"], capsys)
    rep = json.loads(out)
    assert code == 1 and not rep["passed"]
    assert any(c["check"] == "pi" and c["n"] == 0 and not c["pass"] for c in rep["checks"])
    assert "FAIL pi n=0" in err


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rbq", "analyze", str(_config(tmp_path, MM1))],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["sigma"] == 0.5


def test_round_sig():
    assert cli.round_sig({"a": [1 / 3, float("nan")], "b": True, "c": 2}) == \
        {"a": [0.333333333333, None], "b": True, "c": 2}
