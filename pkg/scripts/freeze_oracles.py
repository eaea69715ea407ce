"""Compute the oracle reference values used by the test suite and freeze them to JSON.

Everything here comes from ``rbq.oracles`` (quadrature, bisection, embedded
chains, Monte Carlo) and never from the transform calculus or the solvers.
Rerun after changing an oracle; the tests read ``tests/golden/oracles.json``.

    python3 scripts/freeze_oracles.py [--out tests/golden/oracles.json]
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np

from rbq import oracles
from rbq.distributions import Deterministic, Erlang, Exponential, HyperExponential, Uniform
from rbq.schedule import RateSchedule

SEED = 20261016
MC_SIZE = 10_000_000

FAMILIES = {
    "exponential": Exponential(2.0),
    "deterministic": Deterministic(1.0),
    "erlang": Erlang(2, 2.0),
    "hyperexponential": HyperExponential((0.3, 0.7), (0.5, 3.0)),
    "uniform": Uniform(0.5, 1.5),
}
S_GRID = [0.25, 0.5, 1.0, 2.0, 4.0]
SIGMA_PAIRS = [
    ("exponential", {"rate": 1.0}, 2.0),
    ("deterministic", {"value": 1.0}, 1.5),
    ("erlang", {"shape": 2, "rate": 2.0}, 2.0),
    ("erlang", {"shape": 3, "rate": 1.0}, 0.5),
    ("hyperexponential", {"probs": [0.3, 0.7], "rates": [0.5, 3.0]}, 1.5),
    ("uniform", {"lo": 0.0, "hi": 2.0}, 1.1),
    ("uniform", {"lo": 0.5, "hi": 1.5}, 3.0),
    ("deterministic", {"value": 2.0}, 0.6),
    ("exponential", {"rate": 3.0}, 3.3),
    ("erlang", {"shape": 5, "rate": 10.0}, 2.5),
]


def build(family, params):
    from rbq.distributions import from_dict
    return from_dict({"family": family, **params})


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests/golden/oracles.json"))
    args = ap.parse_args()
    rng = np.random.default_rng(SEED)
    out: dict = {"seed": SEED, "mc_size": MC_SIZE}

    # residual-operator LST and CDF by quadrature, per family and rate
    out["d_lst"] = {name: {str(lam): [oracles.numeric_d_lst(F, lam, s) for s in S_GRID]
                           for lam in (0.5, 1.0, 2.0)} for name, F in FAMILIES.items()}
    out["d_cdf"] = {name: {str(lam): [oracles.numeric_d_cdf(F, lam, w) for w in (0.1, 0.5, 1.0, 2.0)]
                           for lam in (0.5, 1.0, 2.0)} for name, F in FAMILIES.items()}
    out["d_lst_det1_lam1_s2"] = oracles.numeric_d_lst(Deterministic(1.0), 1.0, 2.0)

    # Monte Carlo of X - Y given X >= Y
    mc = {}
    for key, F, lam in (("det1_lam1", Deterministic(1.0), 1.0), ("erlang22_lam1", Erlang(2, 2.0), 1.0)):
        x = oracles.mc_residual(F, lam, MC_SIZE, rng)
        mc[key] = {"mean": float(x.mean()), "se": float(x.std(ddof=1) / math.sqrt(x.size)),
                   "cdf_0.5": float((x <= 0.5).mean()),
                   "cdf_0.5_se": float(math.sqrt((x <= 0.5).mean() * (1 - (x <= 0.5).mean()) / x.size))}
    out["mc_residual"] = mc
    out["numeric_d_cdf_det1_lam1_0.5"] = oracles.numeric_d_cdf(Deterministic(1.0), 1.0, 0.5)

    out["sigma_bisect"] = [{"family": f, "params": p, "mu": mu, "sigma": oracles.sigma_bisect(build(f, p), mu)}
                           for f, p, mu in SIGMA_PAIRS]

    out["mg1_erlang24_lam1"] = oracles.embedded_chain_mg1(Erlang(2, 4.0), 1.0).probs[:30].tolist()
    out["mg1_det05_lam1"] = oracles.embedded_chain_mg1(Deterministic(0.5), 1.0).probs[:30].tolist()
    out["dm2_mu075"] = oracles.embedded_chain_gmc(Deterministic(1.0), 2, 0.75).probs[:30].tolist()
    out["dm1_mu15_gmc"] = oracles.embedded_chain_gmc(Deterministic(1.0), 1, 1.5).probs[:30].tolist()
    out["mm2_lam1_mu075"] = oracles.birth_death_solve(
        RateSchedule.constant(1.0, 0), RateSchedule((0.75,), 1.5, 1), 200).probs[:30].tolist()
    out["mmn1_head24_tail4"] = oracles.birth_death_solve(
        RateSchedule.constant(1.0, 0), RateSchedule((2.0, 4.0), 4.0, 1), 200).probs[:30].tolist()

    Path(args.out).write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
