"""Simulator throughput for the three model kinds, with and without trackers.

    python3 scripts/benchmark_sim.py [--events N]
"""

import argparse
import time

from rbq.distributions import Deterministic, Erlang, Exponential, HyperExponential
from rbq.gm1 import Gm1Model
from rbq.gmn1 import build_gmc
from rbq.mngn1 import MnGn1Model
from rbq.schedule import RateSchedule
from rbq.sim import Partition, SimConfig, simulate_once

MODELS = {
    "M/M/1": Gm1Model(Exponential(1.0), 2.0),
    "D/M/2": build_gmc(Deterministic(1.0), 2, 0.75),
    "M/G/1": MnGn1Model(RateSchedule((), 1.0, 0), (), Erlang(2, 4.0)),
    "Mn/Gn/1": MnGn1Model(RateSchedule((1.2,), 0.8, 0), (), HyperExponential((0.4, 0.6), (1.0, 3.0))),
}
TRACKERS = (Partition.level(0), Partition.level(1), Partition.two_step(1), Partition.two_step(2))


def main() -> None:
    p = argparse.ArgumentParser()
    p.add_argument("--events", type=int, default=1_000_000)
    args = p.parse_args()
    for name, model in MODELS.items():
        for trackers in ((), TRACKERS):
            cfg = SimConfig(model, seed=20261016, events=args.events, replications=1, trackers=trackers)
            t0 = time.perf_counter()
            simulate_once(cfg)
            dt = time.perf_counter() - t0
            print(f"{name:8s} trackers={len(trackers)}  {dt:6.2f}s  {args.events / dt / 1e6:.2f}M events/s")


if __name__ == "__main__":
    main()
