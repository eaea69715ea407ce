"""Run ``verify`` on every shipped configuration and print one line per config.

    python3 scripts/verify_configs.py [--threads N]
"""

import argparse
import time
from pathlib import Path

from rbq import cli
from rbq.config import load

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    p = argparse.ArgumentParser()
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    failures = 0
    for path in sorted(CONFIGS.glob("*.json")):
        if path.name == "schema.json":
            continue
        t0 = time.perf_counter()
        rep = cli.verify(load(path), args.threads)
        bad = [c for c in rep["checks"] if not c["pass"]]
        failures += bool(bad)
        print(f"{path.name:18s} {'PASS' if not bad else 'FAIL'}  {len(rep['checks'])} checks, "
              f"{len(bad)} failed, {time.perf_counter() - t0:.1f}s")
        for c in bad:
            print(f"    {c['check']} n={c['n']} s={c['s']}: {c['analytic']:.6g} vs {c['empirical']:.6g}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
