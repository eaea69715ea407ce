"""Regenerate the CLI golden files and the published config schema.

Run after an intentional change of output format:

    python3 scripts/make_goldens.py
"""

import json
from pathlib import Path

from rbq import cli
from rbq.config import SCHEMA

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "golden"

CASES = {
    "analyze_dm1.json": ["analyze", str(ROOT / "configs" / "dm1.json")],
    "analyze_mngn1.csv": ["analyze", str(ROOT / "configs" / "mngn1.json"), "--format", "csv"],
    "simulate_small.json": ["simulate", str(ROOT / "tests" / "fixtures" / "small_sim.json")],
}


def main() -> None:
    for name, argv in CASES.items():
        code = cli.main([*argv, "--out", str(GOLDEN / name)])
        assert code == 0, (name, code)
        print("wrote", GOLDEN / name)
    (ROOT / "configs" / "schema.json").write_text(json.dumps(SCHEMA, indent=2) + "\n")
    print("wrote", ROOT / "configs" / "schema.json")


if __name__ == "__main__":
    main()
