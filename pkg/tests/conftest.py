import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("rbq", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rbq")

GOLDEN = Path(__file__).parent / "golden"
FIXTURES = Path(__file__).parent / "fixtures"
CONFIGS = Path(__file__).resolve().parents[1] / "configs"
S_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
SEED = 20261016

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def oracle_values():
    return json.loads((GOLDEN / "oracles.json").read_text())


@pytest.fixture
def criterion():
    """Record the verdict of an acceptance criterion; printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        _CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
