import json
from pathlib import Path

import pytest

from vacq.model import BALKING, DistributionSpec, QueueConfig

ROOT = Path(__file__).resolve().parents[1]
SCHEMA = json.loads((ROOT / "schemas" / "result.json").read_text())

D = DistributionSpec

# deterministic service 0.5, exponential vacation rate 1
DET_EXP = QueueConfig(2.0, 3.0, D.deterministic(0.5), D.exponential(1.0))
# exponential service rate 2, exponential vacation rate 1
EXP_EXP = QueueConfig(1.0, 2.0, D.exponential(2.0), D.exponential(1.0))

ACCEPTANCE_LINES = []


@pytest.fixture
def det_exp():
    return DET_EXP


@pytest.fixture
def exp_exp():
    return EXP_EXP


@pytest.fixture
def det_exp_balking():
    return DET_EXP.with_discipline(BALKING)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({detail})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record
