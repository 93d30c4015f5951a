import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", "40")),
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

DATA = Path(__file__).resolve().parents[1] / "src" / "hybrid_planner" / "data"


@pytest.fixture(scope="session")
def desk_checkpoint_dir():
    p = DATA / "desk2"
    if not (p / "manifest.json").exists():
        pytest.skip("no shipped desk checkpoint")
    return p


@pytest.fixture(scope="session")
def swap3_checkpoint_dir():
    p = DATA / "swap3"
    if not (p / "manifest.json").exists():
        pytest.skip("no shipped 3-robot checkpoint")
    return p


# acceptance criteria report one PASS/FAIL line each, repeated in the summary
ACCEPTANCE = []


@pytest.fixture
def verdict(capsys):
    def record(number: int, ok: bool, detail: str):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
