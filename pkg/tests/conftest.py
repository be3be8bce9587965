from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# acceptance verdicts, printed once at the end of the session
VERDICTS: dict = {}


def record(criterion: int, passed: bool, detail: str = ""):
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
    VERDICTS[criterion] = line
    print(line)


@pytest.fixture
def configs_dir():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
