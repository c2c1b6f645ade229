import numpy as np
import pytest

from bregpr.stft import make_plan


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_plan():
    # T=16, H=8: N=7 frames, 64 padded samples
    return make_plan(48, win_len=16)


@pytest.fixture(autouse=True)
def _quiet_numpy():
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        yield


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
