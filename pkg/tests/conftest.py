import numpy as np
import pytest

from caoscam.forward import SimConfig
from caoscam.walsh import WalshCodebook

_ACCEPTANCE = []


@pytest.fixture
def small_cfg():
    """K=64-scale chain: 4 carrier cycles in 64 samples per bit."""
    return SimConfig(cycles_per_bit=4, samples_per_bit=64)


@pytest.fixture
def book63():
    return WalshCodebook.for_pixels(63, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    """Record one acceptance line; printed in the terminal summary."""
    def _record(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, passed, detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
