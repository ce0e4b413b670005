import sys

import numpy as np
import pytest

from vortassim.spectral import build_mode_grid


def square_grid(n, L=2 * np.pi):
    return build_mode_grid(n, n, L, L)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid4():
    return square_grid(4)


@pytest.fixture
def grid8():
    return square_grid(8)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: (int(k.split("-")[0]), k)):
        terminalreporter.write_line(mod.RESULTS[key])
