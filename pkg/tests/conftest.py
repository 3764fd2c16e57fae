import numpy as np
import pytest
from hypothesis import settings

from nanorod.grid import build_grid
from nanorod.model import ModelParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def grid_default():
    return build_grid(-8, 8, -8, 8, 120, 120)


@pytest.fixture
def small_grid():
    return build_grid(-6, 6, -6, 6, 48, 48)


@pytest.fixture
def set1_params():
    return ModelParams(0.6, 0.4, -1.0, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
