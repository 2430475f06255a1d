from pathlib import Path

import numpy as np
import pytest

from dilab.grid import ComplexField, build_grid

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def gaussian(grid, sigma=1.0, shift=0.0, k=0.0):
    x1 = grid.mesh[0]
    r2 = grid.radius**2 - x1**2 + (x1 - shift) ** 2
    return ComplexField(grid, np.exp(-r2 / (2 * sigma**2)) * np.exp(2j * np.pi * k * x1))


@pytest.fixture
def line():
    return build_grid("cartesian", 1, 20.0, 256)


@pytest.fixture
def configs():
    return CONFIGS


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
