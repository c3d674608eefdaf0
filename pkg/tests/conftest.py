import warnings

import numpy as np
import pytest

from inflab.eigen import solve_alpha, solve_eigen
from inflab.grid import Grid1D, LogDensity
from inflab.model import SelectionSpec


def gaussian(grid, mean=0.0, var=1.0):
    """Normalized ``N(mean, var)`` as a LogDensity."""
    return LogDensity.from_function(
        grid, lambda x: (x - mean) ** 2 / (2 * var) + 0.5 * np.log(2 * np.pi * var)
    )


def _solve(m, grid, **kw):
    a = solve_alpha(m.beta)
    f0 = LogDensity.from_function(grid, lambda x: 0.5 * a * x**2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_eigen(m, f0, **kw)


@pytest.fixture(scope="session")
def grid_small():
    return Grid1D.symmetric(10, 513)


@pytest.fixture(scope="session")
def quad_eigen_small(grid_small):
    return _solve(SelectionSpec.quadratic(1.0), grid_small, tol=1e-13)


@pytest.fixture(scope="session")
def quartic_eigen_small(grid_small):
    m = SelectionSpec.even_polynomial([0, 0, 0.5, 0, 0.25], grid=grid_small)
    return _solve(m, grid_small, tol=1e-13)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
