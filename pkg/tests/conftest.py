import numpy as np
import pytest

from sshape.core import RegressionData

TIE_X = np.array([0.0, 1 / 3, 2 / 3, 1.0])
TIE_Y = np.array([0.0, 0.5, 0.5, 1.0])
TIE_CONCAVE = np.array([0.0, 5 / 12, 2 / 3, 11 / 12])
TIE_CONVEX = np.array([1 / 12, 1 / 3, 7 / 12, 1.0])


@pytest.fixture
def tie4():
    return RegressionData(TIE_X, TIE_Y)


def random_design(rng, n):
    """Strictly increasing, not equally spaced."""
    return np.cumsum(rng.uniform(0.05, 1.0, n))


def random_data(rng, n, kind="gauss"):
    x = random_design(rng, n)
    if kind == "gauss":
        y = rng.standard_normal(n)
    else:
        y = np.tanh(3 * (x - x.mean()) / (x[-1] - x[0] + 1e-9)) + 0.3 * rng.standard_normal(n)
    return RegressionData(x, y)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def report(key, passed, detail):
    ACCEPTANCE[key] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
