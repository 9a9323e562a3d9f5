import numpy as np
import pytest

from pch.core_stats import Dataset


def random_design(rng, n=400, p=5, hetero=True):
    Z = rng.choice([1.0, 2.0, 3.0], size=(n, p), p=[0.6, 0.2, 0.2])
    Z = Z - Z.mean(axis=0)
    scale = 1.0 + (np.abs(Z[:, 0]) if hetero else 0.0)
    return Z, scale


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset(rng):
    Z, scale = random_design(rng, n=300, p=4)
    X = Z @ np.array([0.5, 0.3, 0.0, 0.2]) + scale * rng.standard_normal(300)
    Y = 0.4 * X + Z @ np.array([0.0, 0.0, 0.3, 0.0]) + rng.standard_normal(300)
    return Dataset.from_arrays(X, Y, Z)


ACCEPTANCE_LINES = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
