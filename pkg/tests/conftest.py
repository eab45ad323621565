import numpy as np
import pytest

from sparsedp.dataio import Dataset, synthesize_classification, synthesize_regression
from sparsedp.numkit import Rng


@pytest.fixture
def small_regression():
    ds, theta = synthesize_regression(Rng(11), 100, 5, noise_std=0.5, condition_target=2.0)
    return ds, theta


@pytest.fixture
def small_classification():
    ds, theta = synthesize_classification(Rng(12), 80, 4, flip_prob=0.1)
    return ds, theta


def make_dataset(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return Dataset(x, np.asarray(y, dtype=float), [f"x{j}" for j in range(x.shape[1])])


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line[1])
