import os
import sys
from pathlib import Path

import numpy as np
import pytest

from depmine.data import Dataset, load_dataset

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
sys.path.insert(0, str(HERE))


@pytest.fixture(scope="session")
def heart():
    return load_dataset(FIXTURES / "heart_disease.csv")


@pytest.fixture(scope="session")
def comparison():
    return load_dataset(FIXTURES / "comparison.csv")


@pytest.fixture(scope="session")
def apple():
    return load_dataset(FIXTURES / "apple.csv")


def random_dataset(rng, n, k, density=0.5):
    mat = rng.random((n, k)) < density
    return Dataset.from_matrix(mat, [f"a{j}" for j in range(k)])


def counts_dataset(cells, names):
    """Dataset with cells[key] copies of the 0/1 row ``key``."""
    rows = []
    for key, c in cells.items():
        rows.extend([key] * c)
    return Dataset.from_matrix(np.array(rows, dtype=bool).reshape(-1, len(names)), names)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
