import numpy as np
import pytest

from bsinfer.bsdist import SinhNormalParams, sn_sample
from bsinfer.model import Dataset
from bsinfer.utils import derive_stream


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run long Monte Carlo reproductions')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return

    skip_slow = pytest.mark.skip(reason='needs --runslow')

    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def simulate_dataset(n: int, beta, alpha: float, seed: int) -> Dataset:
    """Intercept plus ``U(0, 1)`` covariates, response drawn from the model."""
    beta = np.asarray(beta, dtype=float)
    rng = derive_stream(seed, 0)
    X = np.column_stack([np.ones(n), rng.uniform(size=(n, len(beta) - 1))])
    y = X @ beta + sn_sample(SinhNormalParams(alpha=alpha), n, derive_stream(seed, 1))
    return Dataset(y, X)


@pytest.fixture
def rng():
    return derive_stream(20240601)


@pytest.fixture
def small_data():
    return simulate_dataset(30, [1.0, 1.0, 1.0], 0.5, seed=7)


@pytest.fixture
def medium_data():
    return simulate_dataset(40, [1.0, 1.0, 1.0, 1.0, 0.0, 0.0], 0.5, seed=11)
