import numpy as np
import pytest

from driftbench.windows import Window


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_window(rng, n, d=2, labeled=False) -> Window:
    return Window(rng.normal(size=(n, d)), np.sort(rng.uniform(0, 1, n)), labeled)


@pytest.fixture
def make_window():
    return random_window
