import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from permkit.dataset import DataSet
from permkit.permutation import external_pivots
from permkit.spaces import Space

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Four pivots and four points in the plane whose induced permutations and
# neighbour order make a compact worked example.
FOUR_PIVOTS = np.array([[0.0, 6.0], [5.0, 4.0], [7.0, 8.0], [7.0, 1.0]])
FOUR_POINTS = np.array([[1.5, 5.0], [0.5, 2.0], [4.0, 10.0], [3.0, 0.0]])  # a, b, c, d
A, B, C, D = range(4)


@pytest.fixture
def four_points():
    space = Space("l2")
    return space, external_pivots(DataSet.dense(FOUR_PIVOTS)), DataSet.dense(FOUR_POINTS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uniform(n, dim, seed):
    return DataSet.dense(np.random.default_rng(seed).random((n, dim)))
