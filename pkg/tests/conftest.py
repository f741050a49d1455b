import pytest

from dynamics_engine import TimeGrid
from node_model import NodeConfig

OPTIMAL_RATIOS = (1.88, 2.94, 7.92)


@pytest.fixture
def optimal_n3():
    """The time-symmetric three-ring node, in units of g"""
    return NodeConfig.from_ratios(OPTIMAL_RATIOS)


@pytest.fixture
def default_grid():
    return TimeGrid()


@pytest.fixture
def coarse_grid():
    return TimeGrid(0.0, 20.0, 1024)
