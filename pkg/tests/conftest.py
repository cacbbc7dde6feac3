import numpy as np
import pytest
from hypothesis import settings

from gtslln.hedges import DiscreteMeasure, LaplaceMeasure, ParetoMeasure, PowerHedge
from gtslln.strategies import CountableHedgeContext, MZContext, SingleHedgeContext

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def three_point():
    return DiscreteMeasure.uniform([-2.0, 0.0, 2.0])


@pytest.fixture(scope="session")
def laplace():
    return LaplaceMeasure(1.0)


@pytest.fixture(scope="session")
def pareto():
    return ParetoMeasure(1.5, 1.0)


@pytest.fixture
def single_ctx(three_point):
    return SingleHedgeContext.from_measure(PowerHedge(2.0), three_point)


@pytest.fixture
def countable_ctx(laplace):
    return CountableHedgeContext.from_measure(laplace)


@pytest.fixture
def mz_ctx(laplace):
    return MZContext.from_measure(laplace, 1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
