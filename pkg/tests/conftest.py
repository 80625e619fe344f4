import numpy as np
import pytest

from jumpctl.insurance import SurplusModel


@pytest.fixture
def model():
    return SurplusModel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
