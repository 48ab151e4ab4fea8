import numpy as np
import pytest

from featuresort.config import TrackerConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tracker_cfg():
    return TrackerConfig(embedding_dim=8)
