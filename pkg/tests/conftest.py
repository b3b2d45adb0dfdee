import numpy as np
import pytest

from dbdp.schemes import TrainConfig


@pytest.fixture
def tiny_train():
    """A few-iteration training config for plumbing tests."""
    return TrainConfig(batch_size=64, iters_first=40, iters_later=15, holdout_factor=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
