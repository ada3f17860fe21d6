import numpy as np
import pytest

import allg


@pytest.fixture(scope="session")
def blobs_small():
    """60 samples, 3 tight classes in 4 dims."""
    return allg.make_blobs(20, 3, d=4, spread=0.8, seed=5)


@pytest.fixture(scope="session")
def blobs_std(blobs_small):
    std, mean, stdev = allg.standardize(blobs_small)
    return std


@pytest.fixture
def tiny_cfg():
    """Small but complete model config for fast training tests."""
    return allg.ModelConfig(
        encoder_dims=(4, 6, 3),
        pretrain_epochs=60,
        train_epochs=80,
        knn_k=4,
        seed=3,
    )


@pytest.fixture
def rng():
    # function-scoped so draws never depend on test execution order
    return np.random.default_rng(1234)
