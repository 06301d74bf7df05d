import numpy as np
import pytest

from mprtbench.data import generate_synthetic, subset
from mprtbench.engine.train import TrainConfig, train


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_synthetic(n_train=300, n_test=60, seed=0)


@pytest.fixture(scope="session")
def tiny_model(tiny_dataset):
    # 4 epochs trains well past chance on 300 samples; enough structure for
    # the attribution and randomisation tests without acceptance-scale cost.
    return train(TrainConfig(epochs=4), tiny_dataset, seed=5)


@pytest.fixture(scope="session")
def tiny_eval(tiny_dataset):
    return subset(tiny_dataset, n_train=0, n_test=8)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
