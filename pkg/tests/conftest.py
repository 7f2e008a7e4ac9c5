import numpy as np
import pytest

from wdro.checks import random_spd


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spd(rng):
    def make(d):
        return random_spd(d, rng)

    return make
