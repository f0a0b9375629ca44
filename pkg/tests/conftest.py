import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, scale=1.0):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return scale * 0.5 * (g + g.conj().T)


def random_state(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    w = g @ g.conj().T
    return w / np.trace(w).real
