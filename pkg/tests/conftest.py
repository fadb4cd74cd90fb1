import numpy as np
import pytest

from jointdiag.ensemble_gen import circular_gaussian, generate
from jointdiag.objective import TransformedEnsemble


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noisy_point(rng):
    """A 30 dB ensemble viewed through a random well-conditioned basis."""
    gt = generate(5, 3, 30, 7)
    U = np.eye(5) + 0.3 * circular_gaussian(rng, (5, 5))
    return TransformedEnsemble.at(gt.noisy, U)


def unit(rng, n):
    Z = circular_gaussian(rng, (n, n))
    return Z / np.linalg.norm(Z)
