import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, c, N):
    return rng.dirichlet(np.ones(c), size=N).T
