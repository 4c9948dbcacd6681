import numpy as np
import pytest


def random_stable(rng, n, margin=0.3):
    """Random dense matrix shifted so its spectral abscissa is ``-margin``."""
    M = rng.standard_normal((n, n)) / np.sqrt(n)
    return M - (np.max(np.linalg.eigvals(M).real) + margin) * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
