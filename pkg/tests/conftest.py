import numpy as np
import pytest

from unist.engine import dtype_scope


@pytest.fixture
def f64():
    """Run the enclosed test with the engine in float64."""
    with dtype_scope(np.float64):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
