import numpy as np
import pytest

from dualnorm import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile (or load from cache) every jit kernel once so timed tests
    # measure compute, not compilation.
    kernels.warmup(np.float32)
    kernels.warmup(np.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
