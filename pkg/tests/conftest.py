import numpy as np
import pytest

from amgcoarsen import backend


@pytest.fixture(params=backend.available_backends())
def kernel_backend(request):
    """Run a test once per available kernel backend."""
    previous = backend.backend_name()
    backend.set_backend(request.param)
    yield request.param
    backend.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def random_symmetric_matrix(rng, n, density=0.3):
    """Random structurally symmetric operator with positive diagonal."""
    from amgcoarsen import sparse

    a = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    a = a + a.T
    np.fill_diagonal(a, np.abs(a).sum(axis=1) + rng.random(n) + 0.5)
    return sparse.from_dense(a)
