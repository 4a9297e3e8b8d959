import numpy as np
import pytest

from proxmkl.kernels import GramMatrix, GramStack


def rand_pd_gram(rng, n, cond=4.0):
    """Well-conditioned random PD matrix wrapped as a Gram fixture."""
    A = rng.normal(size=(n, n))
    K = A @ A.T / n + np.eye(n) / cond
    return GramMatrix.from_values(K)


def rand_stack(rng, n, m):
    return GramStack([rand_pd_gram(rng, n) for _ in range(m)])


def identity_gram(n):
    return GramMatrix.from_values(np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
