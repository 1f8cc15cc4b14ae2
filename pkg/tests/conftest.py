import functools

import numpy as np
import pytest

from graphsampling.graph import build_laplacian, community_sizes, gen_community, gen_cycle
from graphsampling.spectral import partial_eigendecomposition

# fixed instance used across decoder and estimation tests
C5_SEED = 1


@functools.lru_cache(maxsize=None)
def community(graph_type: int, seed: int = C5_SEED):
    g = gen_community(community_sizes(graph_type), seed=seed)
    return g, build_laplacian(g)


@functools.lru_cache(maxsize=None)
def community_basis(graph_type: int, k: int, seed: int = C5_SEED):
    _, L = community(graph_type, seed)
    return partial_eigendecomposition(L, k)


@pytest.fixture(scope="session")
def c5():
    g, L = community(5)
    return g, L, community_basis(5, 10)


@pytest.fixture(scope="session")
def cycle100():
    L = build_laplacian(gen_cycle(100))
    return L, partial_eigendecomposition(L, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
