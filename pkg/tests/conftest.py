import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mpresb.fem import build_mesh, build_system  # noqa: E402


@pytest.fixture(scope="session")
def problem_factory():
    cache = {}

    def make(dim=2, k=3, nu=1e-2, omega=10.0):
        key = (dim, k, nu, omega)
        if key not in cache:
            cache[key] = build_system(build_mesh(dim, 2.0**-k), nu, omega)
        return cache[key]

    return make


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240607)
