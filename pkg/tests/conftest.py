import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sigsep import PiecewiseLinearPath, SignalEnsemble


def random_path(rng, d=None, n=None, scale=1.0):
    d = d if d is not None else int(rng.integers(1, 5))
    n = n if n is not None else int(rng.integers(2, 11))
    times = np.sort(rng.random(n))
    while np.any(np.diff(times) <= 1e-9) or times[-1] - times[0] < 0.1:
        times = np.sort(rng.random(n))
    values = rng.normal(scale=scale, size=(n, d))
    return PiecewiseLinearPath(times, values)


def random_ensemble(rng, d=2, n_paths=5, n_vertices=6, scale=1.0):
    paths = tuple(random_path(rng, d, n_vertices, scale) for _ in range(n_paths))
    w = rng.random(n_paths) + 0.1
    return SignalEnsemble(paths, w / w.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
