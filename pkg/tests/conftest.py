import numpy as np
import pytest

from contentwur.system import SystemSpec


def make_spec(a, q, r, eps=None, h=None, name="test"):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    n = r.shape[0]
    h = np.eye(n) if h is None else np.atleast_2d(np.asarray(h, dtype=float))
    eps = np.zeros(n) if eps is None else np.atleast_1d(np.asarray(eps, dtype=float))
    return SystemSpec(a, h, q, r, eps, name=name)


@pytest.fixture
def scalar_spec():
    return make_spec([[0.9]], [[1.0]], [[1.0]], [0.04])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
