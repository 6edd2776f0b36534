import numpy as np
import pytest

from bellsim import Behavior, LhvModel, TaggedJoint, Variable


def random_joint(rng, n_vars=None, max_domain=3, label=""):
    n = int(n_vars) if n_vars is not None else int(rng.integers(2, 4))
    sizes = [int(s) for s in rng.integers(2, max_domain + 1, size=n)]
    free = [Variable(f"v{i}", tuple(range(s))) for i, s in enumerate(sizes)]
    w = rng.random(tuple(sizes)) + 1e-3
    return TaggedJoint(free, w / w.sum(), (), label)


def random_behavior(rng, nx=2, ny=2):
    w = rng.random((nx, ny, 2, 2))
    w /= w.sum(axis=(2, 3), keepdims=True)
    return Behavior(tuple(range(nx)), tuple(range(ny)), w)


def _nested(arr):
    return tuple(tuple(tuple(float(v) for v in row) for row in mat) for mat in arr)


def random_lhv(rng, n_lambda=4, nx=2, ny=2):
    prior = rng.random(n_lambda) + 1e-3
    prior /= prior.sum()
    ra = rng.random((nx, n_lambda, 2))
    ra /= ra.sum(axis=2, keepdims=True)
    rb = rng.random((ny, n_lambda, 2))
    rb /= rb.sum(axis=2, keepdims=True)
    return LhvModel(tuple(range(n_lambda)), tuple(float(p) for p in prior), _nested(ra), _nested(rb))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
