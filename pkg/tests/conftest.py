import numpy as np
import pytest

from pairlearn import Dataset, Kernel, make_loss


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_dataset(rng, n=20, d=2, signal=True):
    xs = rng.normal(size=(n, d))
    ys = rng.normal(size=n)
    if signal:
        ys = ys + xs[:, 0]
    return Dataset(xs, ys)


@pytest.fixture
def gaussian():
    return Kernel("gaussian_rbf", gamma=1.0)


DIFFERENTIABLE_FAMILIES = [
    ("mee", {"h": 1.0}),
    ("mee", {"h": 0.5}),
    ("logistic_pairwise", {"a": 1.0}),
    ("logistic_pairwise", {"a": 0.1}),
    ("squared", {}),
    ("ls_ranking", {}),
    ("logistic_ranking", {"a": 1.0}),
    ("logistic_ranking", {"a": 0.3}),
]

ALL_FAMILIES = DIFFERENTIABLE_FAMILIES + [
    ("absolute", {}),
    ("hinge_ranking", {}),
]


def build_loss(family, params):
    return make_loss(family, **params)
