import sys
from pathlib import Path

import numpy as np
import pytest

from tsxplain import knn_fit, linear_fit, make_synthetic, train_test_split
from tsxplain.models import ModelHandle

FIXTURES = Path(__file__).parent / "fixtures"
STDIO_FIXTURE = FIXTURES / "stdio_fixture.py"


def fixture_cmd(mode, *args):
    return [sys.executable, str(STDIO_FIXTURE), mode, *map(str, args)]


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class FnModel(ModelHandle):
    """Two-class model from a function ``batch -> p(class 1)``."""

    def __init__(self, p1):
        super().__init__(2)
        self.p1 = p1

    def predict_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[None]
        p = self.p1(X)
        return np.stack([1 - p, p], axis=1)


class ConstantModel(ModelHandle):
    def predict_batch(self, X):
        X = np.asarray(X)
        n = 1 if X.ndim == 2 else len(X)
        return np.full((n, self.n_classes), 1.0 / self.n_classes)


def interval_model(lo=10, hi=20, thresh=1.0, gain=4.0):
    """Only the mean of channel 0 over ``[lo, hi)`` matters."""
    return FnModel(lambda X: sigmoid(gain * (X[:, :, lo:hi].mean(axis=(1, 2)) - thresh)))


def channel0_model(thresh=0.5, gain=6.0):
    """Reads nothing but the mean of channel 0."""
    return FnModel(lambda X: sigmoid(gain * (X[:, 0].mean(axis=1) - thresh)))


@pytest.fixture(scope="session")
def bump_split():
    return train_test_split(make_synthetic("bump_uni", 200, 1, 50, seed=1), 50)


@pytest.fixture(scope="session")
def multi_split():
    return train_test_split(make_synthetic("channel_multi", 200, 3, 50, seed=1), 50)


@pytest.fixture(scope="session")
def bump_knn(bump_split):
    return knn_fit(bump_split[0], 1)


@pytest.fixture(scope="session")
def multi_knn(multi_split):
    return knn_fit(multi_split[0], 1)


@pytest.fixture(scope="session")
def multi_linear(multi_split):
    return linear_fit(multi_split[0])
