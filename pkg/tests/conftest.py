import numpy as np
import pytest

from rmtlab.ensemble import gaussian_ensemble


@pytest.fixture
def goe50():
    return gaussian_ensemble(50, 1, 11)


@pytest.fixture
def gue30():
    return gaussian_ensemble(30, 2, 12)


def rel_close(a, b, tol):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b)) <= tol * max(1.0, np.max(np.abs(b)))
