import numpy as np
import pytest

from multimin.core import BoxDomain, EvaluatedDesign, RandomStream, lhs_sample
from multimin.objectives import lookup
from multimin.surrogate import KrigingConfig, fit


@pytest.fixture(scope="session")
def branin_model():
    fn, _ = lookup("Branin", 2)
    X = lhs_sample(fn.domain, 30, RandomStream(11))
    design = EvaluatedDesign(X, fn.evaluator(X), fn.domain)
    return design, fit(design, KrigingConfig(), RandomStream(12))


@pytest.fixture(scope="session")
def hartmann_model():
    fn, _ = lookup("Hartmann", 3)
    X = lhs_sample(fn.domain, 30, RandomStream(21))
    design = EvaluatedDesign(X, fn.evaluator(X), fn.domain)
    return design, fit(design, KrigingConfig(), RandomStream(22))


@pytest.fixture
def unit_square():
    return BoxDomain.cube(0.0, 1.0, 2)


def central_difference(f, x, h):
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h[k] if np.ndim(h) else h
        g[k] = (f(x + e) - f(x - e)) / (2 * e[k])
    return g
