"""Benchmark objectives and their tabulated local minima.

All evaluators are vectorized: they take an ``(m, p)`` array and return
``m`` values.  The minima tables live in ``data/minima.csv`` and are read
once on first use.
"""

from __future__ import annotations

import csv
import functools
import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from multimin.core import BoxDomain, DomainError


class BoundaryStepError(ValueError):
    """A finite-difference step would leave the domain."""


@dataclass(frozen=True)
class KnownMinima:
    points: np.ndarray
    values: np.ndarray

    @property
    def count(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ObjectiveFunction:
    name: str
    domain: BoxDomain
    evaluator: Callable[[np.ndarray], np.ndarray]

    @property
    def dim(self) -> int:
        return self.domain.p

    @property
    def label(self) -> str:
        return f"{self.name}.{self.dim}"

    def __call__(self, x):
        return evaluate(self, x)


def alpine02(X):
    return -np.prod(np.sqrt(X) * np.sin(X), axis=1)


def branin(X):
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    t = 1.0 / (8.0 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


def cosine_mixture(X):
    return -0.1 * np.sum(np.cos(5.0 * np.pi * X), axis=1) + np.sum(X**2, axis=1)


def himmelblau(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (x1**2 + x2 - 11.0) ** 2 + (x1 + x2**2 - 7.0) ** 2


_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN3_A = np.array(
    [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]]
)
_HARTMANN3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def _hartmann(A, P):
    def f(X):
        inner = np.sum(A[None, :, :] * (X[:, None, :] - P[None, :, :]) ** 2, axis=2)
        return -np.exp(-inner) @ _HARTMANN_ALPHA

    return f


_SHEKEL_BETA = 0.1 * np.array([1, 2, 2, 4, 4, 6, 3, 7, 5, 5], dtype=float)
_SHEKEL_C = np.array(
    [
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
    ]
).T


def _shekel(m):
    C, beta = _SHEKEL_C[:m], _SHEKEL_BETA[:m]

    def f(X):
        sq = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
        return -np.sum(1.0 / (sq + beta), axis=1)

    return f


def _modified_rastrigin(k):
    k = np.asarray(k, dtype=float)

    def f(X):
        return np.sum(10.0 * (1.0 + np.cos(2.0 * np.pi * k * X)) + 2.0 * k * X**2, axis=1)

    return f


def _build():
    fns = []
    for p in (1, 2, 3):
        fns.append(ObjectiveFunction("Alpine02", BoxDomain.cube(0, 10, p), alpine02))
    fns.append(ObjectiveFunction("Branin", BoxDomain([-5.0, 0.0], [10.0, 15.0]), branin))
    for p in (1, 2, 3):
        fns.append(ObjectiveFunction("CosineMix", BoxDomain.cube(-1, 1, p), cosine_mixture))
    fns.append(ObjectiveFunction("Hartmann", BoxDomain.cube(0, 1, 3), _hartmann(_HARTMANN3_A, _HARTMANN3_P)))
    fns.append(ObjectiveFunction("Hartmann", BoxDomain.cube(0, 1, 6), _hartmann(_HARTMANN6_A, _HARTMANN6_P)))
    fns.append(ObjectiveFunction("Himmelblau", BoxDomain.cube(-5, 5, 2), himmelblau))
    fns.append(ObjectiveFunction("modRastrigin", BoxDomain.cube(0, 1, 4), _modified_rastrigin([2, 2, 3, 4])))
    fns.append(
        ObjectiveFunction(
            "modRastrigin", BoxDomain.cube(0, 1, 8), _modified_rastrigin([1, 2, 1, 2, 1, 3, 1, 4])
        )
    )
    for m in (5, 7, 10):
        fns.append(ObjectiveFunction(f"Shekel{m}", BoxDomain.cube(0, 10, 4), _shekel(m)))
    return fns


def _read_minima():
    table: dict[tuple[str, int], list[tuple[list[float], float]]] = {}
    with resources.files("multimin").joinpath("data/minima.csv").open("r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            dim = int(row["dim"])
            x = [float(row[f"x{j}"]) for j in range(1, dim + 1)]
            table.setdefault((row["function"], dim), []).append((x, float(row["y"])))
    return table


@functools.lru_cache(maxsize=None)
def registry() -> tuple[tuple[ObjectiveFunction, KnownMinima], ...]:
    """All benchmark functions paired with their tabulated minima, in table order."""
    table = _read_minima()
    out = []
    for fn in _build():
        rows = table[(fn.name, fn.dim)]
        known = KnownMinima(
            np.array([r[0] for r in rows], dtype=float), np.array([r[1] for r in rows], dtype=float)
        )
        out.append((fn, known))
    return tuple(out)


def _canonical(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", name.lower())


def lookup(name: str, dim: int) -> tuple[ObjectiveFunction, KnownMinima]:
    """Find a registry entry by name and dimension.

    Names compare case-insensitively with punctuation ignored, so
    ``"Shekel.10"``, ``"shekel-10"`` and ``"Shekel10"`` are the same entry.
    """
    key = _canonical(name)
    matches = [(fn, km) for fn, km in registry() if _canonical(fn.name) == key]
    for fn, km in matches:
        if fn.dim == dim:
            return fn, km
    known = sorted({f"{fn.name} (dim {fn.dim})" for fn, _ in registry()})
    raise KeyError(f"unknown function {name!r} with dim {dim}; choose one of: {', '.join(known)}")


def evaluate(fn: ObjectiveFunction, x):
    """Evaluate ``fn`` at one point (returns a float) or a batch (returns an array)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    fn.domain.check(X)
    values = fn.evaluator(X)
    return float(values[0]) if single else values


def numerical_gradient(fn: ObjectiveFunction, x, h: float = 1e-6, one_sided_at_bounds: bool = False):
    """Central-difference gradient with per-axis step ``h * (upper - lower)``.

    Raises BoundaryStepError when a step would leave the domain, unless
    ``one_sided_at_bounds`` is set, in which case such axes fall back to a
    one-sided difference.
    """
    x = fn.domain.check(np.asarray(x, dtype=float).reshape(-1))
    p = x.size
    step = h * fn.domain.width
    lo_room = x - fn.domain.lower
    hi_room = fn.domain.upper - x
    near = (lo_room < step) | (hi_room < step)
    if np.any(near) and not one_sided_at_bounds:
        raise BoundaryStepError(f"point {x} is within one step of the boundary")
    plus = x + np.diag(step)
    minus = x - np.diag(step)
    # one-sided: collapse the offending side onto x itself
    plus[near & (hi_room < step), :] = x
    minus[near & (lo_room < step), :] = x
    values = fn.evaluator(np.vstack([plus, minus]))
    span = np.where(near, step, 2.0 * step)
    return (values[:p] - values[p:]) / span


def value_and_gradient(fn: ObjectiveFunction, h: float = 1e-6):
    """Field callback ``x -> (f(x), grad)`` for descent on a true objective."""

    def field(x):
        x = np.asarray(x, dtype=float)
        step = h * fn.domain.width
        p = x.size
        plus = np.minimum(x + step, fn.domain.upper)
        minus = np.maximum(x - step, fn.domain.lower)
        pts = np.empty((2 * p + 1, p))
        pts[0] = x
        pts[1 : p + 1] = x
        pts[p + 1 :] = x
        idx = np.arange(p)
        pts[1 + idx, idx] = plus
        pts[p + 1 + idx, idx] = minus
        v = fn.evaluator(pts)
        return float(v[0]), (v[1 : p + 1] - v[p + 1 :]) / (plus - minus)

    return field
