"""Quality measures for a found set of minima against the known set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class MetricRecord:
    pr: float
    ahd: float
    l: int
    h: int


def chebyshev(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def peak_ratio(l: int, h: int) -> float:
    """Found count over true count.  Values above 1 flag an overfitted surrogate."""
    if h < 1:
        raise ValueError("h must be >= 1")
    if l < 0:
        raise ValueError("l must be >= 0")
    return l / h


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("point sets must be non-empty")
    return X


def ahd(U, S, r: float = 1.0) -> float:
    """Averaged Hausdorff distance of order ``r`` between point sets ``U`` and ``S``.

    The larger of the two power means of Euclidean nearest-neighbour
    distances, U to S and S to U.  1-d inputs are read as sets of scalars.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    U, S = _as_points(U), _as_points(S)
    if U.shape[1] != S.shape[1]:
        raise ValueError("point sets differ in dimension")
    d = cdist(U, S)
    forward = np.mean(d.min(axis=1) ** r) ** (1.0 / r)
    backward = np.mean(d.min(axis=0) ** r) ** (1.0 / r)
    return float(max(forward, backward))


def evaluate_set(found, known, r: float = 1.0) -> MetricRecord:
    """PR and AHD for found representatives ``found`` vs known minima ``known``.

    AHD is NaN when nothing was found.
    """
    known = _as_points(known)
    found = np.asarray(found, dtype=float)
    l = 0 if found.size == 0 else found.reshape(-1, known.shape[1]).shape[0]
    h = known.shape[0]
    dist = ahd(found.reshape(-1, known.shape[1]), known, r) if l else float("nan")
    return MetricRecord(peak_ratio(l, h), dist, l, h)
