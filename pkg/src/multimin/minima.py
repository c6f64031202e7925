"""Locate the local minima of a smooth field by multistart descent."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from multimin.core import BoxDomain, RandomStream, lhs_sample
from multimin.optim import DescentOptions, DescentResult, NumericFailure, minimize

# no relative-decrease stop: a start on a near-flat plateau must keep moving
# until the gradient test or a line-search stall ends it; short steps keep
# each descent in the basin it started in
EXTRACT_DESCENT = DescentOptions(ftol=0.0, max_step=0.02)


def sample_size(p: int) -> int:
    """Number of descent starts for a ``p``-dimensional domain: 200 ** log3(p + 2), rounded."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return int(round(200.0 ** (math.log(p + 2) / math.log(3))))


@dataclass
class Extraction:
    """Kept descent results plus counts of what was thrown away."""

    results: list[DescentResult] = field(default_factory=list)
    skipped_boundary: int = 0
    not_converged: int = 0

    def __len__(self):
        return len(self.results)

    def __iter__(self):
        return iter(self.results)


@dataclass(frozen=True)
class Cluster:
    representative: np.ndarray
    value: float
    members: int


@dataclass(frozen=True)
class MinimaSet:
    clusters: tuple[Cluster, ...]
    skipped_boundary: int = 0
    raw_converged: int = 0

    @property
    def count(self) -> int:
        return len(self.clusters)

    @property
    def points(self) -> np.ndarray:
        if not self.clusters:
            return np.empty((0, 0))
        return np.array([c.representative for c in self.clusters])

    @property
    def values(self) -> np.ndarray:
        return np.array([c.value for c in self.clusters])


def extract(
    field,
    domain: BoxDomain,
    n: int,
    stream: RandomStream,
    opts: DescentOptions = EXTRACT_DESCENT,
    boundary_tol: float = 1e-6,
    stationarity_tol: float = 1e-5,
) -> Extraction:
    """Descend from an LHS of ``n`` starts and keep interior stationary endpoints.

    An endpoint is dropped as a boundary hit when any coordinate lies within
    ``boundary_tol * (upper - lower)`` of a bound, and as non-converged when
    its projected gradient (unit-cube coordinates) exceeds
    ``stationarity_tol * (1 + |f|)``.
    """
    starts = lhs_sample(domain, n, stream)
    margin = boundary_tol * domain.width
    out = Extraction()
    for x0 in starts:
        try:
            res = minimize(field, x0, domain, opts)
        except NumericFailure:
            out.not_converged += 1
            continue
        if np.any(res.x - domain.lower <= margin) or np.any(domain.upper - res.x <= margin):
            out.skipped_boundary += 1
        elif not res.stationary(stationarity_tol):
            out.not_converged += 1
        else:
            out.results.append(res)
    return out


def _single_linkage(X: np.ndarray, delta: float) -> np.ndarray:
    """Component labels for the graph linking points at Chebyshev distance <= delta.

    Points sharing a grid cell of side delta/2 are always linked, so the
    search runs over occupied cells; neighbouring cells are merged only after
    an exact nearest-member check.
    """
    cells = np.floor(X / (0.5 * delta)).astype(np.int64)
    _, cell_of, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    cell_of = cell_of.reshape(-1)
    order = np.argsort(cell_of, kind="stable")
    members = np.split(order, np.cumsum(counts)[:-1])
    anchors = X[[m[0] for m in members]]
    parent = np.arange(len(members))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    trees = {}
    for a, b in cKDTree(anchors).query_pairs(2.0 * delta, p=np.inf):
        ra, rb = root(a), root(b)
        if ra == rb:
            continue
        if a not in trees:
            trees[a] = cKDTree(X[members[a]])
        d, _ = trees[a].query(X[members[b]], k=1, p=np.inf)
        if np.min(d) <= delta:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([root(i) for i in range(len(members))])
    return roots[cell_of]


def agglomerate(results, delta: float = 0.001) -> MinimaSet:
    """Single-linkage clustering of descent endpoints under Chebyshev distance.

    Two endpoints share a cluster when a chain of hops no longer than
    ``delta`` joins them.  Each cluster is represented by its lowest-valued
    member; clusters come back sorted by value.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    skipped = getattr(results, "skipped_boundary", 0)
    items = list(results)
    if not items:
        return MinimaSet((), skipped, 0)
    X = np.array([np.atleast_1d(r.x) for r in items], dtype=float)
    f = np.array([r.f for r in items], dtype=float)
    labels = _single_linkage(X, delta)
    clusters = []
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        best = idx[np.argmin(f[idx])]
        clusters.append(Cluster(X[best].copy(), float(f[best]), idx.size))
    clusters.sort(key=lambda c: (c.value, tuple(c.representative)))
    return MinimaSet(tuple(clusters), skipped, len(items))
