"""Box domains, seeded random streams and Latin Hypercube sampling.

Every random draw in the package goes through :class:`RandomStream`, which
wraps numpy's PCG64 bit generator.  Sub-streams are derived with a
splitmix64 mix of the parent seed and a stable hash of a key, so a stream
for ``("fit", 3)`` is the same no matter which worker asks for it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1


class DomainError(ValueError):
    """A point lies outside the box it is used with."""


def splitmix64(value: int) -> int:
    """One round of the splitmix64 finalizer on a 64-bit integer."""
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stable_hash(key) -> int:
    """64-bit hash of ``repr(key)`` that does not depend on PYTHONHASHSEED."""
    digest = hashlib.blake2b(repr(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *keys) -> int:
    """Mix a seed with any number of keys into a new 64-bit seed."""
    state = seed & MASK64
    for key in keys:
        if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
            word = int(key) & MASK64
        else:
            word = stable_hash(key)
        state = splitmix64(state ^ splitmix64(word))
    return state


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lower, upper]`` in R^p."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-d vectors of equal length >= 1")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("need lower[j] < upper[j] on every axis")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, low: float, high: float, p: int) -> "BoxDomain":
        return cls(np.full(p, float(low)), np.full(p, float(high)))

    @property
    def p(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def check(self, x) -> np.ndarray:
        """Return ``x`` as a float array, raising DomainError if it leaves the box."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.p:
            raise DomainError(f"expected {self.p} coordinates, got {x.shape[-1]}")
        if not self.contains(x):
            raise DomainError(f"point {x} outside domain [{self.lower}, {self.upper}]")
        return x


def normalize(domain: BoxDomain, x) -> np.ndarray:
    """Map points of ``domain`` affinely onto the unit cube."""
    x = domain.check(x)
    return np.clip((x - domain.lower) / domain.width, 0.0, 1.0)


def denormalize(domain: BoxDomain, z) -> np.ndarray:
    """Inverse of :func:`normalize`."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != domain.p:
        raise DomainError(f"expected {domain.p} coordinates, got {z.shape[-1]}")
    if np.any(z < 0.0) or np.any(z > 1.0):
        raise DomainError(f"point {z} outside the unit cube")
    return np.clip(domain.lower + z * domain.width, domain.lower, domain.upper)


@dataclass
class RandomStream:
    """Seeded PCG64 stream with keyed, order-independent child streams."""

    seed: int
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.seed = int(self.seed) & MASK64
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, *keys) -> "RandomStream":
        """Independent sub-stream; depends on the seed and keys only, not on prior draws."""
        return RandomStream(derive_seed(self.seed, *keys))

    def random(self, size=None):
        return self.generator.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)


def lhs_sample(domain: BoxDomain, n: int, stream: RandomStream) -> np.ndarray:
    """Randomized Latin Hypercube Sample of ``n`` points, shape ``(n, p)``.

    For each axis in turn the stream supplies a permutation of the ``n``
    strata and then ``n`` uniform offsets within the strata.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    z = np.empty((n, domain.p))
    for j in range(domain.p):
        strata = stream.permutation(n)
        jitter = stream.random(n)
        z[:, j] = (strata + jitter) / n
    return denormalize(domain, np.minimum(z, 1.0))


@dataclass(frozen=True)
class EvaluatedDesign:
    """Design points with their responses and the incumbent best."""

    X: np.ndarray
    y: np.ndarray
    domain: BoxDomain

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.size or y.size < 1:
            raise ValueError("X and y must hold the same positive number of rows")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        if X.shape[1] != self.domain.p or not self.domain.contains(X):
            raise DomainError("design points must lie inside the domain")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def incumbent_index(self) -> int:
        return int(np.argmin(self.y))

    @property
    def incumbent_value(self) -> float:
        return float(self.y[self.incumbent_index])

    @property
    def incumbent_point(self) -> np.ndarray:
        return self.X[self.incumbent_index]

    def extend(self, x, y: float) -> "EvaluatedDesign":
        return EvaluatedDesign(np.vstack([self.X, x]), np.append(self.y, y), self.domain)
