"""Infill criteria and the search that picks the next evaluation point.

``CriterionKind.score`` is oriented so that larger is always better: it is
the criterion itself for EI, SE and GEILM and the negated bound for LCB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from multimin.core import EvaluatedDesign, RandomStream, lhs_sample
from multimin.optim import DescentOptions, NumericFailure, minimize

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class ProposalFailure(RuntimeError):
    """No candidate produced a finite criterion value."""


def expected_improvement(mean, sd, best):
    """Expected improvement below ``best`` for a normal prediction.

    The zero-variance limit is ``max(best - mean, 0)``.
    """
    mean, sd = np.asarray(mean, dtype=float), np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("sd must be non-negative")
    gain = best - mean
    # huge |z| overflows z*z harmlessly: the density term is then exactly 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = np.where(sd > 0, gain / np.where(sd > 0, sd, 1.0), 0.0)
        ei = np.where(sd > 0, gain * ndtr(z) + sd * _INV_SQRT_2PI * np.exp(-0.5 * z * z), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def lcb(mean, sd, lam: float = 1.0):
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return mean - lam * np.asarray(sd)


def se(sd):
    return sd


def quantile_sd(best: float, y_max: float, p: float = 0.001) -> float:
    """Scale for which ``best`` sits ``Phi^{-1}(p)`` scales below ``y_max``.

    Floored at ``1e-8 * max(1, |best|)`` so a flat response range stays usable.
    """
    if not 0.0 < p < 0.5:
        raise ValueError("p must lie in (0, 0.5)")
    if best > y_max:
        raise ValueError("best must not exceed y_max")
    floor = 1e-8 * max(1.0, abs(best))
    return max((best - y_max) / ndtri(p), floor)


def geilm(mean, sd, grad, best: float, s_p: float, lam: float = 2.0):
    """Gradient enhanced inspection of local minima.

    ``sd * Phi((best - mean) / s_p) * lam * exp(-lam * |grad|_inf)``; ``grad``
    holds one gradient per row when ``mean`` is an array.
    """
    if s_p <= 0 or lam <= 0:
        raise ValueError("s_p and lambda must be positive")
    grad = np.asarray(grad, dtype=float)
    steep = np.max(np.abs(grad), axis=-1) if grad.ndim else abs(float(grad))
    return np.asarray(sd) * ndtr((best - np.asarray(mean)) / s_p) * lam * np.exp(-lam * steep)


@dataclass(frozen=True)
class CriterionKind:
    """Which infill criterion to use and its constants."""

    variant: str = "geilm"
    lam: float | None = None
    p: float = 0.001

    def __post_init__(self):
        variant = self.variant.lower()
        if variant not in ("ei", "lcb", "se", "geilm"):
            raise ValueError(f"unknown criterion {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        if self.lam is None:
            object.__setattr__(self, "lam", 2.0 if variant == "geilm" else 1.0)
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0.0 < self.p < 0.5:
            raise ValueError("p must lie in (0, 0.5)")

    @classmethod
    def ei(cls):
        return cls("ei")

    @classmethod
    def se(cls):
        return cls("se")

    @classmethod
    def lcb(cls, lam: float = 1.0):
        return cls("lcb", lam)

    @classmethod
    def geilm(cls, lam: float = 2.0, p: float = 0.001):
        return cls("geilm", lam, p)

    @property
    def needs_gradient(self) -> bool:
        return self.variant == "geilm"

    def context(self, evaluated: EvaluatedDesign) -> "CriterionContext":
        best = evaluated.incumbent_value
        y_max = float(np.max(evaluated.y))
        return CriterionContext(best, y_max, quantile_sd(best, y_max, self.p))

    def score(self, model, ctx: "CriterionContext", X) -> np.ndarray:
        X = np.atleast_2d(X)
        mean, sd = model.predict_many(X)
        if self.variant == "ei":
            return expected_improvement(mean, sd, ctx.best)
        if self.variant == "lcb":
            return -lcb(mean, sd, self.lam)
        if self.variant == "se":
            return se(sd)
        return geilm(mean, sd, model.mean_gradient_many(X), ctx.best, ctx.s_p, self.lam)


@dataclass(frozen=True)
class CriterionContext:
    best: float
    y_max: float
    s_p: float


# refinement runs on a noisy finite-difference gradient; loose stopping is enough
_REFINE = DescentOptions(max_iter=50, ftol=1e-9, max_restarts=0)


def _score_field(kind, model, ctx, domain, step=1e-6):
    width = domain.width
    p = domain.p
    eye = np.eye(p)

    def field(x):
        h = step * width
        plus = np.minimum(x + eye * h, domain.upper)
        minus = np.maximum(x - eye * h, domain.lower)
        s = kind.score(model, ctx, np.vstack([x, plus, minus]))
        span = np.diag(plus - minus)
        return -float(s[0]), -(s[1 : p + 1] - s[p + 1 :]) / span

    return field


def propose(model, evaluated: EvaluatedDesign, kind: CriterionKind, stream: RandomStream,
            n_candidates: int | None = None, n_refine: int = 10):
    """Next point to evaluate, with its criterion score.

    Scores ``1000 * p`` LHS candidates, polishes the ``n_refine`` best with
    bounded descent on the negated score and keeps the best polished point.
    A winner that repeats a design point (Chebyshev 1e-8 in unit-cube
    coordinates) is replaced by a fresh LHS point.
    """
    domain = evaluated.domain
    ctx = kind.context(evaluated)
    n = n_candidates or 1000 * domain.p
    cand = lhs_sample(domain, n, stream)
    scores = kind.score(model, ctx, cand)
    finite = np.isfinite(scores)
    if not np.any(finite):
        raise ProposalFailure("criterion is non-finite at every candidate")
    scores = np.where(finite, scores, -np.inf)
    order = np.argsort(-scores, kind="stable")
    top = order[:n_refine]
    field = _score_field(kind, model, ctx, domain)
    best_x, best_s = cand[order[0]], float(scores[order[0]])
    for i in top:
        if not np.isfinite(scores[i]):
            continue
        try:
            res = minimize(field, cand[i], domain, _REFINE)
        except NumericFailure:
            continue
        s = float(kind.score(model, ctx, res.x)[0])
        if s > best_s:
            best_x, best_s = res.x, s
    unit = (evaluated.X - domain.lower) / domain.width
    z = (best_x - domain.lower) / domain.width
    if np.min(np.max(np.abs(unit - z), axis=1)) <= 1e-8:
        best_x = lhs_sample(domain, 1, stream)[0]
        best_s = float(kind.score(model, ctx, best_x)[0])
    return best_x, best_s
