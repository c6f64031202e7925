"""Ordinary Kriging with an anisotropic Matérn-5/2 correlation.

Inputs are mapped to the unit cube and responses standardized before
fitting; all public predictions are in original units.  The nugget is a
micro-scale effect: it sits on the diagonal of the training correlation
matrix and also applies when a prediction point coincides exactly with a
training point, so the predictor interpolates the data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from multimin.core import BoxDomain, EvaluatedDesign, RandomStream, lhs_sample
from multimin.optim import DescentOptions, minimize

logger = logging.getLogger(__name__)

SQRT5 = np.sqrt(5.0)


class FitFailure(RuntimeError):
    """The correlation matrix stayed singular after nugget escalation."""


@dataclass(frozen=True)
class KrigingConfig:
    nugget: float = 1e-8
    max_nugget: float = 1e-4
    lengthscale_bounds: tuple[float, float] = (1e-3, 10.0)
    restarts: int = 5
    descent: DescentOptions = field(default_factory=lambda: DescentOptions(max_iter=100, ftol=1e-9, stall_tol=1e-4))

    def __post_init__(self):
        if self.nugget <= 0:
            raise ValueError("nugget must be positive")
        if self.restarts < 1:
            raise ValueError("need at least one likelihood restart")
        lo, hi = self.lengthscale_bounds
        if not 0 < lo < hi:
            raise ValueError("lengthscale bounds must satisfy 0 < lo < hi")


class Prediction(NamedTuple):
    mean: float
    sd: float


def matern52(r):
    s = SQRT5 * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def _scaled_distance(A, B, theta):
    return cdist(A / theta, B / theta)


def _correlation(A, B, theta):
    return matern52(_scaled_distance(A, B, theta))


def _cholesky(R):
    L = cholesky(R, lower=True, check_finite=False)
    # LAPACK accepts pivots at rounding level; those factors are meaningless
    if np.min(np.diag(L)) ** 2 <= R.shape[0] * np.finfo(float).eps:
        raise LinAlgError("correlation matrix numerically singular")
    return L


class _Singular(Exception):
    pass


def _profile(Z, y, theta, nugget, want_grad=True):
    """Concentrated negative log-likelihood and its gradient in log-lengthscales."""
    n = y.size
    r = _scaled_distance(Z, Z, theta)
    R = matern52(r)
    R[np.diag_indices(n)] += nugget
    try:
        L = _cholesky(R)
    except LinAlgError as exc:
        raise _Singular() from exc
    ones = np.ones(n)
    Ri1 = cho_solve((L, True), ones, check_finite=False)
    Riy = cho_solve((L, True), y, check_finite=False)
    beta = (ones @ Riy) / (ones @ Ri1)
    resid = y - beta
    alpha = Riy - beta * Ri1
    sigma2 = max(float(resid @ alpha) / n, 1e-300)
    nll = 0.5 * n * np.log(sigma2) + np.sum(np.log(np.diag(L)))
    if not want_grad:
        return nll, None
    Rinv = cho_solve((L, True), np.eye(n), check_finite=False)
    W = Rinv - np.outer(alpha, alpha) / sigma2
    common = (5.0 / 3.0) * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
    grad = np.empty(theta.size)
    for k in range(theta.size):
        d2 = (Z[:, k : k + 1] - Z[:, k][None, :]) ** 2 / theta[k] ** 2
        grad[k] = 0.5 * np.sum(W * common * d2)
    return nll, grad


class KrigingModel:
    """Fitted surrogate; immutable once built by :func:`fit`."""

    def __init__(self, domain, Z, y, y_mean, y_scale, theta, nugget, log_likelihood):
        self.domain = domain
        self.Z = Z
        self.y_mean = y_mean
        self.y_scale = y_scale
        self.theta = theta
        self.nugget = nugget
        self.log_likelihood = log_likelihood
        self.degenerate = y_scale == 0.0
        n = Z.shape[0]
        if self.degenerate:
            self.beta, self.sigma2 = 0.0, nugget
            self.L = np.eye(n)
            self.alpha = np.zeros(n)
            self._Li1 = np.ones(n)
            self._one_Ri_one = float(n)
            return
        R = _correlation(Z, Z, theta)
        R[np.diag_indices(n)] += nugget
        self.L = _cholesky(R)
        ones = np.ones(n)
        Ri1 = cho_solve((self.L, True), ones, check_finite=False)
        Riy = cho_solve((self.L, True), y, check_finite=False)
        self._one_Ri_one = float(ones @ Ri1)
        self.beta = float(ones @ Riy) / self._one_Ri_one
        self.alpha = Riy - self.beta * Ri1
        self.sigma2 = float((y - self.beta) @ self.alpha) / n
        self._Li1 = solve_triangular(self.L, ones, lower=True, check_finite=False)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def trend(self) -> float:
        """Constant trend in original units."""
        return self.y_mean + self.y_scale * self.beta

    def _unit(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (self.domain.check(x) - self.domain.lower) / self.domain.width

    def _cross(self, z):
        r = _correlation(z, self.Z, self.theta)
        # micro-scale nugget at exact coincidence with a training input
        same = np.all(z[:, None, :] == self.Z[None, :, :], axis=2)
        return r + self.nugget * same

    def predict_many(self, X):
        """Mean and standard deviation arrays at the rows of ``X``."""
        z = self._unit(X)
        if self.degenerate:
            m = np.full(z.shape[0], self.y_mean)
            return m, np.full(z.shape[0], np.sqrt(self.nugget))
        r = self._cross(z)
        mean = self.beta + r @ self.alpha
        v = solve_triangular(self.L, r.T, lower=True, check_finite=False)
        explained = np.sum(v * v, axis=0)
        trend = (1.0 - self._Li1 @ v) ** 2 / self._one_Ri_one
        var = self.sigma2 * (1.0 + self.nugget - explained + trend)
        sd = np.sqrt(np.maximum(var, 0.0))
        return self.y_mean + self.y_scale * mean, self.y_scale * sd

    def predict(self, x) -> Prediction:
        m, s = self.predict_many(np.reshape(x, (1, -1)))
        return Prediction(float(m[0]), float(s[0]))

    def mean_gradient_many(self, X):
        """Gradient of the predicted mean in original coordinates, shape ``(m, p)``."""
        z = self._unit(X)
        if self.degenerate:
            return np.zeros_like(z)
        diff = z[:, None, :] - self.Z[None, :, :]
        r = np.sqrt(np.sum((diff / self.theta) ** 2, axis=2))
        dk = -(5.0 / 3.0) * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
        g_unit = np.einsum("mn,n,mnk->mk", dk, self.alpha, diff) / self.theta**2
        return self.y_scale * g_unit / self.domain.width

    def mean_gradient(self, x) -> np.ndarray:
        return self.mean_gradient_many(np.reshape(x, (1, -1)))[0]

    def mean_field(self, x):
        """``(mean, gradient)`` callback for descent on the predicted mean."""
        x = np.reshape(x, (1, -1))
        m, _ = self.predict_many(x)
        return float(m[0]), self.mean_gradient_many(x)[0]


def predict(model: KrigingModel, x) -> Prediction:
    return model.predict(x)


def mean_gradient(model: KrigingModel, x) -> np.ndarray:
    return model.mean_gradient(x)


def fit(evaluated: EvaluatedDesign, config: KrigingConfig, stream: RandomStream) -> KrigingModel:
    """Fit lengthscales by maximizing the profile likelihood with multistart descent.

    Restart points are the centre of the log-lengthscale box followed by
    ``config.restarts - 1`` LHS points drawn from ``stream``.  When the
    correlation matrix cannot be factored the nugget is raised tenfold, up to
    ``config.max_nugget``.
    """
    domain = evaluated.domain
    X, y = evaluated.X, evaluated.y
    if X.shape[0] < 2 or np.unique(X, axis=0).shape[0] < X.shape[0]:
        raise ValueError("need at least two distinct design points")
    Z = (X - domain.lower) / domain.width
    p = Z.shape[1]
    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale <= 1e-14 * max(1.0, abs(y_mean)):
        theta = np.full(p, np.sqrt(config.lengthscale_bounds[0] * config.lengthscale_bounds[1]))
        return KrigingModel(domain, Z, np.zeros_like(y), y_mean, 0.0, theta, config.nugget, float("nan"))
    # snapping to 1e-10 keeps rounding noise from an affine change of units
    # out of the likelihood search, whose flat directions would amplify it
    ys = np.round((y - y_mean) / y_scale, 10)

    log_box = BoxDomain(np.full(p, np.log(config.lengthscale_bounds[0])), np.full(p, np.log(config.lengthscale_bounds[1])))
    starts = [0.5 * (log_box.lower + log_box.upper)]
    if config.restarts > 1:
        starts.extend(lhs_sample(log_box, config.restarts - 1, stream))

    nugget = config.nugget
    while True:
        best = _best_restart(Z, ys, starts, log_box, nugget, config.descent)
        if best is not None:
            theta, nll = best
            try:
                model = KrigingModel(domain, Z, ys, y_mean, y_scale, theta, nugget, -nll)
                return model
            except LinAlgError:
                pass
        if nugget * 10.0 > config.max_nugget * (1 + 1e-9):
            raise FitFailure(f"correlation matrix singular with nugget {nugget:g}")
        nugget *= 10.0
        logger.debug("escalating nugget to %g", nugget)


_PENALTY = 1e10


def _best_restart(Z, ys, starts, log_box, nugget, opts):
    def objective(log_theta):
        try:
            return _profile(Z, ys, np.exp(log_theta), nugget)
        except _Singular:
            # pushes the descent toward shorter, better-conditioned lengthscales
            return _PENALTY, np.ones_like(log_theta)

    best = None
    for start in starts:
        res = minimize(objective, start, log_box, opts)
        if res.f >= _PENALTY:
            continue
        if best is None or res.f < best[1]:
            best = (res.x, res.f)
    if best is None:
        return None
    # drive the winner to the gradient tolerance so that tiny changes in the
    # standardized responses cannot move the lengthscales noticeably
    polish = replace(opts, ftol=0.0, max_restarts=0)
    res = minimize(objective, best[0], log_box, polish)
    if res.f <= best[1]:
        best = (res.x, res.f)
    return np.exp(best[0]), best[1]


def fit_arrays(domain: BoxDomain, X, y, config: KrigingConfig, stream: RandomStream) -> KrigingModel:
    return fit(EvaluatedDesign(X, y, domain), config, stream)
