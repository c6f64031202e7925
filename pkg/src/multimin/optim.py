"""Bounded quasi-Newton descent.

Projected limited-memory BFGS on the unit cube with a capped step length
and a backtracking Armijo search.  The cap keeps a descent inside the basin
it started in; an uncapped quasi-Newton step readily lands in a lower,
unrelated basin, which defeats minima extraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from multimin.core import BoxDomain


class NumericFailure(FloatingPointError):
    """The field returned a non-finite value or gradient."""

    def __init__(self, message, last_x=None, last_f=None):
        super().__init__(message)
        self.last_x = last_x
        self.last_f = last_f


@dataclass(frozen=True)
class DescentOptions:
    memory: int = 5
    max_iter: int = 200
    pgtol: float = 1e-8
    ftol: float = 1e-10
    # an f-change stop or failed search with |pg|_inf (unit cube) above
    # stall_tol clears the quasi-Newton memory and carries on
    stall_tol: float = 1e-6
    max_restarts: int = 3
    # sup-norm step lengths in the unit cube: steepest-descent steps, and the cap on all steps
    first_step: float = 1e-2
    max_step: float = 0.1
    armijo: float = 1e-4
    max_backtracks: int = 40


@dataclass(frozen=True)
class DescentResult:
    x: np.ndarray
    f: float
    projected_gradient_norm: float
    iterations: int
    converged: bool
    hit_bound: bool

    def stationary(self, tol: float = 1e-5) -> bool:
        """Projected gradient small relative to ``1 + |f|``, whatever stopped the solver."""
        return self.projected_gradient_norm <= tol * (1.0 + abs(self.f))


def projected_gradient(z: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Projected gradient on the unit cube."""
    return np.clip(z - g, 0.0, 1.0) - z


def _two_loop(q, pairs):
    """Apply the limited-memory inverse Hessian to ``q``."""
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q = q - a * y
    s, y, _ = pairs[-1]
    r = (s @ y) / (y @ y) * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        r = r + s * (a - rho * (y @ r))
    return r


def minimize(field, x0, bounds: BoxDomain, opts: DescentOptions = DescentOptions()) -> DescentResult:
    """Locally minimize ``field`` inside ``bounds`` starting from ``x0``.

    ``field(x)`` returns ``(value, gradient)`` in original coordinates.  The
    reported projected-gradient norm is the sup norm in unit-cube
    coordinates.  ``converged`` means the projected gradient reached
    ``pgtol``, or the relative f-change fell below ``ftol`` with the
    projected gradient under ``stall_tol``.
    """
    lower, width = bounds.lower, bounds.width
    z = np.clip((np.asarray(x0, dtype=float) - lower) / width, 0.0, 1.0)

    def evaluate(z, last_z, last_f):
        f, g = field(lower + z * width)
        g = np.asarray(g, dtype=float) * width
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise NumericFailure("non-finite field value or gradient", lower + last_z * width, last_f)
        return float(f), g

    f, g = evaluate(z, z, None)
    pairs = []
    iterations, restarts = 0, 0
    use_ftol = opts.ftol > 0
    converged = False
    while True:
        pg = float(np.max(np.abs(projected_gradient(z, g))))
        if pg <= opts.pgtol:
            converged = True
            break
        if iterations >= opts.max_iter:
            break
        # variables held at a bound by the gradient stay there this step
        free = ~(((z <= 0.0) & (g > 0.0)) | ((z >= 1.0) & (g < 0.0)))
        q = np.where(free, g, 0.0)
        d = -np.where(free, _two_loop(q, pairs), 0.0) if pairs else None
        if d is None or g @ d >= 0.0:
            pairs = []
            d = -q * (opts.first_step / np.max(np.abs(q)))
        size = np.max(np.abs(d))
        if size > opts.max_step:
            d *= opts.max_step / size
        t, accepted = 1.0, False
        for _ in range(opts.max_backtracks):
            z_new = np.clip(z + t * d, 0.0, 1.0)
            f_new, g_new = evaluate(z_new, z, f)
            if f_new <= f + opts.armijo * (g @ (z_new - z)):
                accepted = not np.array_equal(z_new, z)
                break
            t *= 0.5
        iterations += 1
        if not accepted:
            # no decrease left at this resolution; retry once from steepest descent
            if pairs and restarts < opts.max_restarts:
                pairs, restarts = [], restarts + 1
                continue
            break
        s_k, y_k = z_new - z, g_new - g
        f_old = f
        z, f, g = z_new, f_new, g_new
        sy = s_k @ y_k
        if sy > 1e-12 * (y_k @ y_k):
            pairs.append((s_k, y_k, 1.0 / sy))
            del pairs[: -opts.memory]
        if use_ftol and f_old - f <= opts.ftol * max(abs(f_old), abs(f), 1.0):
            if np.max(np.abs(projected_gradient(z, g))) <= opts.stall_tol or restarts >= opts.max_restarts:
                converged = True
                break
            # stalled far from stationarity: fresh memory, gradient test only
            pairs, use_ftol, restarts = [], False, restarts + 1

    pg = float(np.max(np.abs(projected_gradient(z, g))))
    x = np.clip(lower + z * width, bounds.lower, bounds.upper)
    hit = bool(np.any((z <= 1e-12) | (z >= 1.0 - 1e-12)))
    return DescentResult(x, f, pg, iterations, converged, hit)
