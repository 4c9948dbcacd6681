"""Tabulated ODE solutions, panel quadrature and Gauss-Hermite helpers."""
from dataclasses import dataclass
import math

import numpy as np

from .._kernels import hermite5, integrate_linear2
from ..gauss_core import normal_rule
from ..errors import AccuracyError, NumericError


@dataclass(frozen=True)
class SolveOptions:
    rtol: float = 1e-12
    h_max: float = 0.02
    T_min: float = 4.0
    T_cap: float = 30.0
    tail_rtol: float = 1e-6
    max_steps: int = 2_000_000


class Tabulated:
    """Piecewise quintic Hermite representation of a scalar ODE solution.

    Outside the tabulated range the solution is continued by the power law
    ``y(t) ~ y(end) * (t / end) ** tail_power``, which is the leading
    large-|t| behaviour of the solutions used here.
    """

    def __init__(self, ts, y, dy, d2y, tail_power):
        self.ts = np.asarray(ts, dtype=float)
        self.y = np.asarray(y, dtype=complex)
        self.dy = np.asarray(dy, dtype=complex)
        self.d2y = np.asarray(d2y, dtype=complex)
        self.tail_power = complex(tail_power)

    @property
    def lo(self):
        return self.ts[0]

    @property
    def hi(self):
        return self.ts[-1]

    def __call__(self, t):
        return self.eval(t)[0]

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        v, v1, v2 = hermite5(self.ts, self.y, self.dy, self.d2y, t)
        for end, idx in ((self.hi, -1), (self.lo, 0)):
            mask = t > end if idx == -1 else t < end
            if end == 0 or not np.any(mask):
                continue
            p = self.tail_power
            ratio = t[mask] / end
            base = self.y[idx] * ratio ** p
            v[mask] = base
            v1[mask] = base * p / t[mask]
            v2[mask] = base * p * (p - 1) / t[mask] ** 2
        return v, v1, v2


def integrate_scalar(dm1, d1, e0, t0, t1, y0, dy0, opts):
    ts, y, dy, d2, status = integrate_linear2(
        dm1, d1, 0.0, e0, t0, t1, y0, dy0, rtol=opts.rtol, h_init=min(1e-3, opts.h_max),
        h_max=opts.h_max, max_steps=opts.max_steps)
    if status == 1:
        raise NumericError("ODE integration exceeded the step budget")
    if status == 2:
        raise NumericError("ODE step size underflow")
    return ts, y[:, 0], dy[:, 0], d2[:, 0]


_GL_CACHE = {}


def gauss_legendre(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def panel_nodes(a, b, order=6):
    """Gauss-Legendre nodes/weights on the panels ``[a[i], b[i]]``."""
    x, w = gauss_legendre(order)
    a, b = np.asarray(a)[:, None], np.asarray(b)[:, None]
    half = 0.5 * (b - a)
    return (a + half * (x + 1)).ravel(), (half * w).ravel()


def panel_integrate(fn, edges, tol=1e-10, max_depth=30):
    """Integrate ``fn`` (vectorised) over ``[edges[0], edges[-1]]``.

    Each panel gets 6- and 10-point Gauss-Legendre rules; panels whose two
    estimates differ by more than ``tol`` times the total magnitude are
    bisected, up to ``max_depth`` times.  ``tol=None`` returns the fixed
    10-point composite rule (used for residual magnitudes, which are noise
    dominated and need no refinement).
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    total = 0.0
    scale = None
    for _ in range(max_depth + 1):
        xs, ws = panel_nodes(a, b, 6)
        lo = (fn(xs) * ws).reshape(-1, 6).sum(axis=1)
        xs, ws = panel_nodes(a, b, 10)
        hi = (fn(xs) * ws).reshape(-1, 10).sum(axis=1)
        if tol is None:
            return np.sum(hi)
        if scale is None:
            scale = max(np.sum(np.abs(hi)), 1e-300)
        bad = np.abs(hi - lo) > tol * scale
        total += np.sum(hi[~bad])
        if not np.any(bad):
            return total
        a, b = a[bad], b[bad]
        mid = 0.5 * (a + b)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    raise AccuracyError(f"panel quadrature failed to reach tol={tol}")


def hermite_standard(order):
    """Nodes/weights for ``E g(W)``, ``W ~ N(0, 1)``."""
    return normal_rule(order)


def converge_hermite(evaluate, tol, start=32, max_order=512):
    """Run ``evaluate(order)`` with doubling orders until two agree to ``tol``."""
    order = start
    prev = evaluate(order)
    while order < max_order:
        order *= 2
        cur = evaluate(order)
        scale = max(np.max(np.abs(cur)), 1e-300)
        if np.max(np.abs(cur - prev)) <= tol * scale:
            return cur
        prev = cur
    raise AccuracyError(f"Gauss-Hermite quadrature not converged at order {max_order}")
