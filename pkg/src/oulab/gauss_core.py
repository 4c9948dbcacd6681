"""Dense linear algebra and centered Gaussian measures.

Matrix exponentials, finite-horizon Gramians, the stationary Lyapunov
covariance, sampling, and the rank-two trace formula used when the
diffusion part of the generator is restricted to two directions.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
import scipy.linalg
import scipy.special

from .errors import DegeneracyError, DimensionError, DomainError, NumericError, StabilityError, ValidationError

PSD_RTOL = 1e-10


def _square(A, name="A"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def _check_symmetric(Q, name="Q"):
    scale = max(np.linalg.norm(Q), 1e-300)
    if np.linalg.norm(Q - Q.T) > 1e-12 * scale:
        raise ValidationError(f"{name} is not symmetric")


def mat_exp(A, t=1.0):
    """Return ``exp(t A)`` (scaling and squaring with a Pade core)."""
    A = _square(A)
    return scipy.linalg.expm(t * A)


def spectral_abscissa(A):
    """Largest real part over the eigenvalues of ``A``."""
    A = _square(A)
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigenvalue iteration did not converge: {exc}") from exc
    return float(np.max(ev.real))


def left_eigenpairs(A):
    """Eigenpairs ``(gamma, x)`` of ``A^T``, i.e. ``A^T x = gamma x``.

    Convenience scan for callers who need an eigenvector of the adjoint drift;
    the reductions themselves only verify the pair they are given.
    """
    A = _square(A)
    w, V = np.linalg.eig(A.T)
    order = np.lexsort((w.imag, -w.real))
    return w[order], V[:, order]


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _gramian_panels(A, Q, t, panels):
    width = t / panels
    u = 0.5 * width * (_GL_X + 1.0)
    local = [scipy.linalg.expm(s * A) for s in u]
    step = scipy.linalg.expm(width * A)
    start = np.eye(A.shape[0])
    total = np.zeros_like(Q, dtype=float)
    for _ in range(panels):
        for E, w in zip(local, _GL_W):
            F = start @ E
            total += w * (F @ Q @ F.T)
        start = start @ step
    total *= 0.5 * width
    return 0.5 * (total + total.T)


def gramian_qt(A, Q, t, tol=1e-12, max_panels=1 << 14):
    """Finite-horizon Gramian ``int_0^t exp(sA) Q exp(sA^T) ds``.

    Composite 8-point Gauss-Legendre panels, doubling the panel count until
    two successive estimates agree to ``tol`` relative (Frobenius norm).
    """
    A = _square(A)
    Q = _square(Q, "Q")
    if A.shape != Q.shape:
        raise DimensionError(f"A {A.shape} and Q {Q.shape} differ in shape")
    _check_symmetric(Q)
    if t < 0:
        raise DomainError(f"horizon must be nonnegative, got {t}")
    if t == 0:
        return np.zeros_like(Q, dtype=float)
    panels = max(1, int(np.ceil(t * max(np.linalg.norm(A, 2), 1e-3) / 2)))
    prev = _gramian_panels(A, Q, t, panels)
    while panels < max_panels:
        panels *= 2
        cur = _gramian_panels(A, Q, t, panels)
        if np.linalg.norm(cur - prev) <= tol * max(np.linalg.norm(cur), 1e-300):
            return cur
        prev = cur
    raise NumericError(f"Gramian quadrature did not reach tol={tol} with {panels} panels")


def lyapunov_qinf(A, Q):
    """Stationary covariance: the solution of ``A S + S A^T + Q = 0``."""
    A = _square(A)
    Q = _square(Q, "Q")
    if A.shape != Q.shape:
        raise DimensionError(f"A {A.shape} and Q {Q.shape} differ in shape")
    _check_symmetric(Q)
    abscissa = spectral_abscissa(A)
    if abscissa >= 0:
        raise StabilityError(
            f"spectral abscissa {abscissa:.3g} >= 0: no invariant measure exists for this drift")
    S = scipy.linalg.solve_continuous_lyapunov(A, -Q)
    return 0.5 * (S + S.T)


def rank2_trace(x1, y1, x2, y2):
    """Trace of ``v -> <v, y1> x1 + <v, y2> x2``, which is ``<x1,y1> + <x2,y2>``."""
    vs = [np.asarray(v) for v in (x1, y1, x2, y2)]
    if any(v.ndim != 1 for v in vs) or len({v.shape[0] for v in vs}) != 1:
        raise DimensionError("rank2_trace needs four vectors of equal length")
    x1, y1, x2, y2 = vs
    return x1 @ y1 + x2 @ y2


@dataclass(frozen=True)
class GaussianMeasure:
    """Centered Gaussian measure on R^dim with covariance ``cov``."""

    cov: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        cov = np.array(np.atleast_2d(self.cov), dtype=float)
        _square(cov, "cov")
        _check_symmetric(cov, "cov")
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "dim", cov.shape[0])

    def factor(self):
        """Symmetric square-root factor ``L`` with ``L L^T = cov``.

        Eigenvalues down to ``-1e-10 * trace`` are treated as round-off and
        clipped to zero; anything more negative is a degeneracy error.
        """
        w, V = np.linalg.eigh(self.cov)
        floor = -PSD_RTOL * max(np.trace(self.cov), 0.0)
        if w.min(initial=0.0) < floor:
            raise DegeneracyError(f"covariance has eigenvalue {w.min():.3g} below PSD tolerance")
        return V * np.sqrt(np.clip(w, 0.0, None))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.cov)[0])


@lru_cache(maxsize=32)
def normal_rule(order):
    """Gauss-Hermite nodes/weights for ``E g(Z)``, ``Z ~ N(0, 1)``.

    scipy's probabilists' rule stays finite at high order, where
    ``numpy.polynomial.hermite.hermgauss`` underflows to NaN (order ~500).
    """
    x, w = scipy.special.roots_hermitenorm(order)
    w = w / math.sqrt(2 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_sample(measure, count, seed):
    """``count`` i.i.d. draws (rows) from ``measure``; deterministic in ``seed``."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    L = measure.factor()
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, measure.dim))
    return Z @ L.T
