"""Finite-dimensional Ornstein-Uhlenbeck models.

The state space is R^n with drift ``A`` and diffusion ``B`` (noise in R^m).
Cylinder functions ``f(x) = phi(<x, x_1>, ..., <x, x_k>)`` carry a profile
``phi`` with value/gradient/Hessian oracles, which is all the generator and
the Mehler semigroup need.  The 1D and 2D reductions project the model onto
the span of a real or complex eigenvector of ``A^T``.
"""
from dataclasses import dataclass
import math
import re

import numpy as np

from . import gauss_core
from .errors import (AccuracyError, DegeneracyError, DimensionError, DomainError, StabilityError,
                     ValidationError)
from .gauss_core import GaussianMeasure

DEGENERACY_RTOL = 1e-10
EIGENPAIR_RTOL = 1e-8


class OUModel:
    """Drift ``A`` (n x n) and diffusion ``B`` (n x m); ``Q = B B^T``.

    Instances are treated as immutable; derived quantities are cached.
    """

    def __init__(self, A, B):
        A = np.array(np.atleast_2d(A), dtype=float)
        B = np.array(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValidationError("model matrices must be finite")
        for arr in (A, B):
            arr.setflags(write=False)
        self.A = A
        self.B = B
        Q = B @ B.T
        Q = 0.5 * (Q + Q.T)
        Q.setflags(write=False)
        self.Q = Q
        self._qinf = None
        self._gramians = {}

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def __repr__(self):
        return f"OUModel(n={self.n}, m={self.m})"

    def exp(self, t):
        return gauss_core.mat_exp(self.A, t)

    def gramian(self, t):
        key = float(t)
        if key not in self._gramians:
            self._gramians[key] = gauss_core.gramian_qt(self.A, self.Q, key)
        return self._gramians[key]

    @property
    def qinf(self):
        """Stationary covariance; raises if the invariant measure is unusable."""
        if self._qinf is None:
            S = gauss_core.lyapunov_qinf(self.A, self.Q)
            floor = DEGENERACY_RTOL * np.trace(S)
            if np.linalg.eigvalsh(S)[0] <= floor:
                raise DegeneracyError(
                    "stationary covariance is singular; the invariant measure must be nondegenerate")
            S.setflags(write=False)
            self._qinf = S
        return self._qinf

    def invariant_measure(self):
        return GaussianMeasure(self.qinf)

    def transition_measure(self, t):
        return GaussianMeasure(self.gramian(t))


# ---------------------------------------------------------------------------
# model files

_KEY_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _parse_matrix(text, rows, cols, key):
    body = text.strip()
    if not body:
        raise ValidationError(f"{key}: empty matrix")
    out = []
    for row in body.split(";"):
        entries = [e for e in re.split(r"[,\s]+", row.strip()) if e]
        try:
            vals = [float(e) for e in entries]
        except ValueError as exc:
            raise ValidationError(f"{key}: bad number in row {row.strip()!r}") from exc
        out.append(vals)
    if len(out) != rows or any(len(r) != cols for r in out):
        raise ValidationError(f"{key}: expected {rows} rows of {cols} entries")
    M = np.array(out, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{key}: non-finite entries are not allowed")
    return M


def parse_model_text(text):
    """Parse the key-value model format.

    Grammar (one assignment per line, ``#`` starts a comment)::

        n = <int>
        m = <int>
        A = <row> ; <row> ; ...      # n rows of n numbers
        B = <row> ; <row> ; ...      # n rows of m numbers

    Numbers within a row are separated by whitespace or commas.  A trailing
    backslash continues an assignment on the next line.
    """
    values = {}
    pending = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if line.endswith("\\"):
            pending += line[:-1] + " "
            continue
        line = pending + line
        pending = ""
        if not line.strip():
            continue
        match = _KEY_RE.match(line)
        if not match:
            raise ValidationError(f"line {lineno}: expected 'key = value'")
        key, val = match.groups()
        if key in values:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val
    missing = {"n", "m", "A", "B"} - values.keys()
    if missing:
        raise ValidationError(f"missing keys: {sorted(missing)}")
    unknown = values.keys() - {"n", "m", "A", "B"}
    if unknown:
        raise ValidationError(f"unknown keys: {sorted(unknown)}")
    try:
        n, m = int(values["n"]), int(values["m"])
    except ValueError as exc:
        raise ValidationError("n and m must be integers") from exc
    if n < 1 or m < 1:
        raise ValidationError("n and m must be positive")
    A = _parse_matrix(values["A"], n, n, "A")
    B = _parse_matrix(values["B"], n, m, "B")
    return OUModel(A, B)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return parse_model_text(fh.read())


def format_model(model):
    def rows(M):
        return " ; ".join(" ".join(repr(float(v)) for v in r) for r in M)
    return f"n = {model.n}\nm = {model.m}\nA = {rows(model.A)}\nB = {rows(model.B)}\n"


# ---------------------------------------------------------------------------
# profiles and cylinder functions


class Profile:
    """A scalar field on R^k with batched value/gradient/Hessian.

    ``evaluate(U)`` takes points as rows of a ``(N, k)`` array and returns
    ``(value (N,), grad (N, k), hess (N, k, k))``; complex values are allowed.
    ``growth`` is one of "compact", "bounded", "polynomial", "gaussian" or
    "unknown"; Monte Carlo routines use it to refuse heavy-tailed integrands.
    """

    arity = 1
    support_radius = math.inf
    growth = "unknown"

    def evaluate(self, U):
        raise NotImplementedError

    def __call__(self, U):
        return self.evaluate(np.atleast_2d(U))[0]


class FunctionProfile(Profile):
    def __init__(self, value, grad, hess, arity, support_radius=math.inf, growth="unknown"):
        self._value, self._grad, self._hess = value, grad, hess
        self.arity = arity
        self.support_radius = support_radius
        self.growth = "compact" if math.isfinite(support_radius) else growth

    def evaluate(self, U):
        U = np.asarray(U, dtype=float)
        return self._value(U), self._grad(U), self._hess(U)


def constant_profile(value, arity=1):
    value = complex(value) if np.iscomplexobj(value) else float(value)
    return FunctionProfile(lambda U: np.full(U.shape[0], value),
                           lambda U: np.zeros(U.shape),
                           lambda U: np.zeros((U.shape[0], arity, arity)),
                           arity=arity, growth="bounded")


def linear_profile(coef):
    coef = np.atleast_1d(np.asarray(coef))
    k = coef.shape[0]
    return FunctionProfile(lambda U: U @ coef,
                           lambda U: np.broadcast_to(coef, U.shape).copy(),
                           lambda U: np.zeros((U.shape[0], k, k), dtype=coef.dtype),
                           arity=k, growth="polynomial")


def quadratic_profile(M, c=None, d=0.0):
    """``phi(u) = u^T M u + c.u + d`` with symmetric ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    M = 0.5 * (M + M.T)
    k = M.shape[0]
    c = np.zeros(k) if c is None else np.asarray(c, dtype=float)
    return FunctionProfile(lambda U: np.einsum("ni,ij,nj->n", U, M, U) + U @ c + d,
                           lambda U: 2 * U @ M + c,
                           lambda U: np.broadcast_to(2 * M, (U.shape[0], k, k)).copy(),
                           arity=k, growth="polynomial")


def plane_wave_profile(xi):
    """``phi(u) = exp(i xi.u)`` (bounded, analytic)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))

    def value(U):
        return np.exp(1j * (U @ xi))

    return FunctionProfile(value,
                           lambda U: 1j * value(U)[:, None] * xi,
                           lambda U: -value(U)[:, None, None] * np.outer(xi, xi),
                           arity=xi.shape[0], growth="bounded")


def gaussian_bump_profile(center, width, amplitude=1.0):
    """``amplitude * exp(-|u - center|^2 / (2 width^2))``."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    k = center.shape[0]
    w2 = float(width) ** 2

    def value(U):
        return amplitude * np.exp(-np.sum((U - center) ** 2, axis=1) / (2 * w2))

    def grad(U):
        return -value(U)[:, None] * (U - center) / w2

    def hess(U):
        D = (U - center) / w2
        return value(U)[:, None, None] * (np.einsum("ni,nj->nij", D, D) - np.eye(k) / w2)

    return FunctionProfile(value, grad, hess, arity=k, growth="bounded")


def bump_profile(center, radius, amplitude=1.0):
    """Smooth compactly supported bump ``exp(1 - 1/(1 - r^2))`` with r = |u-c|/radius."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    k = center.shape[0]
    R = float(radius)

    def parts(U):
        D = (U - center) / R
        r2 = np.sum(D * D, axis=1)
        inside = r2 < 1.0
        s = np.where(inside, 1.0 - r2, 1.0)
        val = np.where(inside, amplitude * np.exp(1.0 - 1.0 / s), 0.0)
        return D, s, val

    def value(U):
        return parts(U)[2]

    def grad(U):
        D, s, val = parts(U)
        # d/du exp(1 - 1/s) = val * (-2 D / R) / s^2
        return val[:, None] * (-2.0 * D / R) / (s * s)[:, None]

    def hess(U):
        D, s, val = parts(U)
        g = -2.0 * D / (R * (s * s)[:, None])
        # derivative of g_i: -2/R [ delta_ij / (R s^2) + D_i * 4 D_j / (R s^3) ]
        dg = -2.0 / R * (np.eye(k)[None] / (R * (s * s))[:, None, None]
                         + 4.0 * np.einsum("ni,nj->nij", D, D) / (R * s ** 3)[:, None, None])
        return val[:, None, None] * (np.einsum("ni,nj->nij", g, g) + dg)

    return FunctionProfile(value, grad, hess, arity=k, support_radius=R + float(np.linalg.norm(center)))


class CylinderFunction:
    """``f(x) = phi(<x, x_1>, ..., <x, x_k>)`` on R^n."""

    def __init__(self, functionals, profile):
        F = np.array(np.atleast_2d(functionals), dtype=float)
        if F.shape[0] != profile.arity:
            raise DimensionError(f"{F.shape[0]} functionals for a profile of arity {profile.arity}")
        if F.shape[0] < 1:
            raise DimensionError("need at least one functional")
        F.setflags(write=False)
        self.functionals = F
        self.profile = profile

    @property
    def k(self):
        return self.functionals.shape[0]

    @property
    def n(self):
        return self.functionals.shape[1]

    @property
    def support_radius(self):
        return self.profile.support_radius

    def coords(self, X):
        X = np.atleast_2d(X)
        if X.shape[1] != self.n:
            raise DimensionError(f"points have dimension {X.shape[1]}, functionals {self.n}")
        return X @ self.functionals.T

    def __call__(self, X):
        single = np.ndim(X) == 1
        val = self.profile.evaluate(self.coords(X))[0]
        return val[0] if single else val

    def gradient(self, X):
        _, g, _ = self.profile.evaluate(self.coords(X))
        return g @ self.functionals

    def hessian(self, X):
        _, _, H = self.profile.evaluate(self.coords(X))
        return np.einsum("ai,nab,bj->nij", self.functionals, H, self.functionals)


def generator_apply(model, f, x):
    """Apply the OU generator to a cylinder function at ``x`` (or rows of ``x``).

    Computes ``1/2 Tr(G^T Hess(phi)(u) G) + <A x, sum_j d_j phi(u) x_j>``
    where ``G`` stacks the rows ``(B^T x_j)^T``, i.e. the trace of the second
    derivative along the noise directions plus the drift term.
    """
    if f.n != model.n:
        raise DimensionError(f"cylinder function lives on R^{f.n}, model on R^{model.n}")
    single = np.ndim(x) == 1
    X = np.atleast_2d(np.asarray(x, dtype=float))
    U = f.coords(X)
    _, grad, hess = f.profile.evaluate(U)
    G = f.functionals @ model.B
    diffusion = 0.5 * np.einsum("am,nab,bm->n", G, hess, G)
    drift = np.sum(grad * ((X @ model.A.T) @ f.functionals.T), axis=1)
    out = diffusion + drift
    return out[0] if single else out


@dataclass(frozen=True)
class QuadSpec:
    """Gauss-Hermite order-doubling schedule for Gaussian expectations."""

    start_order: int = 16
    max_order: int = 512
    tol: float = 1e-10


def _hermite_nodes(order, k):
    x, w = gauss_core.normal_rule(order)
    grids = np.meshgrid(*([x] * k), indexing="ij")
    wgrids = np.meshgrid(*([w] * k), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return Z, W


def gaussian_expectation(profile, means, cov, quad=QuadSpec()):
    """``E phi(mean + Y)`` with ``Y ~ N(0, cov)`` for every row of ``means``.

    Product Gauss-Hermite rule with order doubling; raises ``AccuracyError``
    if two successive orders still differ by more than ``quad.tol``
    (relative to the largest magnitude in the batch).  Compactly supported
    profiles (finite ``support_radius``) are smooth but not analytic, where
    Gauss-Hermite stalls near 1e-6; they use composite Gauss-Legendre panels
    on the support box against the Gaussian density instead.
    """
    means = np.atleast_2d(means)
    k = means.shape[1]
    L = GaussianMeasure(cov).factor()
    if not np.any(L):
        return profile.evaluate(means)[0]
    cov = np.atleast_2d(cov)
    if math.isfinite(profile.support_radius) and k <= 2 and np.linalg.eigvalsh(cov)[0] > 1e-12 * np.trace(cov):
        return _box_expectation(profile, means, cov, profile.support_radius, quad)
    max_points = 2_000_000
    order = quad.start_order
    prev = None
    while order <= quad.max_order and order ** k * means.shape[0] <= max_points * 8:
        Z, W = _hermite_nodes(order, k)
        cur = np.empty(means.shape[0], dtype=complex)
        chunk = max(1, max_points // len(W))
        for s in range(0, means.shape[0], chunk):
            pts = means[s:s + chunk, None, :] + (Z @ L.T)[None]
            vals = profile.evaluate(pts.reshape(-1, k))[0].reshape(pts.shape[:2])
            cur[s:s + chunk] = vals @ W
        if prev is not None:
            scale = max(np.max(np.abs(cur)), 1e-300)
            if np.max(np.abs(cur - prev)) <= quad.tol * scale:
                return cur
        prev = cur
        order *= 2
    raise AccuracyError(f"Gauss-Hermite expectation did not converge to tol={quad.tol} "
                        f"by order {order // 2}")


def _box_expectation(profile, means, cov, S, quad, max_panels=256):
    k = means.shape[1]
    P = np.linalg.inv(cov)
    norm = 1.0 / math.sqrt((2 * math.pi) ** k * np.linalg.det(cov))
    x, w = np.polynomial.legendre.leggauss(10)
    panels = 4
    prev = None
    while panels <= (max_panels if k == 1 else max_panels // 8):
        edges = np.linspace(-S, S, panels + 1)
        half = 0.5 * (edges[1] - edges[0])
        nodes = (edges[:-1, None] + half * (x + 1)).ravel()
        wts = np.tile(half * w, panels)
        grids = np.meshgrid(*([nodes] * k), indexing="ij")
        U = np.stack([g.ravel() for g in grids], axis=1)
        W = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([wts] * k), indexing="ij")], 1), 1)
        vals = profile.evaluate(U)[0] * W
        cur = np.empty(len(means), dtype=vals.dtype)
        step = max(1, 2_000_000 // len(U))  # bounds the (means x nodes) block
        for s in range(0, len(means), step):
            D = U[None, :, :] - means[s:s + step, None, :]
            dens = np.exp(-0.5 * np.einsum("mni,ij,mnj->mn", D, P, D))
            cur[s:s + step] = norm * (dens @ vals)
        if prev is not None:
            scale = max(np.max(np.abs(cur)), 1e-300)
            if np.max(np.abs(cur - prev)) <= quad.tol * scale:
                return cur
        prev = cur
        panels *= 2
    raise AccuracyError(f"panel expectation did not converge to tol={quad.tol}")


def mehler_apply(model, f, t, x, quad=QuadSpec()):
    """Mehler semigroup ``(P(t) f)(x) = E f(exp(tA) x + Y)``, ``Y ~ N(0, Q_t)``.

    The expectation is taken in the k pushforward coordinates, where ``Y``
    has covariance ``(<Q_t x_i, x_j>)``.
    """
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    single = np.ndim(x) == 1
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if t == 0:
        out = f(X)
        return out[0] if single else out
    means = f.coords(X @ model.exp(t).T)
    cov = f.functionals @ model.gramian(t) @ f.functionals.T
    cov = 0.5 * (cov + cov.T)
    out = gaussian_expectation(f.profile, means, cov, quad)
    if np.all(np.isreal(out)):
        out = out.real
    return out[0] if single else out


# ---------------------------------------------------------------------------
# reductions


@dataclass(frozen=True)
class Spec1D:
    """Parameters of ``L1 phi = q/2 phi'' + gamma t phi'``."""

    gamma: float
    q: float
    x0star: np.ndarray = None

    def __post_init__(self):
        if not self.gamma < 0:
            raise DomainError(f"gamma must be negative, got {self.gamma}")
        if not self.q > 0:
            raise DegeneracyError(f"q must be positive, got {self.q}")

    @property
    def kappa(self):
        """Inverse of twice the stationary variance: ``|gamma| / q``."""
        return -self.gamma / self.q

    @property
    def variance(self):
        return -self.q / (2 * self.gamma)


@dataclass(frozen=True)
class Spec2D:
    """Parameters of ``L2 phi = 1/2 Tr(R D^2 phi) + <C t, D phi>``."""

    a: float
    b: float
    R: np.ndarray
    h1star: np.ndarray = None
    h2star: np.ndarray = None

    def __post_init__(self):
        if not self.a < 0:
            raise DomainError(f"a must be negative, got {self.a}")
        if self.b == 0:
            raise DomainError("b must be nonzero (real eigenvalues use the 1D reduction)")
        R = np.array(self.R, dtype=float)
        if R.shape != (2, 2) or abs(R[0, 1] - R[1, 0]) > 1e-12 * max(np.abs(R).max(), 1e-300):
            raise ValidationError("R must be a symmetric 2x2 matrix")
        R = 0.5 * (R + R.T)
        w = np.linalg.eigvalsh(R)
        if w[0] < -1e-10 * max(w[1], 1e-300):
            raise ValidationError("R must be positive semidefinite")
        _check_kernel_condition(R, self.C)
        R.setflags(write=False)
        object.__setattr__(self, "R", R)

    @property
    def C(self):
        return np.array([[self.a, -self.b], [self.b, self.a]])

    @property
    def gamma(self):
        return complex(self.a, self.b)

    @property
    def is_isotropic(self):
        r = 0.5 * np.trace(self.R)
        return np.max(np.abs(self.R - r * np.eye(2))) <= 1e-10 * max(abs(r), 1e-300)

    @property
    def r(self):
        return 0.5 * float(np.trace(self.R))


def _check_kernel_condition(R, C):
    """The kernel of R may not contain a nonzero invariant subspace of C^T."""
    w, V = np.linalg.eigh(R)
    scale = max(abs(w[-1]), 1e-300)
    if w[-1] <= DEGENERACY_RTOL:
        raise DegeneracyError("R = 0: the reduced diffusion vanishes, so the stationary "
                              "covariance would be degenerate")
    if w[0] <= DEGENERACY_RTOL * scale:
        v = V[:, 0]
        Ct_v = C.T @ v
        if np.linalg.norm(Ct_v - (v @ Ct_v) * v) <= 1e-12 * max(np.linalg.norm(C), 1.0):
            raise DegeneracyError("kernel of R contains an invariant direction of C^T")


def _eigenpair_residual(model, x, gamma):
    return np.linalg.norm(model.A.T @ x - gamma * x)


def reduce_1d(model, x0star, gamma):
    """Project the model onto a real eigenvector ``x0star`` of ``A^T``.

    Returns ``Spec1D(gamma, q = <Q x0*, x0*>)``.  ``q`` must be positive: a
    vanishing ``q`` forces ``<Q_inf x0*, x0*> = 0``, i.e. a degenerate
    invariant measure.
    """
    x = np.asarray(x0star, dtype=float)
    if x.shape != (model.n,):
        raise DimensionError(f"x0star must have shape ({model.n},)")
    gamma = float(gamma)
    if _eigenpair_residual(model, x, gamma) > EIGENPAIR_RTOL * np.linalg.norm(x):
        raise ValidationError("x0star is not an eigenvector of A^T for the given gamma")
    if not gamma < 0:
        raise DomainError(f"gamma must be negative, got {gamma}")
    q = float(x @ model.Q @ x)
    floor = DEGENERACY_RTOL * np.linalg.norm(model.Q, 2) * (x @ x)
    if q <= floor:
        raise DegeneracyError(
            f"q = <Q x0*, x0*> = {q:.3g} vanishes; since x0* is an eigenvector of the adjoint "
            "semigroup this would make <Q_inf x0*, x0*> = 0, contradicting nondegeneracy of the "
            "invariant measure")
    x = x.copy()
    x.setflags(write=False)
    return Spec1D(gamma=gamma, q=q, x0star=x)


def reduce_2d(model, x0star, gamma):
    """Project onto ``h1 = Re x0*``, ``h2 = Im x0*`` for a complex eigenpair of ``A^T``."""
    x = np.asarray(x0star, dtype=complex)
    if x.shape != (model.n,):
        raise DimensionError(f"x0star must have shape ({model.n},)")
    gamma = complex(gamma)
    if gamma.imag == 0:
        raise DomainError("gamma is real: use reduce_1d")
    if not gamma.real < 0:
        raise DomainError(f"Re gamma must be negative, got {gamma.real}")
    if _eigenpair_residual(model, x, gamma) > EIGENPAIR_RTOL * np.linalg.norm(x):
        raise ValidationError("x0star is not an eigenvector of A^T for the given gamma")
    h1, h2 = x.real.copy(), x.imag.copy()
    H = np.stack([h1, h2], axis=1)
    R = H.T @ model.Q @ H
    for h in (h1, h2):
        h.setflags(write=False)
    return Spec2D(a=gamma.real, b=gamma.imag, R=0.5 * (R + R.T), h1star=h1, h2star=h2)


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: object
    rhs: object
    deviation: float
    tol: float

    @property
    def passed(self):
        return bool(self.deviation <= self.tol)

    def as_dict(self):
        conv = lambda v: np.asarray(v).tolist()  # noqa: E731
        return {"name": self.name, "lhs": conv(self.lhs), "rhs": conv(self.rhs),
                "deviation": float(self.deviation), "tol": self.tol, "passed": self.passed}


def variance_identity_check(spec, model, tol=1e-8):
    """Compare ``<Q_inf x0*, x0*>`` (Lyapunov) with ``-q / (2 gamma)``."""
    x = spec.x0star
    lhs = float(x @ model.qinf @ x)
    rhs = spec.variance
    return IdentityReport("variance", lhs, rhs, abs(lhs - rhs) / abs(rhs), tol)


def rinf_identity_check(spec, model, s_grid=(0.1, 0.5, 1.0, 2.0), tol=1e-8):
    """Check ``exp(sC) R exp(sC^T)`` against the model's Gram matrix on (h1, h2).

    Returns two reports: the finite-s identity (max over ``s_grid``) and the
    stationary identity ``lyapunov(C, R) == (<Q_inf h_i, h_j>)``.  Deviations
    are entrywise maxima relative to ``max(1, |R|)``.
    """
    H = np.stack([spec.h1star, spec.h2star], axis=1)
    scale = max(1.0, np.abs(spec.R).max())
    worst = 0.0
    lhs_all, rhs_all = [], []
    for s in s_grid:
        E = gauss_core.mat_exp(spec.C, s)
        lhs = E @ spec.R @ E.T
        S = model.exp(s)
        rhs = H.T @ S @ model.Q @ S.T @ H
        worst = max(worst, np.abs(lhs - rhs).max() / scale)
        lhs_all.append(lhs)
        rhs_all.append(rhs)
    finite = IdentityReport("rinf_finite_s", np.array(lhs_all), np.array(rhs_all), worst, tol)
    Rinf = gauss_core.lyapunov_qinf(spec.C, spec.R)
    gram = H.T @ model.qinf @ H
    stationary = IdentityReport("rinf_stationary", Rinf, gram,
                                np.abs(Rinf - gram).max() / max(1.0, np.abs(gram).max()), tol)
    return finite, stationary


def pushforward_law(model, functionals):
    """Law of ``(<x, x_1>, ..., <x, x_k>)`` under the invariant measure."""
    F = np.atleast_2d(np.asarray(functionals, dtype=float))
    if F.shape[1] != model.n:
        raise DimensionError(f"functionals must have {model.n} columns")
    S = F @ model.qinf @ F.T
    return GaussianMeasure(0.5 * (S + S.T))


def require_stable(model):
    if gauss_core.spectral_abscissa(model.A) >= 0:
        raise StabilityError("drift is not stable")
    model.qinf  # noqa: B018 - raises on degeneracy
    return model


# ---------------------------------------------------------------------------
# models with a prescribed eigenpair of A^T


def _embedding(n, k, rng, coupling):
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    K = rng.standard_normal((n - k, n - k)) / math.sqrt(max(n - k, 1))
    if n > k:
        K -= (np.max(np.linalg.eigvals(K).real) + 0.5) * np.eye(n - k)
    Y = coupling * rng.standard_normal((k, n - k))
    return U, K, Y


def model_with_real_eigenpair(gamma, q, n, rng, B=None, coupling=0.5):
    """Random stable model on R^n whose ``A^T`` has eigenpair ``(gamma, x0*)``.

    With the default ``B = I`` the returned ``x0*`` satisfies ``<Q x0*, x0*> = q``.
    Returns ``(model, x0star)``.
    """
    U, K, Y = _embedding(n, 1, rng, coupling)
    At = np.zeros((n, n))
    At[0, 0] = gamma
    At[:1, 1:] = Y
    At[1:, 1:] = K
    At = U @ At @ U.T
    x0 = U[:, 0] * math.sqrt(q)
    model = OUModel(At.T, np.eye(n) if B is None else B)
    return model, x0


def model_with_complex_eigenpair(a, b, n, rng, G=None, B=None, coupling=0.5):
    """Random stable model whose ``A^T`` has eigenvalue ``a + ib``.

    The eigenvector is ``h1 + i h2`` with ``[h1 h2] = U[:, :2] G``; with the
    default ``B = I`` the reduced diffusion is ``R = G^T G`` (``G = I`` gives the
    isotropic case).  Returns ``(model, x0star)``.
    """
    G = np.eye(2) if G is None else np.asarray(G, dtype=float)
    U, K, Y = _embedding(n, 2, rng, coupling)
    Ct = np.array([[a, b], [-b, a]])
    At = np.zeros((n, n))
    At[:2, :2] = G @ Ct @ np.linalg.inv(G)
    At[:2, 2:] = Y
    At[2:, 2:] = K
    At = U @ At @ U.T
    H = U[:, :2] @ G
    model = OUModel(At.T, np.eye(n) if B is None else B)
    return model, H[:, 0] + 1j * H[:, 1]
