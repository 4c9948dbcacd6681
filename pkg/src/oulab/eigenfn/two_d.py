"""Eigenfunctions of the planar OU operator ``1/2 Tr(R D^2) + <C t, D>``.

``C = [[a, -b], [b, a]]`` acts as ``a rho d/drho + b d/dtheta`` in polar
coordinates.  When ``R = r I`` the operator separates: for angular mode m,

    f = rho^|m| exp(kappa rho^2) v(rho) exp(i m theta),   kappa = |a| / r,

and ``v`` solves the regular-singular radial equation

    r/2 (v'' + (2|m|+1) v'/rho) + |a| rho v' + (|a|(|m|+2) - lam') v = 0

with ``lam' = lam - i m b``.  ``v`` decays algebraically, like the scaled
1D solution.  For general ``R`` the exact polynomial eigenfunctions with
eigenvalues ``n1 mu + n2 conj(mu)`` (``mu = a + ib``) are built in ``z, zbar``.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial import Polynomial

from ..errors import DomainError, ScopeError
from ..ou_model import Profile, QuadSpec
from ._common import (SolveOptions, Tabulated, converge_hermite, hermite_standard, integrate_scalar,
                      panel_integrate, panel_nodes)

RHO0 = 1e-4
LATTICE_ATOL = 1e-12
MAX_POLY_DEGREE = 10


def default_mode(spec, lam):
    """Angular mode ``round(Im lam / b)``, ties to even."""
    return int(round(complex(lam).imag / spec.b))


def kummer_polynomial(k, b):
    """``M(-k, b, z)`` as a polynomial in z."""
    coef = [1.0]
    for j in range(k):
        coef.append(coef[-1] * (j - k) / ((b + j) * (j + 1)))
    return Polynomial(coef)


@dataclass(eq=False)
class Eigenfunction2D:
    """Separated eigenfunction ``rho^|m| exp(kappa rho^2) v(rho) e^{i m theta}``."""

    lam: complex
    a: float
    b: float
    r: float
    m: int
    T: float
    kind: str
    table: Tabulated = None
    kummer: Polynomial = None
    tail_estimate: float = 0.0
    tail_converged: bool = True
    opts: SolveOptions = field(default_factory=SolveOptions)

    @property
    def kappa(self):
        return -self.a / self.r

    @property
    def lam_radial(self):
        return self.lam - 1j * self.m * self.b

    @property
    def tail_exponent(self):
        """Power ``s`` with ``|f| rho * density ~ rho^s`` along rays."""
        if self.kind == "poly":
            return -math.inf
        return self.lam.real / abs(self.a) - 1.0

    def scaled_radial(self, rho):
        """``v, v', v''`` at ``rho >= 0``."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == "ode":
            return self.table.eval(rho)
        k = self.kappa
        z = k * rho * rho
        e = np.exp(-z)
        u, u1, u2 = self.kummer(z), self.kummer.deriv(1)(z), self.kummer.deriv(2)(z)
        V1 = (u1 - u) * e
        V2 = (u2 - 2 * u1 + u) * e
        return u * e + 0j, 2 * k * rho * V1 + 0j, 2 * k * V1 + 4 * k * k * rho * rho * V2 + 0j

    def _h(self, rho):
        """``h = exp(kappa rho^2) v`` and its first two radial derivatives."""
        k = self.kappa
        v, v1, v2 = self.scaled_radial(rho)
        with np.errstate(over="ignore", invalid="ignore"):
            E = np.exp(k * rho * rho)
            return (v * E, (v1 + 2 * k * rho * v) * E,
                    (v2 + 4 * k * rho * v1 + (2 * k + 4 * k * k * rho * rho) * v) * E)

    def evaluate(self, U):
        """Value, gradient (N, 2) and Hessian (N, 2, 2) at planar points U."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        s1, s2 = U[:, 0], U[:, 1]
        rho = np.hypot(s1, s2)
        h, h1, h2 = self._h(rho)
        safe = np.where(rho > 1e-8, rho, 1.0)
        h1_over = np.where(rho > 1e-8, h1 / safe, h2)
        e = U / safe[:, None]
        e[rho <= 1e-8] = 0.0
        gh = h1_over[:, None] * U
        Hh = (h1_over[:, None, None] * np.eye(2)
              + (h2 - h1_over)[:, None, None] * e[:, :, None] * e[:, None, :])
        M = abs(self.m)
        sign = 1.0 if self.m >= 0 else -1.0
        w = s1 + 1j * sign * s2
        dw = np.array([1.0, 1j * sign])
        wM = w ** M
        wM1 = M * w ** (M - 1) if M >= 1 else np.zeros_like(w)
        wM2 = M * (M - 1) * w ** (M - 2) if M >= 2 else np.zeros_like(w)
        gw = wM1[:, None] * dw
        Hw = wM2[:, None, None] * np.outer(dw, dw)
        val = h * wM
        grad = gh * wM[:, None] + h[:, None] * gw
        hess = (Hh * wM[:, None, None] + h[:, None, None] * Hw
                + gh[:, :, None] * gw[:, None, :] + gw[:, :, None] * gh[:, None, :])
        return val, grad, hess

    def __call__(self, U):
        return self.evaluate(U)[0]

    def ensure_domain(self, radius):
        if self.kind == "poly" or radius <= self.table.hi:
            return
        self.table = _tabulate(self.a, self.r, self.lam_radial, self.m, math.ceil(1.2 * radius),
                               self.opts)

    def profile(self):
        return _Profile2D(self)


class _Profile2D(Profile):
    arity = 2

    def __init__(self, ef):
        self.ef = ef
        self.growth = "polynomial" if ef.kind == "poly" else "gaussian"

    def evaluate(self, U):
        return self.ef.evaluate(U)


def reduced_generator_2d(spec, profile, U):
    """``1/2 Tr(R D^2 phi) + <C u, D phi>`` from profile oracles."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    _, g, H = profile.evaluate(U)
    return 0.5 * np.einsum("ij,nij->n", spec.R, H) + np.einsum("ni,ni->n", U @ spec.C.T, g)


def _radial_coefficients(a, r, lam_radial, m):
    M = abs(m)
    e0 = 2.0 * (-a * (M + 2) - lam_radial) / r
    return 2 * M + 1.0, 2.0 * (-a) / r, e0


def _tabulate(a, r, lam_radial, m, radius, opts):
    dm1, d1, e0 = _radial_coefficients(a, r, lam_radial, m)
    c2 = -e0 / (2 * abs(m) + 2)
    y0, dy0 = 1.0 + 0.5 * c2 * RHO0 ** 2, c2 * RHO0
    ts, y, dy, d2 = integrate_scalar(dm1, d1, e0, RHO0, radius, y0, dy0, opts)
    parts = [np.concatenate([[x0], arr]) for x0, arr in zip((0.0, 1.0, 0.0, c2), (ts, y, dy, d2))]
    return Tabulated(*parts, tail_power=lam_radial / -a - 2 - abs(m))


def _grid(ef, a, b):
    ts = ef.table.ts if ef.kind == "ode" else np.linspace(0, b, max(2, int(20 * b) + 1))
    inner = ts[(ts > a) & (ts < b)]
    return np.concatenate([[a], inner, [b]])


def _l1_radial(ef, a, b, tol=1e-10):
    p = abs(ef.m) + 1
    return panel_integrate(lambda t: np.abs(ef.scaled_radial(t)[0]) * t ** p, _grid(ef, a, b), tol)


def _choose_T(ef, opts):
    cap = int(opts.T_cap)
    start = int(math.ceil(opts.T_min))
    p = abs(ef.m) + 1
    norm = 0.0
    for T in range(1, cap + 1):
        norm += _l1_radial(ef, T - 1, T)
        if T < start:
            continue
        end = abs(ef.scaled_radial(np.array([float(T)]))[0][0]) * T ** p
        if ef.kind == "ode":
            tail = end * T / (abs(ef.lam.real) / abs(ef.a))
        else:
            tail = end / (2 * ef.kappa * T)
        if tail < opts.tail_rtol * norm or T == cap:
            return float(T), 2 * ef.kappa * tail, bool(tail < opts.tail_rtol * norm)
    raise AssertionError("unreachable")


def solve_2d_isotropic(spec, lam, m=None, opts=SolveOptions()):
    """Separated eigenfunction for ``R = r I`` in angular mode m.

    ``m`` defaults to ``round(Im lam / b)``.  Lattice values
    ``lam - i m b = (2k + |m|) a`` return the Laguerre-type polynomial solution.
    """
    if not spec.is_isotropic:
        raise ScopeError("R is not a multiple of the identity; use weyl_residual_minimize "
                         "or poly_eigen_2d")
    lam = complex(lam)
    if not lam.real < 0:
        raise DomainError(f"need Re(lambda) < 0, got {lam}")
    m = default_mode(spec, lam) if m is None else int(m)
    lam_r = lam - 1j * m * spec.b
    ratio = lam_r / spec.a
    k2 = round(ratio.real) - abs(m)
    common = dict(lam=lam, a=spec.a, b=spec.b, r=spec.r, m=m, T=opts.T_cap, opts=opts)
    if k2 >= 0 and k2 % 2 == 0 and abs(ratio - round(ratio.real)) <= LATTICE_ATOL * max(1, k2):
        ef = Eigenfunction2D(kind="poly", kummer=kummer_polynomial(k2 // 2, abs(m) + 1), **common)
    else:
        table = _tabulate(spec.a, spec.r, lam_r, m, opts.T_cap * 1.5, opts)
        ef = Eigenfunction2D(kind="ode", table=table, **common)
    ef.T, ef.tail_estimate, ef.tail_converged = _choose_T(ef, opts)
    return ef


def l1_norm_2d(ef, T=None):
    """Truncated ``L1(nu_inf)`` norm over the disc of radius T."""
    T = ef.T if T is None else T
    ef.ensure_domain(T)
    return 2 * ef.kappa * _l1_radial(ef, 0.0, T)


def lp_truncated_norms_2d(ef, p, T_list):
    """``int_{|t| <= T} |f|^p d nu_inf`` for each T in ``T_list`` (increasing)."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    T_list = [float(T) for T in T_list]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise DomainError("T_list must be increasing")
    ef.ensure_domain(T_list[-1])
    k, M = ef.kappa, abs(ef.m)

    def integrand(t):
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(ef.scaled_radial(t)[0])) + M * np.log(t)
        with np.errstate(over="ignore"):
            return np.exp(p * log_abs + (p - 1) * k * t * t) * t

    out, total, prev = [], 0.0, 0.0
    for T in T_list:
        total += panel_integrate(integrand, _grid(ef, prev, T), tol=1e-10)
        prev = T
        out.append(2 * k * total)
    return out


def residual_generator_2d(spec, ef):
    """Relative ``L1(nu_inf)`` residual of ``(L2 - lam) f`` on the disc of radius T."""
    dm1, d1, e0 = _radial_coefficients(ef.a, ef.r, ef.lam_radial, ef.m)
    p = abs(ef.m) + 1

    def res(t):
        v, v1, v2 = ef.scaled_radial(t)
        return np.abs(v2 + (dm1 / t + d1 * t) * v1 + e0 * v) * (0.5 * ef.r) * t ** p

    return panel_integrate(res, _grid(ef, 0.0, ef.T), tol=None) / _l1_radial(ef, 0.0, ef.T)


def semigroup_time_limit(a):
    return math.log(5.0) / (2.0 * abs(a))


def residual_semigroup_2d(spec, ef, t, quad=QuadSpec(start_order=16, max_order=128)):
    """Relative ``L1(nu_inf)`` norm of ``P(t) f - exp(lam t) f`` on the disc of radius T.

    Both sides carry the factor ``e^{i m theta}``, so the comparison runs
    along the ray theta = 0.  The Mehler integral is taken in scaled form,
    ``P(t)f(x) exp(-kappa|x|^2) = c^2 e^{imbt} E F(c (x + sigma W))`` with
    ``F = rho^|m| v e^{i m theta}`` and ``c = exp(|a| t)``.
    """
    if t == 0:
        return 0.0
    t_max = semigroup_time_limit(spec.a)
    if t < 0 or t > t_max * (1 + 1e-12):
        raise DomainError(f"t must lie in (0, {t_max:.6g}] for a certified Mehler quadrature")
    g = abs(spec.a)
    sigma = math.sqrt(spec.r * (1 - math.exp(-2 * g * t)) / (2 * g))
    c = math.exp(g * t)
    ef.ensure_domain(c * (ef.T + 10 * sigma))
    edges = np.linspace(0.0, ef.T, int(round(2 * ef.T)) + 1)
    rho, ws = panel_nodes(edges[:-1], edges[1:], 8)
    M = abs(ef.m)
    sign = 1.0 if ef.m >= 0 else -1.0

    def F(y1, y2):
        rr = np.hypot(y1, y2)
        return ef.scaled_radial(rr)[0] * (y1 + 1j * sign * y2) ** M

    def evaluate(order):
        w, W = hermite_standard(order)
        W1, W2 = np.meshgrid(w, w, indexing="ij")
        WW = np.outer(W, W).ravel()
        y1 = c * (rho[:, None] + sigma * W1.ravel()[None, :])
        y2 = c * sigma * W2.ravel()[None, :]
        return F(y1, y2) @ WW

    inner = converge_hermite(evaluate, quad.tol, quad.start_order, quad.max_order)
    lhs = c * c * np.exp(1j * ef.m * spec.b * t) * inner
    rhs = np.exp(ef.lam * t) * ef.scaled_radial(rho)[0] * rho ** M
    return np.sum(ws * rho * np.abs(lhs - rhs)) / np.sum(ws * rho * np.abs(rhs))


@dataclass(eq=False)
class PolyEigen2D:
    """Polynomial eigenfunction ``sum c[j, k] z^j zbar^k`` with ``z = t1 + i t2``.

    Leading term ``z^n1 zbar^n2``; eigenvalue ``n1 mu + n2 conj(mu)``.
    """

    n1: int
    n2: int
    lam: complex
    coef: np.ndarray
    kind = "poly"

    def _zpoly(self, z, zb, dj, dk):
        out = np.zeros_like(z, dtype=complex)
        for (j, k), c in np.ndenumerate(self.coef):
            if c == 0 or j < dj or k < dk:
                continue
            fj = math.perm(j, dj)
            fk = math.perm(k, dk)
            out = out + c * fj * fk * z ** (j - dj) * zb ** (k - dk)
        return out

    def evaluate(self, U):
        U = np.atleast_2d(np.asarray(U, dtype=float))
        z = U[:, 0] + 1j * U[:, 1]
        zb = np.conj(z)
        P = {(dj, dk): self._zpoly(z, zb, dj, dk) for dj in range(3) for dk in range(3) if dj + dk <= 2}
        # d/dt1 = dz + dzb, d/dt2 = i (dz - dzb)
        g = np.stack([P[1, 0] + P[0, 1], 1j * (P[1, 0] - P[0, 1])], axis=1)
        h11 = P[2, 0] + 2 * P[1, 1] + P[0, 2]
        h12 = 1j * (P[2, 0] - P[0, 2])
        h22 = -(P[2, 0] - 2 * P[1, 1] + P[0, 2])
        H = np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)
        return P[0, 0], g, H

    def __call__(self, U):
        return self.evaluate(U)[0]

    def profile(self):
        return _Profile2D(self)


def poly_eigen_2d(spec, n1, n2):
    """Exact polynomial eigenfunction with leading term ``z^n1 zbar^n2`` (any PSD R)."""
    if n1 < 0 or n2 < 0 or n1 + n2 > MAX_POLY_DEGREE:
        raise DomainError(f"need n1, n2 >= 0 and n1 + n2 <= {MAX_POLY_DEGREE}")
    mu = complex(spec.a, spec.b)
    lam = n1 * mu + n2 * mu.conjugate()
    R = spec.R
    alpha = 0.5 * (R[0, 0] - R[1, 1] + 2j * R[0, 1])
    beta = 0.5 * (R[0, 0] - R[1, 1] - 2j * R[0, 1])
    delta = R[0, 0] + R[1, 1]
    c = np.zeros((n1 + 1, n2 + 1), dtype=complex)
    c[n1, n2] = 1.0
    for deg in range(n1 + n2 - 1, -1, -1):
        for j in range(min(deg, n1), -1, -1):
            k = deg - j
            if k > n2:
                continue
            acc = 0j
            if j + 2 <= n1:
                acc += alpha * (j + 2) * (j + 1) * c[j + 2, k]
            if k + 2 <= n2:
                acc += beta * (k + 2) * (k + 1) * c[j, k + 2]
            if j + 1 <= n1 and k + 1 <= n2:
                acc += delta * (j + 1) * (k + 1) * c[j + 1, k + 1]
            if acc != 0:
                c[j, k] = acc / (lam - j * mu - k * mu.conjugate())
    return PolyEigen2D(n1=n1, n2=n2, lam=lam, coef=c)
