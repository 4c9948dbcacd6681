"""Eigenfunctions of the one-dimensional OU operator ``q/2 phi'' + gamma t phi'``.

For ``Re lam < 0`` the even solution with ``phi(0) = 1, phi'(0) = 0`` grows
like ``exp(kappa t^2) |t|^(lam/|gamma| - 1)`` (``kappa = |gamma|/q``) and is
integrable against the stationary density ``~ exp(-kappa t^2)``.  To avoid
overflow the solver integrates the density-scaled function
``psi = phi * exp(-kappa t^2)``, which satisfies

    q/2 psi'' + |gamma| t psi' + (|gamma| - lam) psi = 0

and decays algebraically.  At the lattice ``lam = n gamma`` the polynomial
(Hermite) solution is used instead.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial import Polynomial

from ..errors import DomainError
from ..ou_model import Profile, QuadSpec
from ._common import (SolveOptions, Tabulated, converge_hermite, hermite_standard, integrate_scalar,
                      panel_integrate, panel_nodes)

LATTICE_ATOL = 1e-12
MAX_HERMITE_DEGREE = 20


def lattice_index(gamma, lam, max_degree=MAX_HERMITE_DEGREE):
    """Return n if ``lam == n * gamma`` (to round-off), else None."""
    ratio = complex(lam) / gamma
    n = round(ratio.real)
    if 0 <= n <= max_degree and abs(ratio - n) <= LATTICE_ATOL * max(1, n):
        return n
    return None


@dataclass(eq=False)
class Eigenfunction1D:
    """Tabulated or polynomial eigenfunction of the 1D reduced operator.

    ``T`` is the half-width of the domain used for truncated norms; the
    underlying table may extend further (it is grown on demand).
    """

    lam: complex
    gamma: float
    q: float
    T: float
    kind: str
    init: tuple = (1.0, 0.0)
    table: Tabulated = None
    poly: Polynomial = None
    tail_estimate: float = 0.0  # in units of the L1(nu_inf) norm
    tail_converged: bool = True
    opts: SolveOptions = field(default_factory=SolveOptions)

    @property
    def kappa(self):
        return -self.gamma / self.q

    @property
    def tail_exponent(self):
        """Power ``s`` with ``|phi(t)| * density ~ |t|^s`` for large |t|."""
        if self.kind == "poly":
            return -math.inf
        return self.lam.real / abs(self.gamma) - 1.0

    @property
    def grid(self):
        if self.kind == "poly":
            return np.linspace(-self.T, self.T, int(40 * self.T) + 1)
        ts = self.table.ts
        return ts[(ts >= -self.T) & (ts <= self.T)]

    @property
    def values(self):
        return self(self.grid)

    @property
    def derivs(self):
        return self.derivatives(self.grid)[1]

    def scaled(self, t):
        """``psi = phi * exp(-kappa t^2)`` and its first two derivatives."""
        t = np.asarray(t, dtype=float)
        if self.kind == "ode":
            return self.table.eval(t)
        k = self.kappa
        e = np.exp(-k * t * t)
        p, p1, p2 = self.poly(t), self.poly.deriv(1)(t), self.poly.deriv(2)(t)
        return (p * e + 0j, (p1 - 2 * k * t * p) * e + 0j,
                (p2 - 4 * k * t * p1 + (4 * k * k * t * t - 2 * k) * p) * e + 0j)

    def derivatives(self, t):
        """``phi, phi', phi''`` at ``t``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "poly":
            return (self.poly(t) + 0j, self.poly.deriv(1)(t) + 0j, self.poly.deriv(2)(t) + 0j)
        k = self.kappa
        psi, psi1, psi2 = self.scaled(t)
        with np.errstate(over="ignore", invalid="ignore"):
            E = np.exp(k * t * t)
            return (psi * E, (psi1 + 2 * k * t * psi) * E,
                    (psi2 + 4 * k * t * psi1 + (2 * k + 4 * k * k * t * t) * psi) * E)

    def __call__(self, t):
        return self.derivatives(t)[0]

    def ensure_domain(self, half_width):
        """Grow the table so it covers ``[-half_width, half_width]``."""
        if self.kind == "poly" or half_width <= min(self.table.hi, -self.table.lo):
            return
        self.table = _tabulate(self.gamma, self.q, self.lam, self.init,
                               math.ceil(1.2 * half_width), self.opts)

    def profile(self):
        return _Profile1D(self)


class _Profile1D(Profile):
    arity = 1

    def __init__(self, ef):
        self.ef = ef
        self.growth = "polynomial" if ef.kind == "poly" else "gaussian"

    def evaluate(self, U):
        u = np.asarray(U, dtype=float)[:, 0]
        p0, p1, p2 = self.ef.derivatives(u)
        return p0, p1[:, None], p2[:, None, None]


def reduced_generator_1d(spec, profile, u):
    """``(L1 phi)(u) = q/2 phi''(u) + gamma u phi'(u)`` from profile oracles."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    _, g, H = profile.evaluate(u[:, None])
    return 0.5 * spec.q * H[:, 0, 0] + spec.gamma * u * g[:, 0]


def _tabulate(gamma, q, lam, init, half_width, opts):
    kappa = -gamma / q
    e0 = 2.0 * (-gamma - lam) / q
    pos = integrate_scalar(0.0, 2 * kappa, e0, 0.0, half_width, init[0], init[1], opts)
    neg = integrate_scalar(0.0, 2 * kappa, e0, 0.0, -half_width, init[0], init[1], opts)
    parts = [np.concatenate([n[:0:-1], p]) for n, p in zip(neg, pos)]
    return Tabulated(*parts, tail_power=lam / -gamma - 1.0)


def _edges(ts, a, b):
    inner = ts[(ts > a) & (ts < b)]
    return np.concatenate([[a], inner, [b]])


def _l1_scaled(ef, a, b, tol=1e-10):
    """``int_a^b |psi|`` (the L1(nu) norm up to the constant sqrt(kappa/pi))."""
    ts = ef.table.ts if ef.kind == "ode" else np.linspace(a, b, max(2, int(20 * (b - a)) + 1))
    return panel_integrate(lambda t: np.abs(ef.scaled(t)[0]), _edges(ts, a, b), tol)


def _choose_T(ef, opts):
    """Smallest integer T >= T_min whose estimated tail is < tail_rtol of the norm."""
    cap = int(opts.T_cap)
    start = int(math.ceil(opts.T_min))
    slabs_pos = [_l1_scaled(ef, k, k + 1) for k in range(cap)]
    slabs_neg = [_l1_scaled(ef, -k - 1, -k) for k in range(cap)]
    decay = abs(ef.lam.real) / abs(ef.gamma) if ef.kind == "ode" else None
    norm = 0.0
    for T in range(1, cap + 1):
        norm += slabs_pos[T - 1] + slabs_neg[T - 1]
        if T < start:
            continue
        ends = np.abs(ef.scaled(np.array([-T, T], dtype=float))[0]).sum()
        if ef.kind == "ode":
            tail = ends * T / decay
        else:
            tail = ends / (2 * ef.kappa * T)
        if tail < opts.tail_rtol * norm or T == cap:
            const = math.sqrt(ef.kappa / math.pi)
            return float(T), const * tail, bool(tail < opts.tail_rtol * norm), const * norm
    raise AssertionError("unreachable")


def solve_1d(spec, lam, opts=SolveOptions(), init=(1.0, 0.0), lattice=True):
    """Eigenfunction of ``L1`` for eigenvalue ``lam`` (``Re lam < 0``).

    Lattice values ``lam = n gamma`` return the degree-n polynomial solution
    unless ``lattice=False``.  Otherwise the scaled ODE is integrated outward from 0 in both directions
    with initial data ``init = (phi(0), phi'(0))`` and the truncation
    half-width ``T`` is chosen from the power-law tail estimate.
    """
    lam = complex(lam)
    if not lam.real < 0:
        raise DomainError(f"need Re(lambda) < 0, got {lam}")
    n = lattice_index(spec.gamma, lam) if lattice else None
    if n is not None:
        return hermite_case(spec, n, opts)
    table = _tabulate(spec.gamma, spec.q, lam, init, opts.T_cap * 1.5, opts)
    ef = Eigenfunction1D(lam=lam, gamma=spec.gamma, q=spec.q, T=opts.T_cap, kind="ode",
                         init=tuple(init), table=table, opts=opts)
    ef.T, ef.tail_estimate, ef.tail_converged, _ = _choose_T(ef, opts)
    return ef


def hermite_polynomial(n, kappa):
    """Monic polynomial eigenfunction of degree n (eigenvalue ``n gamma``).

    Recurrence ``p_{k+1}(t) = t p_k(t) - k/(2 kappa) p_{k-1}(t)``; this is the
    physicists' Hermite polynomial in ``sqrt(kappa) t`` divided by its leading
    coefficient.
    """
    t = Polynomial([0.0, 1.0])
    prev, cur = Polynomial([0.0]), Polynomial([1.0])
    for k in range(n):
        prev, cur = cur, t * cur - (k / (2 * kappa)) * prev
    return cur


def hermite_case(spec, n, opts=SolveOptions()):
    if not 0 <= n <= MAX_HERMITE_DEGREE:
        raise DomainError(f"Hermite degree must lie in [0, {MAX_HERMITE_DEGREE}], got {n}")
    poly = hermite_polynomial(n, spec.kappa)
    init = (complex(poly(0.0)), complex(poly.deriv(1)(0.0)))
    ef = Eigenfunction1D(lam=complex(n * spec.gamma), gamma=spec.gamma, q=spec.q, T=opts.T_cap,
                         kind="poly", init=init, poly=poly, opts=opts)
    ef.T, ef.tail_estimate, ef.tail_converged, _ = _choose_T(ef, opts)
    return ef


def l1_norm(ef, T=None):
    """Truncated ``L1(nu_inf)`` norm over ``[-T, T]`` (default: ``ef.T``)."""
    T = ef.T if T is None else T
    ef.ensure_domain(T)
    return math.sqrt(ef.kappa / math.pi) * _l1_scaled(ef, -T, T)


def residual_generator_1d(spec, ef):
    """``|| (L1 - lam) phi ||_1 / || phi ||_1`` over ``[-T, T]`` in ``L1(nu_inf)``.

    Uses the tabulated state ``(psi, psi', psi'')`` through its quintic
    Hermite interpolant, so the residual measures how well the table
    satisfies the ODE between integrator nodes.
    """
    g = abs(spec.gamma)
    lam = ef.lam

    def res(t):
        psi, psi1, psi2 = ef.scaled(t)
        return np.abs(0.5 * spec.q * psi2 + g * t * psi1 + (g - lam) * psi)

    ts = ef.table.ts if ef.kind == "ode" else np.linspace(-ef.T, ef.T, int(20 * ef.T) + 1)
    edges = _edges(ts, -ef.T, ef.T)
    return panel_integrate(res, edges, tol=None) / _l1_scaled(ef, -ef.T, ef.T)


def semigroup_time_limit(gamma):
    """Largest t with transition variance <= 0.8 x stationary variance."""
    return math.log(5.0) / (2.0 * abs(gamma))


def residual_semigroup_1d(spec, ef, t, quad=QuadSpec(start_order=32)):
    """``|| P(t) phi - exp(lam t) phi ||_1 / || phi ||_1`` over ``[-T, T]``.

    For tabulated solutions the Mehler integral is rewritten for the scaled
    function: ``P(t)phi(x) exp(-kappa x^2) = c E psi(c (x + sigma W))`` with
    ``c = exp(|gamma| t)`` and ``sigma^2 = q (1 - exp(2 gamma t)) / (2|gamma|)``,
    which keeps the Gauss-Hermite integrand bounded.
    """
    if t == 0:
        return 0.0
    t_max = semigroup_time_limit(spec.gamma)
    if t < 0 or t > t_max * (1 + 1e-12):
        raise DomainError(f"t must lie in (0, {t_max:.6g}] for a certified Mehler quadrature")
    g = abs(spec.gamma)
    sigma = math.sqrt(spec.q * (1 - math.exp(-2 * g * t)) / (2 * g))
    edges = np.linspace(-ef.T, ef.T, int(round(8 * ef.T)) + 1)
    xs, ws = panel_nodes(edges[:-1], edges[1:], 8)
    growth = np.exp(ef.lam * t)
    if ef.kind == "ode":
        c = math.exp(g * t)
        ef.ensure_domain(c * (ef.T + 10 * sigma))

        def evaluate(order):
            w, W = hermite_standard(order)
            return c * (ef.scaled(c * (xs[:, None] + sigma * w[None, :]))[0] @ W)

        lhs = converge_hermite(evaluate, quad.tol, quad.start_order, quad.max_order)
        psi = ef.scaled(xs)[0]
        return np.sum(ws * np.abs(lhs - growth * psi)) / np.sum(ws * np.abs(psi))

    m = math.exp(-g * t)

    def evaluate(order):
        w, W = hermite_standard(order)
        return ef(m * xs[:, None] + sigma * w[None, :]) @ W

    lhs = converge_hermite(evaluate, quad.tol, quad.start_order, quad.max_order)
    weight = np.exp(-ef.kappa * xs * xs)
    phi = ef(xs)
    return np.sum(ws * weight * np.abs(lhs - growth * phi)) / np.sum(ws * weight * np.abs(phi))


def lp_truncated_norms(spec, ef, p, T_list):
    """``int_{-T}^{T} |phi|^p d nu_inf`` for each T in ``T_list`` (increasing)."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    T_list = [float(T) for T in T_list]
    if any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise DomainError("T_list must be increasing")
    ef.ensure_domain(T_list[-1])
    k = ef.kappa
    const = math.sqrt(k / math.pi)
    ts = ef.table.ts if ef.kind == "ode" else np.linspace(-T_list[-1], T_list[-1],
                                                          int(40 * T_list[-1]) + 1)

    def integrand(t):
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(ef.scaled(t)[0]))
        with np.errstate(over="ignore"):
            return np.exp(p * log_abs + (p - 1) * k * t * t)

    out, total, prev = [], 0.0, 0.0
    for T in T_list:
        for a, b in ((-T, -prev), (prev, T)):
            if b > a:
                total += panel_integrate(integrand, _edges(ts, a, b), tol=1e-10)
        prev = T
        out.append(const * total)
    return out
