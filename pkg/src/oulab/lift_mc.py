"""Lifting reduced profiles to R^n and Monte Carlo checks on the full model.

Reduced eigenfunctions live on the one- or two-dimensional pushforward of
the invariant measure; :func:`lift` composes them with the functionals to
get cylinder functions on R^n.  The samplers here draw from the exact
Gaussian transition law (authoritative) or run Euler-Maruyama (an
independent discretisation used only as a cross-check).

Paths are generated in batches of ``SimConfig.batch`` rows; batch ``b`` uses
``numpy.random.default_rng(seed ^ (b << 32))``, so results depend on the
seed and the batch size but not on how batches are scheduled.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import gauss_core
from .eigenfn import reduced_generator_1d, reduced_generator_2d
from .eigenfn._common import panel_integrate
from .errors import ConfigError, DimensionError, DomainError
from .ou_model import (CylinderFunction, Profile, QuadSpec, Spec1D, Spec2D,
                       gaussian_expectation, generator_apply, pushforward_law)

MC_SAFE = ("compact", "bounded", "polynomial")


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 1.0
    steps: int = 100
    n_paths: int = 10_000
    seed: int = 0
    method: str = "exact"
    batch: int = 50_000

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ConfigError(f"steps must be positive, got {self.steps}")
        if self.n_paths < 100:
            raise ConfigError(f"n_paths must be at least 100, got {self.n_paths}")
        if self.batch < 1:
            raise ConfigError("batch must be positive")
        if self.method not in ("exact", "euler"):
            raise ConfigError(f"method must be 'exact' or 'euler', got {self.method!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.method == "euler" and self.horizon / self.steps > 0.1:
            raise ConfigError(f"Euler step {self.horizon / self.steps:g} exceeds 0.1")

    def batches(self):
        """``(rng, size)`` per batch, in order."""
        out = []
        for b, start in enumerate(range(0, self.n_paths, self.batch)):
            size = min(self.batch, self.n_paths - start)
            out.append((np.random.default_rng(self.seed ^ (b << 32)), size))
        return out


@dataclass(frozen=True)
class MCEstimate:
    value: complex
    stderr: float
    n_paths: int

    @classmethod
    def from_samples(cls, values):
        v = np.asarray(values)
        n = v.size
        mean = v.mean()
        var = np.sum(np.abs(v - mean) ** 2) / max(n - 1, 1)
        if np.isrealobj(v):
            mean = float(mean)
        return cls(mean, math.sqrt(var / n), n)

    def __sub__(self, other):
        return MCEstimate(self.value - other.value, math.hypot(self.stderr, other.stderr),
                          min(self.n_paths, other.n_paths))


# ---------------------------------------------------------------------------
# lifting


def _profile_of(obj):
    if isinstance(obj, Profile):
        return obj
    if hasattr(obj, "profile"):
        return obj.profile()
    raise TypeError(f"cannot make a profile from {type(obj).__name__}")


def lift(profile, functionals):
    """Cylinder function ``x -> phi(<x, x_1>[, <x, x_2>])``."""
    return CylinderFunction(functionals, _profile_of(profile))


def lift_spec(profile, spec):
    """Lift along the functionals stored on a reduced spec."""
    if isinstance(spec, Spec1D):
        if spec.x0star is None:
            raise DomainError("spec has no functional attached")
        return lift(profile, np.atleast_2d(spec.x0star))
    if spec.h1star is None or spec.h2star is None:
        raise DomainError("spec has no functionals attached")
    return lift(profile, np.stack([spec.h1star, spec.h2star]))


def reduced_apply(spec, profile, U):
    """Reduced generator applied through profile oracles."""
    profile = _profile_of(profile)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if isinstance(spec, Spec1D):
        return reduced_generator_1d(spec, profile, U[:, 0])
    if isinstance(spec, Spec2D):
        return reduced_generator_2d(spec, profile, U)
    raise TypeError("spec must be Spec1D or Spec2D")


@dataclass(frozen=True)
class LiftReport:
    max_deviation: float
    max_relative: float
    probes: int
    tol: float

    @property
    def passed(self):
        return self.max_relative <= self.tol


def lifting_identity_check(model, spec, profile, X, tol=1e-8):
    """Compare the full generator of the lift with the reduced generator at rows of X.

    The relative deviation is measured against ``max(1, |L phi|)`` per probe.
    """
    f = lift_spec(profile, spec)
    X = np.atleast_2d(X)
    full = generator_apply(model, f, X)
    reduced = reduced_apply(spec, f.profile, f.coords(X))
    dev = np.abs(full - reduced)
    rel = dev / np.maximum(1.0, np.abs(reduced))
    return LiftReport(float(dev.max()), float(rel.max()), X.shape[0], tol)


# ---------------------------------------------------------------------------
# samplers


def _start(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise DimensionError(f"x must have shape ({model.n},)")
    return x


def simulate_exact(model, x, t, cfg):
    """``cfg.n_paths`` draws of ``U_t(x) = exp(tA) x + N(0, Q_t)`` (rows)."""
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    x = _start(model, x)
    if t == 0:
        return np.tile(x, (cfg.n_paths, 1))
    mean = model.exp(t) @ x
    L = model.transition_measure(t).factor()
    out = []
    for rng, size in cfg.batches():
        out.append(mean + rng.standard_normal((size, model.n)) @ L.T)
    return np.concatenate(out)


def simulate_euler(model, x, t, cfg):
    """Euler-Maruyama with ``cfg.steps`` steps of size ``t / cfg.steps``.

    Weak order one: the mean bias is ``(I + h A)^N x - exp(tA) x = O(h)``;
    :func:`euler_moment_bias` gives the exact first and second moment bias.
    """
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    x = _start(model, x)
    h = t / cfg.steps
    if h > 0.1:
        raise ConfigError(f"Euler step {h:g} exceeds 0.1")
    step = np.eye(model.n) + h * model.A
    noise = math.sqrt(h) * model.B
    out = []
    for rng, size in cfg.batches():
        X = np.tile(x, (size, 1))
        for _ in range(cfg.steps):
            X = X @ step.T + rng.standard_normal((size, model.m)) @ noise.T
        out.append(X)
    return np.concatenate(out)


def simulate(model, x, t, cfg):
    return simulate_exact(model, x, t, cfg) if cfg.method == "exact" else simulate_euler(model, x, t, cfg)


def euler_moment_bias(model, x, t, steps):
    """``(mean_bias, cov_bias)`` of the Euler law against the exact law."""
    x = _start(model, x)
    h = t / steps
    S = np.eye(model.n) + h * model.A
    m = x.copy()
    P = np.zeros((model.n, model.n))
    for _ in range(steps):
        m = S @ m
        P = S @ P @ S.T + h * model.Q
    return m - model.exp(t) @ x, P - model.gramian(t)


@dataclass(frozen=True)
class MomentReport:
    mean_z: float
    cov_z: float
    band: float

    @property
    def passed(self):
        return self.mean_z <= self.band and self.cov_z <= self.band


def compare_moments(a, b, mean_bias=None, cov_bias=None, band=3.0):
    """Largest standardised gap in first and second moments between two samples.

    Each gap is reduced by the known deterministic bias before dividing by
    the combined standard error, i.e. the test is ``|diff| <= band * se + |bias|``.
    """
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    n = a.shape[1]
    mean_bias = np.zeros(n) if mean_bias is None else np.asarray(mean_bias)
    cov_bias = np.zeros((n, n)) if cov_bias is None else np.asarray(cov_bias)

    def stats(Z):
        m = Z.mean(axis=0)
        C = Z - m
        prods = C[:, :, None] * C[:, None, :]
        return (m, Z.std(axis=0, ddof=1) / math.sqrt(len(Z)),
                prods.mean(axis=0), prods.std(axis=0, ddof=1) / math.sqrt(len(Z)))

    ma, sa, Ca, sCa = stats(a)
    mb, sb, Cb, sCb = stats(b)
    se_m = np.hypot(sa, sb)
    se_C = np.hypot(sCa, sCb)
    gap_m = np.maximum(np.abs(ma - mb) - np.abs(mean_bias), 0.0)
    gap_C = np.maximum(np.abs(Ca - Cb) - np.abs(cov_bias), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        zm = np.where(gap_m > 0, gap_m / se_m, 0.0)
        zC = np.where(gap_C > 0, gap_C / se_C, 0.0)
    return MomentReport(float(np.max(zm)), float(np.max(zC)), band)


# ---------------------------------------------------------------------------
# Monte Carlo functionals


def _require_mc_safe(f):
    growth = getattr(f.profile, "growth", "unknown")
    if growth not in MC_SAFE:
        raise DomainError(
            f"profile growth {growth!r} is not admissible for Monte Carlo (needs compact, bounded "
            "or polynomial); validate eigenfunctions by quadrature or truncate them first")


def mc_semigroup(model, f, t, x, cfg):
    """Monte Carlo ``E f(U_t(x))`` from the exact sampler."""
    _require_mc_safe(f)
    return MCEstimate.from_samples(f(simulate_exact(model, x, t, cfg)))


@dataclass(frozen=True)
class InvarianceReport:
    transported: MCEstimate
    stationary: MCEstimate
    difference: complex
    stderr: float
    band: float = 3.0

    @property
    def passed(self):
        return abs(self.difference) <= self.band * self.stderr


def _gaussian_rows(cov, cfg, salt):
    L = gauss_core.GaussianMeasure(cov).factor()
    out = []
    for b, (_, size) in enumerate(cfg.batches()):
        rng = np.random.default_rng((cfg.seed ^ (b << 32), salt))
        out.append(rng.standard_normal((size, L.shape[0])) @ L.T)
    return np.concatenate(out)


def invariance_test(model, f, t, cfg, cov_scale=1.0):
    """Check ``int P(t) f d mu = int f d mu`` with ``mu = N(0, cov_scale * Q_inf)``.

    The left side draws ``X ~ mu`` and one transition ``Y | X`` per path
    (nested sampling); the right side uses an independent sample of ``mu``.
    ``cov_scale != 1`` is a negative control: the law is then not invariant.
    """
    _require_mc_safe(f)
    cov = cov_scale * model.qinf
    X = _gaussian_rows(cov, cfg, 1)
    if t > 0:
        Z = _gaussian_rows(model.gramian(t), cfg, 2)
        X = X @ model.exp(t).T + Z
    Y = _gaussian_rows(cov, cfg, 3)
    lhs = MCEstimate.from_samples(f(X))
    rhs = MCEstimate.from_samples(f(Y))
    diff = lhs - rhs
    return InvarianceReport(lhs, rhs, diff.value, diff.stderr)


@dataclass(frozen=True)
class PushforwardReport:
    reduced: float
    lifted: MCEstimate
    band: float = 3.0

    @property
    def passed(self):
        gap = abs(self.reduced - self.lifted.value)
        return gap <= self.band * self.lifted.stderr + 1e-12 * max(1.0, abs(self.reduced))


class _AbsProfile(Profile):
    def __init__(self, profile):
        self.inner = profile
        self.arity = profile.arity
        self.support_radius = profile.support_radius

    def evaluate(self, U):
        v = np.abs(self.inner.evaluate(U)[0])
        return v, None, None


def pushforward_equivalence_check(model, functionals, profile, cfg, quad=QuadSpec(tol=1e-8)):
    """``int |phi| d nu`` (quadrature on the pushforward) vs ``int |f| d mu`` (MC on R^n)."""
    f = lift(profile, functionals)
    _require_mc_safe(f)
    cov = pushforward_law(model, f.functionals).cov
    zero = np.zeros((1, f.k))
    reduced = float(gaussian_expectation(_AbsProfile(f.profile), zero, cov, quad)[0].real)
    X = _gaussian_rows(model.qinf, cfg, 4)
    lifted = MCEstimate.from_samples(np.abs(f(X)))
    return PushforwardReport(reduced, lifted)


# ---------------------------------------------------------------------------
# contraction and truncated eigenfunctions


@dataclass(frozen=True)
class ContractionReport:
    norm_f: float
    norm_pf: float
    p: float

    @property
    def passed(self):
        return self.norm_pf <= self.norm_f * (1 + 1e-8)


def contraction_check(model, f, t, p=1.0, quad=QuadSpec(tol=1e-7)):
    """``||P(t) f||_{L^p(mu)} <= ||f||_{L^p(mu)}`` by nested quadrature.

    Under the invariant measure ``P(t) f(x)`` depends on x only through
    ``w = (<exp(tA) x, x_j>)``, a centred Gaussian with covariance
    ``F (Q_inf - Q_t) F^T``; the inner expectation adds ``N(0, F Q_t F^T)``.
    """
    if p < 1:
        raise DomainError(f"need p >= 1, got {p}")
    prof = f.profile
    cov = pushforward_law(model, f.functionals).cov
    inner_cov = f.functionals @ model.gramian(t) @ f.functionals.T
    inner_cov = 0.5 * (inner_cov + inner_cov.T)
    outer_cov = cov - inner_cov
    zero = np.zeros((1, f.k))

    class _Pow(Profile):
        arity = f.k

        def __init__(self, fn, support_radius=math.inf):
            self.fn = fn
            self.support_radius = support_radius

        def evaluate(self, U):
            return np.abs(self.fn(U)) ** p, None, None

    norm_f = gaussian_expectation(_Pow(lambda U: prof.evaluate(U)[0], prof.support_radius),
                                  zero, cov, quad)[0].real
    transported = _Pow(lambda U: gaussian_expectation(prof, U, inner_cov, quad))
    norm_pf = gaussian_expectation(transported, zero, outer_cov, quad)[0].real
    return ContractionReport(float(norm_f ** (1 / p)), float(norm_pf ** (1 / p)), p)


def smoothstep5(s):
    """Quintic smoothstep: 0 for s <= 0, 1 for s >= 1, C^2 in between."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s * s)


def truncate(profile, radius, scale=1.0):
    """``chi_R phi`` with ``chi_R(u) = 1 - smoothstep5((|u|/scale) - (R - 1))``.

    ``radius`` and the unit-width transition are measured in units of
    ``scale`` (typically the standard deviation of the pushforward law).
    """
    inner = _profile_of(profile)
    R, c = float(radius), float(scale)

    def cut(U):
        r = np.linalg.norm(U, axis=1) / c
        s = np.clip(r - (R - 1), 0.0, 1.0)
        chi = 1 - s ** 3 * (10 - 15 * s + 6 * s * s)
        d1 = -30 * s * s * (1 - s) ** 2 / c
        d2 = -60 * s * (1 - s) * (1 - 2 * s) / (c * c)
        return r * c, chi, d1, d2

    def parts(U):
        rr, chi, d1, d2 = cut(U)
        v, g, H = inner.evaluate(U)
        safe = np.where(rr > 0, rr, 1.0)
        e = U / safe[:, None]
        gchi = d1[:, None] * e
        k = U.shape[1]
        Hchi = (d2[:, None, None] * e[:, :, None] * e[:, None, :]
                + (d1 / safe)[:, None, None] * (np.eye(k) - e[:, :, None] * e[:, None, :]))
        val = chi * v
        grad = chi[:, None] * g + v[:, None] * gchi
        hess = (chi[:, None, None] * H + v[:, None, None] * Hchi
                + g[:, :, None] * gchi[:, None, :] + gchi[:, :, None] * g[:, None, :])
        return val, grad, hess

    return _Truncated(parts, inner.arity, R * c)


class _Truncated(Profile):
    growth = "compact"

    def __init__(self, parts, arity, support_radius):
        self._parts = parts
        self.arity = arity
        self.support_radius = support_radius

    def evaluate(self, U):
        return self._parts(np.atleast_2d(np.asarray(U, dtype=float)))


@dataclass(frozen=True)
class TruncationRow:
    radius: float
    mc: MCEstimate
    quadrature: complex
    target: complex

    @property
    def mc_gap(self):
        return abs(self.mc.value - self.target)

    @property
    def quad_gap(self):
        return abs(self.quadrature - self.target)


def truncation_study(model, spec, ef, x, t, radii, cfg):
    """``P(t) f_R (x)`` vs ``exp(lam t) f(x)`` for 1D truncations ``f_R = chi_R f``.

    ``radii`` are in standard deviations of the pushforward law.  Each row
    carries the Monte Carlo estimate (same seed for every R) and a panel
    quadrature of the same expectation, both against ``exp(lam t) f(x)``.
    """
    if not isinstance(spec, Spec1D):
        raise DomainError("truncation_study handles the one-dimensional reduction")
    sd = math.sqrt(spec.variance)
    x = _start(model, x)
    fx = lift_spec(ef, spec)(x)
    target = np.exp(ef.lam * t) * fx
    u0 = float(np.exp(spec.gamma * t) * (x @ spec.x0star))
    s_t = math.sqrt(spec.variance * (1 - math.exp(2 * spec.gamma * t)))
    ef.ensure_domain(max(radii) * sd + 1)
    samples = simulate_exact(model, x, t, cfg)
    rows = []
    for R in radii:
        prof = truncate(ef, R, sd)
        f = lift_spec(prof, spec)
        mc = MCEstimate.from_samples(f(samples))

        def integrand(z, prof=prof):
            u = u0 + s_t * z
            return prof(u[:, None]) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

        lo, hi = (-R * sd - u0) / s_t, (R * sd - u0) / s_t
        edges = np.linspace(lo, hi, 8 * int(math.ceil(hi - lo)) + 1)
        quad = panel_integrate(integrand, edges, tol=1e-12)
        rows.append(TruncationRow(float(R), mc, complex(quad), complex(target)))
    return rows
