"""Approximate eigenfunctions for general (non-isotropic) planar diffusion.

Family used by :func:`weyl_residual_minimize`
---------------------------------------------
Let ``Sigma`` be the stationary covariance (``C Sigma + Sigma C^T + R = 0``)
and write ``f(t) = exp(t^T Sigma^{-1} t / 2) v(u)`` with ``u = c Sigma^{-1} t``.
Because ``-Sigma C^T Sigma^{-1}`` is conjugate to ``K = |a| I + b J``, the
scaled equation reads

    1/2 Tr(R_u D^2 v) + |a| rho dv/drho + b dv/dtheta - (2a + lam) v = 0,

with ``R_u = c^2 Sigma^{-1} R Sigma^{-1}`` (``c`` normalises its mean
eigenvalue to ``2|a|``).  Family members are Fourier integrals

    v(u) = int exp(-eta^T B eta / 2) H(eta) exp(i eta.u) d eta,
    H = r^p_m e^{i m theta} + c_- r^p_{m-2} e^{i(m-2) theta} + c_+ r^p_{m+2} e^{i(m+2) theta},

with ``p_n = (i n b - lam)/|a|`` (``Re p_n > 0``), a symmetric positive
definite frame ``B = expm(S)`` (three real parameters) and two complex shape
parameters.  The member is an exact eigenfunction when ``K B + B K^T = R_u``;
for other frames the residual measures the mismatch.  Each angular mode of v
is a Hankel transform of a Gaussian times a modified Bessel weight, computed
by Gauss-Legendre quadrature in ``sqrt(r)``; the residual is evaluated on the
truncated mode sum against the untruncated operator.

At lattice points ``n1 mu + n2 conj(mu)`` the exact polynomial eigenfunction
is also a family member; for isotropic ``R`` the separated solution is.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.special

from ..errors import DomainError
from ._common import panel_nodes
from .two_d import (MAX_POLY_DEGREE, default_mode, poly_eigen_2d, reduced_generator_2d,
                    residual_generator_2d, solve_2d_isotropic)

# Grid of eigenvalues used for the general-R demonstration.
DEMO_GRID = (-0.5 + 0.5j, -1.0 + 1.0j, -1.5 - 0.75j, -0.75 + 2.0j, -2.0 + 0.0j, -0.3 - 1.2j)


@dataclass
class ResidualReport:
    lam: complex
    residual: float
    member: str
    history: list = field(default_factory=list)
    params: tuple = ()
    iterations: int = 0
    evaluations: int = 0
    non_progress: bool = False
    message: str = ""

    def as_dict(self):
        return {
            "lambda_re": self.lam.real, "lambda_im": self.lam.imag, "residual": self.residual,
            "member": self.member, "iterations": self.iterations, "evaluations": self.evaluations,
            "non_progress": self.non_progress, "message": self.message,
        }


@dataclass(frozen=True)
class WeylOptions:
    half_modes: int = 8
    T: float = 10.0
    rho_panel: float = 0.5
    max_iter: int = 400
    patience: int = 200
    xatol: float = 1e-7
    fatol: float = 1e-12
    target: float = 1e-8


def lattice_indices(spec, lam, tol=1e-10):
    """``(n1, n2)`` with ``lam = n1 mu + n2 conj(mu)`` and small degree, else None."""
    lam = complex(lam)
    s = lam.real / spec.a
    d = lam.imag / spec.b
    n1, n2 = (s + d) / 2, (s - d) / 2
    r1, r2 = round(n1), round(n2)
    if min(r1, r2) < 0 or r1 + r2 > MAX_POLY_DEGREE:
        return None
    if abs(n1 - r1) <= tol * max(1, r1) and abs(n2 - r2) <= tol * max(1, r2):
        return int(r1), int(r2)
    return None


class FourierFamily:
    """Fourier-integral family of scaled eigenfunction candidates (see module doc)."""

    n_params = 7

    def __init__(self, spec, lam, m=None, opts=WeylOptions()):
        self.spec = spec
        self.lam = complex(lam)
        if not self.lam.real < 0:
            raise DomainError(f"need Re(lambda) < 0, got {self.lam}")
        self.m = default_mode(spec, lam) if m is None else int(m)
        self.opts = opts
        sigma = scipy.linalg.solve_continuous_lyapunov(spec.C, -spec.R)
        S_inv = np.linalg.inv(0.5 * (sigma + sigma.T))
        self.sigma_inv = S_inv
        Ru = S_inv @ spec.R @ S_inv
        self.scale = math.sqrt(-2 * spec.a / (0.5 * np.trace(Ru)))
        self.to_u = self.scale * S_inv
        self.Ru = self.scale ** 2 * Ru
        K = opts.half_modes + 1
        self.modes = np.array([self.m + 2 * k for k in range(-K, K + 1)])
        self.ext = np.concatenate([[self.modes[0] - 2], self.modes, [self.modes[-1] + 2]])
        self.mats = self._matrices()
        edges = np.linspace(0.0, opts.T, int(round(opts.T / opts.rho_panel)) + 1)
        self.rho, self.rho_w = panel_nodes(edges[:-1], edges[1:], 6)
        self._table = None

    def exact_frame(self):
        """The frame ``B`` with ``K B + B K^T = R_u``."""
        a, b = self.spec.a, self.spec.b
        K = np.array([[-a, -b], [b, -a]])
        B = scipy.linalg.solve_continuous_lyapunov(K, self.Ru)
        return 0.5 * (B + B.T)

    def exact_params(self):
        """Parameter vector reproducing :meth:`exact_frame` with no mode mixing."""
        S = scipy.linalg.logm(self.exact_frame()).real
        return np.array([S[0, 0], S[0, 1], S[1, 1], 0.0, 0.0, 0.0, 0.0])

    def _matrices(self):
        Ru = self.Ru
        rbar = 0.5 * np.trace(Ru)
        delta = 2 * (0.5 * (Ru[0, 0] - Ru[1, 1]) + 1j * Ru[0, 1])
        dbar = np.conj(delta)
        a, b, lam = self.spec.a, self.spec.b, self.lam
        rows, cols = self.ext, self.modes
        shape = (len(rows), len(cols))
        M2, P1, Q1, P2, Q0 = (np.zeros(shape, dtype=complex) for _ in range(5))
        col = {n: j for j, n in enumerate(cols)}
        for i, n in enumerate(rows):
            if n in col:
                j = col[n]
                M2[i, j] = 0.5 * rbar
                P1[i, j] = 0.5 * rbar
                Q1[i, j] = -a
                P2[i, j] = -0.5 * rbar * n * n
                Q0[i, j] = 1j * n * b - 2 * a - lam
            if n + 2 in col:
                j = col[n + 2]
                M2[i, j] = delta / 8
                P1[i, j] = delta * (2 * n + 3) / 8
                P2[i, j] = delta * n * (n + 2) / 8
            if n - 2 in col:
                j = col[n - 2]
                M2[i, j] = dbar / 8
                P1[i, j] = -dbar * (2 * n - 3) / 8
                P2[i, j] = dbar * n * (n - 2) / 8
        return M2, P1, Q1, P2, Q0

    def _radial_rule(self):
        """Nodes/weights in ``r`` and Bessel tables ``J_n(r rho)``.

        The range covers Gaussian envelopes down to half the decay rate of
        the exact frame; frames decaying slower than that are truncated and
        show up as large residuals.
        """
        if self._table is None:
            decay = 0.5 * np.linalg.eigvalsh(self.exact_frame())[0]
            r_max = math.sqrt(2 * 40.0 / decay)
            panels = int(r_max * self.opts.T / 4) + 16
            edges = np.linspace(0.0, math.sqrt(r_max), panels + 1)
            x, w = panel_nodes(edges[:-1], edges[1:], 12)
            r, wr = x * x, 2 * x * w
            arg = np.outer(r, self.rho)
            orders = range(self.modes[0] - 2, self.modes[-1] + 3)
            J = _bessel_table(max(abs(n) for n in orders), arg)
            self._table = (r, wr, J)
        return self._table

    def frame(self, x):
        S = np.array([[x[0], x[1]], [x[1], x[2]]])
        return scipy.linalg.expm(S)

    def _weights(self, x, r):
        """Per-mode radial weights ``Phi_n(r)`` (without the ``2 pi i^n`` factor)."""
        B = self.frame(x)
        beta_bar = 0.5 * np.trace(B)
        beta_d = math.hypot(0.5 * (B[0, 0] - B[1, 1]), B[0, 1])
        two_theta = math.atan2(B[0, 1], 0.5 * (B[0, 0] - B[1, 1]))
        xarg = 0.5 * beta_d * r * r
        env = np.exp(-0.5 * (beta_bar - beta_d) * r * r)
        amps = {self.m: 1.0, self.m - 2: complex(x[3], x[4]), self.m + 2: complex(x[5], x[6])}
        a, b, lam = self.spec.a, self.spec.b, self.lam
        out = np.zeros((len(self.modes), len(r)), dtype=complex)
        for col, n in enumerate(self.modes):
            for j, c in amps.items():
                if c == 0 or (n - j) % 2:
                    continue
                k = (n - j) // 2
                p = (1j * j * b - lam) / -a
                out[col] += (c * (-1.0) ** k * np.exp(-1j * k * two_theta)
                             * scipy.special.ive(k, xarg) * r ** p)
            out[col] *= env
        return out

    def evaluate(self, x, T):
        """Candidate ``f`` at original-frame points ``T`` (shape ``(N, 2)``)."""
        T = np.atleast_2d(np.asarray(T, dtype=float))
        U = T @ self.to_u.T
        rho, theta = np.hypot(U[:, 0], U[:, 1]), np.arctan2(U[:, 1], U[:, 0])
        r, wr, _ = self._radial_rule()
        phi = self._weights(x, r) * (wr * r * 2 * math.pi)
        arg = np.outer(r, rho)
        v = np.zeros(len(rho), dtype=complex)
        for col, n in enumerate(self.modes):
            v += 1j ** n * (phi[col] @ scipy.special.jv(n, arg)) * np.exp(1j * n * theta)
        quad = 0.5 * np.einsum("ni,ij,nj->n", T, self.sigma_inv, T)
        return v * np.exp(quad)

    def modes_of(self, x):
        """``V_n, V_n', V_n''`` at the rho nodes (shape ``(nodes, modes)``)."""
        r, wr, J = self._radial_rule()
        phi = self._weights(x, r) * (wr * 2 * math.pi)
        V = np.zeros((len(self.rho), len(self.modes)), dtype=complex)
        V1, V2 = V.copy(), V.copy()
        for col, n in enumerate(self.modes):
            w = phi[col] * 1j ** n
            V[:, col] = (w * r) @ J[n]
            V1[:, col] = (w * r * r) @ (0.5 * (J[n - 1] - J[n + 1]))
            V2[:, col] = (w * r ** 3) @ (0.25 * (J[n - 2] - 2 * J[n] + J[n + 2]))
        return V, V1, V2

    def residual(self, x):
        M2, P1, Q1, P2, Q0 = self.mats
        rho = self.rho[:, None]
        V, V1, V2 = self.modes_of(x)
        res = V2 @ M2.T + (V1 / rho) @ P1.T + (V1 * rho) @ Q1.T + (V / rho ** 2) @ P2.T + V @ Q0.T
        nth = 4 * len(self.ext)
        theta = 2 * np.pi * np.arange(nth) / nth
        num = np.abs(res @ np.exp(1j * np.outer(self.ext, theta))).mean(axis=1)
        den = np.abs(V @ np.exp(1j * np.outer(self.modes, theta))).mean(axis=1)
        total = np.sum(self.rho_w * self.rho * den)
        if not np.isfinite(total) or total == 0:
            return math.inf
        return float(np.sum(self.rho_w * self.rho * num) / total)


def _bessel_table(top, z):
    """``{n: J_n(z)}`` for ``|n| <= top`` by downward recurrence from two exact orders."""
    J = {top + 1: scipy.special.jv(top + 1, z), top: scipy.special.jv(top, z)}
    for n in range(top, 0, -1):
        J[n - 1] = (2 * n / z) * J[n] - J[n + 1]
    for n in range(1, top + 1):
        J[-n] = (-1.0) ** n * J[n]
    return J


def _poly_residual(spec, poly, T=6.0, n_rho=60, n_theta=64):
    """Relative L1(nu_inf) residual of a planar profile on an ellipse of the invariant law."""
    rinf = scipy.linalg.solve_continuous_lyapunov(spec.C, -spec.R)
    L = np.linalg.cholesky(0.5 * (rinf + rinf.T))
    edges = np.linspace(0, T, n_rho + 1)
    rho, ws = panel_nodes(edges[:-1], edges[1:], 6)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    S = np.stack([np.outer(rho, np.cos(theta)), np.outer(rho, np.sin(theta))], -1).reshape(-1, 2)
    U = S @ L.T
    weight = (ws * rho * np.exp(-0.5 * rho * rho))[:, None].repeat(n_theta, 1).ravel()
    prof = poly.profile()
    res = reduced_generator_2d(spec, prof, U) - poly.lam * prof(U)
    return float(np.sum(weight * np.abs(res)) / np.sum(weight * np.abs(prof(U))))


def weyl_residual_minimize(spec, lam, m=None, opts=WeylOptions()):
    """Minimise the relative ``L1(nu_inf)`` generator residual over the family.

    The optimiser is Nelder-Mead over the frame ``S`` (``B = expm(S)``, starting
    from the isotropic guess ``B = I``) and the shape parameters ``c_-, c_+``.  The report
    carries the best-so-far residual after each iteration (monotone by
    construction); the reported residual is the smaller of its last entry and
    the exact lattice/isotropic members when those apply.  No improvement over ``opts.patience`` iterations ends the
    search with ``non_progress=True``; this is reported, not raised.
    """
    lam = complex(lam)
    if not lam.real < 0:
        raise DomainError(f"need Re(lambda) < 0, got {lam}")
    candidates = []
    idx = lattice_indices(spec, lam)
    if idx is not None:
        poly = poly_eigen_2d(spec, *idx)
        candidates.append(("poly", _poly_residual(spec, poly), idx))
    if spec.is_isotropic:
        ef = solve_2d_isotropic(spec, lam, m)
        candidates.append(("isotropic", residual_generator_2d(spec, ef), (ef.m,)))

    for name, value, p in candidates:
        if value <= opts.target:
            return ResidualReport(lam=lam, residual=float(value), member=name, history=[value],
                                  params=p, message=f"exact {name} member")

    fam = FourierFamily(spec, lam, m, opts)
    history = []
    best = [math.inf, None]
    since = [0]
    evals = [0]

    def objective(x):
        evals[0] += 1
        val = fam.residual(x)
        if not np.isfinite(val):
            val = math.inf
        if val < best[0]:
            best[0], best[1] = val, tuple(float(v) for v in x)
        return val

    def callback(xk):
        prev = history[-1] if history else math.inf
        history.append(best[0])
        since[0] = 0 if best[0] < prev else since[0] + 1
        if since[0] >= opts.patience or best[0] <= opts.target:
            raise StopIteration

    npar = fam.n_params
    x0 = np.zeros(npar)
    objective(x0)
    simplex = np.vstack([x0] + [x0 + 0.2 * e for e in np.eye(npar)])
    try:
        result = scipy.optimize.minimize(
            objective, x0, method="Nelder-Mead", callback=callback,
            options=dict(maxiter=opts.max_iter, initial_simplex=simplex, xatol=opts.xatol,
                         fatol=opts.fatol))
        message = str(result.message)
    except StopIteration:
        message = ""
    non_progress = since[0] >= opts.patience
    if best[0] <= opts.target:
        message = f"reached target residual {opts.target:g}"
    elif non_progress:
        message = f"no improvement over {opts.patience} iterations"
    member, residual, params = "fourier", best[0], best[1]
    for name, value, p in candidates:
        if value < residual:
            member, residual, params = name, value, p
    history = history or [best[0]]
    return ResidualReport(lam=lam, residual=float(residual), member=member, history=history,
                          params=params, iterations=len(history), evaluations=evals[0],
                          non_progress=non_progress, message=message)
