"""Hot numeric kernels.

Every kernel has a numba-compiled path and a pure-numpy path.  Setting the
environment variable ``OULAB_DISABLE_NUMBA=1`` (or running without numba
installed) selects the pure-numpy path; the two paths agree to round-off.
"""
import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("OULAB_DISABLE_NUMBA", "0") in ("", "0")


def _maybe_njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@_maybe_njit
def _rhs(t, z, n, dm1, d1, em2, e0, singular):
    y = z[:n]
    dy = z[n:]
    out = np.empty(2 * n, dtype=np.complex128)
    out[:n] = dy
    acc = -(t * (d1 @ dy)) - e0 @ y
    if singular:
        acc = acc - (dm1 @ dy) / t - (em2 @ y) / (t * t)
    out[n:] = acc
    return out


@_maybe_njit
def _integrate_linear2(dm1, d1, em2, e0, singular, t0, t1, y0, dy0,
                       rtol, atol, h_init, h_max, max_steps):
    n = y0.shape[0]
    direction = 1.0 if t1 >= t0 else -1.0
    cap = 1024
    ts = np.empty(cap)
    zs = np.empty((cap, 2 * n), dtype=np.complex128)
    d2 = np.empty((cap, n), dtype=np.complex128)

    z = np.empty(2 * n, dtype=np.complex128)
    z[:n] = y0
    z[n:] = dy0
    t = t0
    k = np.empty((7, 2 * n), dtype=np.complex128)
    k[0] = _rhs(t, z, n, dm1, d1, em2, e0, singular)
    ts[0] = t
    zs[0] = z
    d2[0] = k[0, n:]
    count = 1
    h = min(abs(h_init), h_max)
    status = 0
    steps = 0
    span = abs(t1 - t0)
    while abs(t - t0) < span * (1.0 - 1e-15):
        if steps >= max_steps:
            status = 1
            break
        remaining = span - abs(t - t0)
        if h > remaining:
            h = remaining
        if h < 1e-14 * max(1.0, abs(t)):
            status = 2
            break
        hs = direction * h
        for s in range(1, 7):
            zi = z.copy()
            for j in range(s):
                if _A[s, j] != 0.0:
                    zi += hs * _A[s, j] * k[j]
            k[s] = _rhs(t + _C[s] * hs, zi, n, dm1, d1, em2, e0, singular)
        znew = z.copy()
        for j in range(6):
            if _A[6, j] != 0.0:
                znew += hs * _A[6, j] * k[j]
        err = 0.0
        for i in range(2 * n):
            ei = 0.0j
            for j in range(7):
                ei += _E[j] * k[j, i]
            sc = atol + rtol * max(abs(z[i]), abs(znew[i]))
            err += (abs(hs * ei) / sc) ** 2
        err = np.sqrt(err / (2 * n))
        steps += 1
        if err <= 1.0:
            t = t + hs
            z = znew
            k[0] = k[6]
            if count == cap:
                cap *= 2
                ts2 = np.empty(cap)
                zs2 = np.empty((cap, 2 * n), dtype=np.complex128)
                d22 = np.empty((cap, n), dtype=np.complex128)
                ts2[:count] = ts[:count]
                zs2[:count] = zs[:count]
                d22[:count] = d2[:count]
                ts, zs, d2 = ts2, zs2, d22
            ts[count] = t
            zs[count] = z
            d2[count] = k[0, n:]
            count += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h = min(h * fac, h_max)
    return ts[:count].copy(), zs[:count, :n].copy(), zs[:count, n:].copy(), d2[:count].copy(), status


def integrate_linear2(dm1, d1, em2, e0, t0, t1, y0, dy0, *, rtol=1e-12, atol=1e-300,
                      h_init=1e-3, h_max=0.02, max_steps=2_000_000):
    """Integrate ``y'' = -(dm1/t + d1 t) y' - (em2/t^2 + e0) y`` from t0 to t1.

    All coefficient matrices are complex ``(n, n)``; ``y`` is a complex n-vector.
    Returns ``(ts, y, dy, d2y, status)`` with one row per accepted step, where
    ``d2y`` is the right-hand side evaluated at the node.  ``status`` is 0 on
    success, 1 when ``max_steps`` is exhausted and 2 on step-size underflow.
    """
    as_c = lambda a: np.ascontiguousarray(np.atleast_2d(a), dtype=np.complex128)  # noqa: E731
    dm1, d1, em2, e0 = as_c(dm1), as_c(d1), as_c(em2), as_c(e0)
    singular = bool(np.any(dm1 != 0) or np.any(em2 != 0))
    y0 = np.ascontiguousarray(np.atleast_1d(y0), dtype=np.complex128)
    dy0 = np.ascontiguousarray(np.atleast_1d(dy0), dtype=np.complex128)
    return _integrate_linear2(dm1, d1, em2, e0, singular, float(t0), float(t1), y0, dy0,
                              float(rtol), float(atol), float(h_init), float(h_max),
                              int(max_steps))


# Quintic Hermite basis: rows are basis functions in the order
# (y0, h y0', h^2 y0'', y1, h y1', h^2 y1''), columns are powers s^0..s^5.
_H5 = np.array([
    [1, 0, 0, -10, 15, -6],
    [0, 1, 0, -6, 8, -3],
    [0, 0, 0.5, -1.5, 1.5, -0.5],
    [0, 0, 0, 10, -15, 6],
    [0, 0, 0, -4, 7, -3],
    [0, 0, 0, 0.5, -1, 0.5],
], dtype=np.float64)


def _basis(s, deriv):
    """Quintic Hermite basis (6, len(s)) or its ``deriv``-th s-derivative."""
    coef = _H5.copy()
    for _ in range(deriv):
        coef = coef[:, 1:] * np.arange(1, coef.shape[1])
    powers = s[None, :] ** np.arange(coef.shape[1])[:, None]
    return coef @ powers


def _hermite5_numpy(ts, y, dy, d2y, x):
    idx = np.clip(np.searchsorted(ts, x, side="right") - 1, 0, len(ts) - 2)
    h = ts[idx + 1] - ts[idx]
    s = (x - ts[idx]) / h
    data = np.stack([y[idx], h * dy[idx], h * h * d2y[idx],
                     y[idx + 1], h * dy[idx + 1], h * h * d2y[idx + 1]])
    v = np.sum(_basis(s, 0) * data, axis=0)
    v1 = np.sum(_basis(s, 1) * data, axis=0) / h
    v2 = np.sum(_basis(s, 2) * data, axis=0) / (h * h)
    return v, v1, v2


@_maybe_njit
def _hermite5_loop(ts, y, dy, d2y, x):
    m = x.shape[0]
    out0 = np.empty(m, dtype=np.complex128)
    out1 = np.empty(m, dtype=np.complex128)
    out2 = np.empty(m, dtype=np.complex128)
    nt = ts.shape[0]
    for p in range(m):
        xi = x[p]
        i = np.searchsorted(ts, xi, side="right") - 1
        if i < 0:
            i = 0
        if i > nt - 2:
            i = nt - 2
        h = ts[i + 1] - ts[i]
        s = (xi - ts[i]) / h
        s2 = s * s
        s3 = s2 * s
        s4 = s3 * s
        s5 = s4 * s
        a0, a1, a2 = y[i], h * dy[i], h * h * d2y[i]
        b0, b1, b2 = y[i + 1], h * dy[i + 1], h * h * d2y[i + 1]
        h00 = 1 - 10 * s3 + 15 * s4 - 6 * s5
        h01 = s - 6 * s3 + 8 * s4 - 3 * s5
        h02 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5
        h10 = 10 * s3 - 15 * s4 + 6 * s5
        h11 = -4 * s3 + 7 * s4 - 3 * s5
        h12 = 0.5 * s3 - s4 + 0.5 * s5
        out0[p] = h00 * a0 + h01 * a1 + h02 * a2 + h10 * b0 + h11 * b1 + h12 * b2
        g00 = -30 * s2 + 60 * s3 - 30 * s4
        g01 = 1 - 18 * s2 + 32 * s3 - 15 * s4
        g02 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4
        g10 = 30 * s2 - 60 * s3 + 30 * s4
        g11 = -12 * s2 + 28 * s3 - 15 * s4
        g12 = 1.5 * s2 - 4 * s3 + 2.5 * s4
        out1[p] = (g00 * a0 + g01 * a1 + g02 * a2 + g10 * b0 + g11 * b1 + g12 * b2) / h
        f00 = -60 * s + 180 * s2 - 120 * s3
        f01 = -36 * s + 96 * s2 - 60 * s3
        f02 = 1 - 9 * s + 18 * s2 - 10 * s3
        f10 = 60 * s - 180 * s2 + 120 * s3
        f11 = -24 * s + 84 * s2 - 60 * s3
        f12 = 3 * s - 12 * s2 + 10 * s3
        out2[p] = (f00 * a0 + f01 * a1 + f02 * a2 + f10 * b0 + f11 * b1 + f12 * b2) / (h * h)
    return out0, out1, out2


def hermite5(ts, y, dy, d2y, x):
    """Evaluate the piecewise quintic Hermite interpolant and two derivatives.

    ``ts`` must be strictly increasing.  Points outside ``[ts[0], ts[-1]]`` are
    evaluated with the polynomial of the nearest end interval.
    """
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape
    flat = np.ascontiguousarray(x.ravel())
    args = [np.ascontiguousarray(a, dtype=np.complex128) for a in (y, dy, d2y)]
    if USE_NUMBA:
        v, v1, v2 = _hermite5_loop(np.ascontiguousarray(ts, dtype=np.float64), *args, flat)
    else:
        v, v1, v2 = _hermite5_numpy(np.asarray(ts, dtype=np.float64), *args, flat)
    return v.reshape(shape), v1.reshape(shape), v2.reshape(shape)
