import json
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from oulab import _kernels
from oulab._kernels import _hermite5_numpy, hermite5, integrate_linear2


def test_hermite5_reproduces_quintics(rng):
    c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    p = np.polynomial.Polynomial(c)
    ts = np.sort(rng.uniform(-2, 2, 12))
    x = rng.uniform(ts[0], ts[-1], 200)
    v, v1, v2 = hermite5(ts, p(ts), p.deriv(1)(ts), p.deriv(2)(ts), x)
    scale = np.abs(p(x)).max()
    assert np.abs(v - p(x)).max() <= 1e-12 * scale
    assert np.abs(v1 - p.deriv(1)(x)).max() <= 1e-10 * scale
    assert np.abs(v2 - p.deriv(2)(x)).max() <= 1e-8 * scale


def test_hermite5_paths_agree(rng):
    ts = np.cumsum(rng.uniform(0.01, 0.1, 300))
    y, dy, d2y = (rng.standard_normal(300) + 1j * rng.standard_normal(300) for _ in range(3))
    x = rng.uniform(ts[0] - 0.05, ts[-1] + 0.05, 1000)
    got = hermite5(ts, y, dy, d2y, x)
    ref = _hermite5_numpy(ts, y, dy, d2y, x)
    for a, b in zip(got, ref):
        np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-11 * np.abs(b).max())


def test_integrator_harmonic():
    ts, y, dy, d2y, status = integrate_linear2(0, 0, 0, 1.0, 0.0, 10.0, 1.0, 0.0)
    assert status == 0
    np.testing.assert_allclose(y[:, 0], np.cos(ts), atol=1e-10)
    np.testing.assert_allclose(dy[:, 0], -np.sin(ts), atol=1e-10)
    np.testing.assert_allclose(d2y[:, 0], -np.cos(ts), atol=1e-10)


def test_integrator_against_solve_ivp(rng):
    # coupled complex system with the t * y' drift term
    d1 = np.array([[0.8, 0.1j], [0.0, 0.5]])
    e0 = np.array([[0.3 - 0.2j, 0.1], [-0.2, 1.0 + 0.5j]])
    y0, dy0 = np.array([1.0, 0.5j]), np.array([0.0, 0.2])
    ts, y, dy, _, status = integrate_linear2(0, d1, 0, e0, 0.0, 3.0, y0, dy0)
    assert status == 0

    def rhs(t, z):
        return np.concatenate([z[2:], -(t * (d1 @ z[2:])) - e0 @ z[:2]])

    ref = solve_ivp(rhs, (0.0, 3.0), np.concatenate([y0, dy0]).astype(complex),
                    method="DOP853", rtol=1e-13, atol=1e-14, t_eval=ts)
    np.testing.assert_allclose(y, ref.y[:2].T, rtol=1e-9, atol=1e-10)


def test_integrator_singular_bessel():
    # y'' + y'/t + y = 0 is Bessel J0; start at t0 from the series
    from scipy.special import j0, j1
    t0 = 1e-3
    ts, y, _, _, status = integrate_linear2(1.0, 0, 0, 1.0, t0, 8.0, j0(t0), -j1(t0))
    assert status == 0
    np.testing.assert_allclose(y[:, 0].real, j0(ts), atol=1e-10)


_PROBE = """
import json, numpy as np
from oulab import _kernels
from oulab.eigenfn import solve_1d, residual_generator_1d
from oulab.ou_model import Spec1D
spec = Spec1D(gamma=-1.0, q=1.0)
ef = solve_1d(spec, -0.7 + 0.4j)
x = np.linspace(-5, 5, 41)
v = ef(x)
print(json.dumps({"numba": _kernels.USE_NUMBA, "re": v.real.tolist(), "im": v.imag.tolist(),
                  "res": residual_generator_1d(spec, ef), "T": ef.T}))
"""


def _probe(disable):
    env = dict(os.environ, OULAB_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


@pytest.mark.skipif(not _kernels.USE_NUMBA, reason="numba path unavailable")
def test_numba_and_numpy_paths_agree():
    fast, slow = _probe(False), _probe(True)
    assert fast["numba"] and not slow["numba"]
    a = np.array(fast["re"]) + 1j * np.array(fast["im"])
    b = np.array(slow["re"]) + 1j * np.array(slow["im"])
    np.testing.assert_allclose(a, b, rtol=1e-11)
    assert fast["T"] == slow["T"]
    assert slow["res"] <= 1e-8 and fast["res"] == pytest.approx(slow["res"], rel=1e-3, abs=1e-12)
