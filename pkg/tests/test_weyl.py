import numpy as np
import pytest

from oulab.eigenfn import (FourierFamily, WeylOptions, lattice_indices, poly_eigen_2d,
                           residual_generator_2d, solve_2d_isotropic, weyl_residual_minimize)
from oulab.errors import DomainError
from oulab.ou_model import Spec2D

ISO = Spec2D(a=-1.0, b=2.0, R=np.eye(2))
# R = G^T G with G = I + 0.35 N(0, 1), seed 7 (the demo2d_general model)
R_DEMO = np.array([[1.0100673592851728, 0.03856546259067476],
                   [0.03856546259067476, 0.48468004600158815]])
DEMO = Spec2D(a=-1.0, b=2.0, R=R_DEMO)
SKEW = Spec2D(a=-0.6, b=1.4, R=np.array([[2.0, 0.6], [0.6, 0.5]]))


def fd_generator(spec, f, p, h=1e-3):
    """Central-difference ``L2 f(p)`` for a scalar callable on (N, 2) arrays."""
    e = np.eye(2) * h
    g = np.array([(f(p + e[i]) - f(p - e[i])) / (2 * h) for i in range(2)])
    H = np.empty((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            H[i, j] = (f(p + e[i] + e[j]) - f(p + e[i] - e[j]) - f(p - e[i] + e[j])
                       + f(p - e[i] - e[j])) / (4 * h * h)
    return 0.5 * np.sum(spec.R * H) + (spec.C @ p) @ g


class TestFamily:
    @pytest.mark.parametrize("spec", [DEMO, SKEW])
    @pytest.mark.parametrize("lam", [-0.9 + 0.7j, -1.5 - 0.75j])
    def test_exact_frame_residual(self, spec, lam):
        fam = FourierFamily(spec, lam, opts=WeylOptions(half_modes=16))
        assert fam.residual(fam.exact_params()) <= 1e-7
        assert fam.residual(np.zeros(fam.n_params)) > 1e-3

    def test_mode_truncation_converges_geometrically(self):
        res = []
        for K in (4, 8, 12, 16):
            fam = FourierFamily(SKEW, -0.9 + 0.7j, opts=WeylOptions(half_modes=K))
            res.append(fam.residual(fam.exact_params()))
        assert all(b < 1e-2 * a for a, b in zip(res, res[1:]))

    def test_exact_frame_is_eigenfunction_by_finite_differences(self, rng):
        lam = -0.9 + 0.7j
        fam = FourierFamily(DEMO, lam)
        x = fam.exact_params()

        def f(p):
            return fam.evaluate(x, p[None])[0]

        for p in rng.normal(size=(4, 2)):
            rel = abs(fd_generator(DEMO, f, p) - lam * f(p)) / abs(f(p))
            assert rel <= 1e-4

    def test_wrong_lambda_negative_control(self, rng):
        fam = FourierFamily(DEMO, -0.9 + 0.7j)
        x = fam.exact_params()

        def f(p):
            return fam.evaluate(x, p[None])[0]

        p = rng.normal(size=2)
        wrong = -1.1 + 0.7j
        assert abs(fd_generator(DEMO, f, p) - wrong * f(p)) / abs(f(p)) > 1e-2

    @pytest.mark.parametrize("lam", [-0.9 + 0.7j, -2.0 + 0.3j])
    def test_isotropic_member_is_separated_solution(self, lam, rng):
        fam = FourierFamily(ISO, lam)
        x = fam.exact_params()
        assert np.allclose(fam.frame(x), fam.frame(np.zeros(7)) * fam.frame(x)[0, 0], atol=1e-12)
        ef = solve_2d_isotropic(ISO, lam)
        U = rng.normal(size=(10, 2))
        ratio = fam.evaluate(x, U) / ef(U)
        assert np.allclose(ratio, ratio[0], rtol=1e-8)

    def test_rejects_right_half_plane(self):
        with pytest.raises(DomainError):
            FourierFamily(DEMO, 0.1 + 1j)


class TestLattice:
    def test_indices(self):
        mu = complex(DEMO.a, DEMO.b)
        assert lattice_indices(DEMO, 2 * mu + mu.conjugate()) == (2, 1)
        assert lattice_indices(DEMO, -1.0 + 0.5j) is None
        assert lattice_indices(DEMO, 11 * mu) is None

    @pytest.mark.parametrize("n1,n2", [(1, 0), (1, 1), (2, 1), (0, 3), (3, 3)])
    def test_lattice_points(self, n1, n2):
        lam = n1 * complex(DEMO.a, DEMO.b) + n2 * complex(DEMO.a, -DEMO.b)
        rep = weyl_residual_minimize(DEMO, lam)
        assert rep.member == "poly"
        assert rep.params == (n1, n2)
        assert rep.residual <= 1e-6


class TestMinimize:
    @pytest.mark.parametrize("lam", [-0.9 + 0.7j, -1.5 + 0.5j, -0.25 - 3j])
    def test_isotropic_within_constructive(self, lam):
        rep = weyl_residual_minimize(ISO, lam)
        constructive = residual_generator_2d(ISO, solve_2d_isotropic(ISO, lam))
        assert rep.residual <= 1.1 * constructive

    def test_general_demo_point(self):
        rep = weyl_residual_minimize(DEMO, -1.0 + 1.0j)
        assert rep.residual <= 0.1
        assert rep.member == "fourier"
        assert all(b <= a for a, b in zip(rep.history, rep.history[1:]))
        assert rep.history[-1] == rep.residual
        assert rep.evaluations >= rep.iterations

    def test_near_boundary_reported(self):
        rep = weyl_residual_minimize(DEMO, -1e-3 + 0.8j, opts=WeylOptions(max_iter=40))
        assert np.isfinite(rep.residual)
        assert all(b <= a for a, b in zip(rep.history, rep.history[1:]))
        d = rep.as_dict()
        assert d["lambda_re"] == -1e-3 and "message" in d

    def test_non_progress_is_reported(self):
        rep = weyl_residual_minimize(SKEW, -1.3 + 0.4j,
                                     opts=WeylOptions(max_iter=60, patience=3, target=0.0))
        assert rep.non_progress
        assert rep.message == "no improvement over 3 iterations"
        assert np.isfinite(rep.residual)

    def test_rejects_right_half_plane(self):
        with pytest.raises(DomainError):
            weyl_residual_minimize(DEMO, 0.0 + 1j)

    def test_poly_member_matches_poly_eigen(self):
        lam = 2 * complex(SKEW.a, -SKEW.b)
        rep = weyl_residual_minimize(SKEW, lam)
        assert rep.params == (0, 2)
        assert poly_eigen_2d(SKEW, 0, 2).lam == pytest.approx(lam)
