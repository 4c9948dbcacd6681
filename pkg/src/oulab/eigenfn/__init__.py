"""Eigenfunctions of the reduced one- and two-dimensional OU operators."""
from ._common import SolveOptions, Tabulated
from .one_d import (Eigenfunction1D, hermite_case, hermite_polynomial, l1_norm, lattice_index,
                    lp_truncated_norms, reduced_generator_1d, residual_generator_1d,
                    residual_semigroup_1d, semigroup_time_limit, solve_1d)
from .two_d import (Eigenfunction2D, PolyEigen2D, default_mode, l1_norm_2d, lp_truncated_norms_2d,
                    poly_eigen_2d,
                    reduced_generator_2d, residual_generator_2d, residual_semigroup_2d,
                    solve_2d_isotropic)
from .weyl import (DEMO_GRID, FourierFamily, ResidualReport, WeylOptions, lattice_indices,
                   weyl_residual_minimize)

__all__ = [
    "SolveOptions", "Tabulated",
    "Eigenfunction1D", "hermite_case", "hermite_polynomial", "l1_norm", "lattice_index",
    "lp_truncated_norms", "reduced_generator_1d", "residual_generator_1d",
    "residual_semigroup_1d", "semigroup_time_limit", "solve_1d",
    "Eigenfunction2D", "PolyEigen2D", "default_mode", "l1_norm_2d", "lp_truncated_norms_2d",
    "poly_eigen_2d",
    "reduced_generator_2d", "residual_generator_2d", "residual_semigroup_2d",
    "solve_2d_isotropic",
    "DEMO_GRID", "FourierFamily", "ResidualReport", "WeylOptions", "lattice_indices",
    "weyl_residual_minimize",
]
