"""Periodic volume potentials with weakly singular kernels."""

__version__ = "0.1.0"

from .cell import PeriodicityCell, dist_to_lattice, fold, fold_to_cell, lattice_window, make_cell, corner_set
from .symbol import (
    EllipticOperator,
    check_strong_ellipticity,
    frequency_zero_set,
    laplace,
    modified_helmholtz,
    symbol,
)
from .kernels import (
    PeriodicKernel,
    estimate_norms,
    fourier_oracle,
    laplace_periodic_ewald,
    synthetic_power_kernel,
    yukawa_periodic,
)
from .quadrature import Ball, Box, build_boundary, build_complement, build_interior
from .density import BumpDensity, ConstantDensity, Density, PolyDensity, TrigDensity, make_density
from .potentials import (
    EvaluationRegion,
    PotentialReport,
    PotentialSetup,
    boundary_moment,
    derivative_identity_minus,
    derivative_identity_plus,
    grad_potential,
    higher_derivative_plus,
    potential_minus,
    potential_plus,
    solve_verify,
    sup_bound_check,
)
from .roumieu import RoumieuEstimate, acper_modulus, continuity_probe, kernel_class_norm, roumieu_seminorm
