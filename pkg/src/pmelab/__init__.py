"""pmelab: a numerical laboratory for the porous medium equation ``u_t = (u^m)_xx``.

Implicit finite-difference solvers (plain, signed/regularized, obstacle),
the Schwarz alternating method on unions of cylinders, exact solutions,
and numerical classifiers for weak, very weak and superporous
supersolutions.

Set ``PMELAB_DISABLE_NUMBA=1`` before import to run the pure-numpy kernels.
"""

from ._kernels import USE_NUMBA
from .classify import ClassificationReport, TestFunction, caccioppoli_check, classify, residual_scan, superporous_check
from .domain import Cylinder, CylinderUnion, IndexBox, SpatialMesh, TimeGrid, build_cylinder, parabolic_boundary
from .exact import BarenblattParams, barenblatt, barenblatt_mass, lambda_exponent, steady_state, support_radius
from .gridfunction import GridFunction
from .nonlinearity import RegularizedPhi, phi, phi_inverse, phi_prime, phi_reg, phi_reg_prime
from .perron import boundary_attainment, perron_ladder, perturbation_gap
from .schwarz import SchwarzError, schwarz_solve
from .solver import (
    BoundaryData,
    SolverConfig,
    SolverDivergence,
    SolveReport,
    oleinik_gap,
    scheme_residual,
    solve_bvp,
    solve_obstacle,
    solve_signed,
    solve_union,
)

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA",
    "BarenblattParams",
    "BoundaryData",
    "ClassificationReport",
    "Cylinder",
    "CylinderUnion",
    "GridFunction",
    "IndexBox",
    "RegularizedPhi",
    "SchwarzError",
    "SolveReport",
    "SolverConfig",
    "SolverDivergence",
    "SpatialMesh",
    "TestFunction",
    "TimeGrid",
    "barenblatt",
    "barenblatt_mass",
    "boundary_attainment",
    "build_cylinder",
    "caccioppoli_check",
    "classify",
    "lambda_exponent",
    "oleinik_gap",
    "parabolic_boundary",
    "perron_ladder",
    "perturbation_gap",
    "phi",
    "phi_inverse",
    "phi_prime",
    "phi_reg",
    "phi_reg_prime",
    "residual_scan",
    "scheme_residual",
    "schwarz_solve",
    "solve_bvp",
    "solve_obstacle",
    "solve_signed",
    "solve_union",
    "steady_state",
    "superporous_check",
    "support_radius",
]
